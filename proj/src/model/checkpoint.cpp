#include "byov/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace byov::model {

using nlohmann::json;

json arch_to_json(const ArchConfig& a) {
  return {{"d_in", a.d_in},
          {"d_model", a.d_model},
          {"encoder_blocks", a.encoder_blocks},
          {"decoder_blocks", a.decoder_blocks},
          {"heads", a.heads},
          {"max_len", a.max_len},
          {"encoder_mlp_ratio", a.encoder_mlp_ratio},
          {"decoder_mlp_ratio", a.decoder_mlp_ratio},
          {"ln_eps", a.ln_eps},
          {"final_norm", a.final_norm}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.d_in = j.at("d_in").get<std::size_t>();
  a.d_model = j.at("d_model").get<std::size_t>();
  a.encoder_blocks = j.at("encoder_blocks").get<std::size_t>();
  a.decoder_blocks = j.at("decoder_blocks").get<std::size_t>();
  a.heads = j.at("heads").get<std::size_t>();
  a.max_len = j.at("max_len").get<std::size_t>();
  a.encoder_mlp_ratio = j.at("encoder_mlp_ratio").get<double>();
  a.decoder_mlp_ratio = j.at("decoder_mlp_ratio").get<double>();
  a.ln_eps = j.at("ln_eps").get<double>();
  a.final_norm = j.at("final_norm").get<bool>();
  a.validate();
  return a;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_tensor(std::string& out, const std::string& name, const num::Shape& shape, std::span<const float> data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (float f : data) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  std::uint32_t u32() {
    need(4, "integer");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n, "string");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void floats(std::span<float> out) {
    need(out.size() * 4, "tensor payload");
    for (auto& f : out) f = std::bit_cast<float>(u32());
  }

  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(origin_ + ": " + what); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) fail(std::string("truncated ") + what);
  }
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

struct Record {
  std::string name;
  num::Shape shape;
  std::vector<float> data;
};

Record read_tensor(Reader& r) {
  Record rec;
  rec.name = r.str(r.u32());
  const std::uint32_t ndim = r.u32();
  if (ndim == 0 || ndim > 8) r.fail("tensor '" + rec.name + "' has an invalid rank");
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    rec.shape.push_back(r.u32());
    n *= rec.shape.back();
  }
  rec.data.resize(n);
  r.floats(rec.data);
  return rec;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  json header = {{"arch", arch_to_json(ck.arch)},
                 {"step", ck.step},
                 {"rng_state", ck.rng_state},
                 {"config", ck.config},
                 {"optimizer", nullptr}};
  if (ck.optimizer) {
    const auto& c = ck.optimizer->config;
    header["optimizer"] = {{"lr", c.lr},
                           {"beta1", c.beta1},
                           {"beta2", c.beta2},
                           {"eps", c.eps},
                           {"step_count", ck.optimizer->step_count}};
  }
  const std::string header_text = header.dump();
  const auto named = ck.params.named();

  std::string out = "BYVC";
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  const std::size_t count = named.size() * (ck.optimizer ? 3 : 1);
  put_u32(out, static_cast<std::uint32_t>(count));
  for (const auto& [name, t] : named) put_tensor(out, name, t.shape(), t.data());
  if (ck.optimizer) {
    if (ck.optimizer->m.size() != named.size()) throw num::ContractError("save_checkpoint: optimizer state does not match the parameters");
    for (std::size_t i = 0; i < named.size(); ++i) put_tensor(out, "adam.m." + named[i].first, named[i].second.shape(), ck.optimizer->m[i]);
    for (std::size_t i = 0; i < named.size(); ++i) put_tensor(out, "adam.v." + named[i].first, named[i].second.shape(), ck.optimizer->v[i]);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(f), {}), path.string());
  if (r.str(4) != "BYVC") r.fail("bad magic (expected BYVC)");
  if (const auto v = r.u32(); v != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(v));
  json header;
  try {
    header = json::parse(r.str(r.u32()));
  } catch (const json::exception& e) {
    r.fail(std::string("malformed header: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.arch = arch_from_json(header.at("arch"));
    ck.step = header.at("step").get<std::uint64_t>();
    ck.rng_state = header.at("rng_state").get<std::string>();
    ck.config = header.at("config");
  } catch (const std::exception& e) {
    r.fail(std::string("invalid header: ") + e.what());
  }
  Rng unused(0);
  ck.params = ModelParams<float>::init(ck.arch, unused);
  const auto named = ck.params.named();
  const bool has_opt = !header.at("optimizer").is_null();
  const std::size_t expected = named.size() * (has_opt ? 3 : 1);
  if (r.u32() != expected) r.fail("tensor count does not match the architecture");

  auto fill = [&](const std::string& name, const num::Shape& shape, std::span<float> dst) {
    Record rec = read_tensor(r);
    if (rec.name != name) r.fail("expected tensor '" + name + "', found '" + rec.name + "'");
    if (rec.shape != shape) r.fail("tensor '" + name + "' has shape " + num::shape_str(rec.shape));
    std::copy(rec.data.begin(), rec.data.end(), dst.begin());
  };
  for (auto& [name, t] : named) {
    Tensor<float> tensor = t;
    fill(name, t.shape(), tensor.mutable_data());
  }
  if (has_opt) {
    const auto& o = header.at("optimizer");
    num::AdamConfig cfg{o.at("lr").get<double>(), o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                        o.at("eps").get<double>()};
    auto state = num::AdamState<float>::init(ck.params.tensors(), cfg);
    state.step_count = o.at("step_count").get<std::uint64_t>();
    for (std::size_t i = 0; i < named.size(); ++i) fill("adam.m." + named[i].first, named[i].second.shape(), state.m[i]);
    for (std::size_t i = 0; i < named.size(); ++i) fill("adam.v." + named[i].first, named[i].second.shape(), state.v[i]);
    ck.optimizer = std::move(state);
  }
  if (!r.done()) r.fail("trailing bytes after the last tensor");
  return ck;
}

}  // namespace byov::model
