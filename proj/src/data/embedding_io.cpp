#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "byov/data.hpp"

namespace byov {

namespace {

constexpr std::array<char, 4> kMagic = {'B', 'Y', 'V', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

TokenEmbeddingSequence TokenEmbeddingSequence::frames(const std::vector<std::size_t>& indices) const {
  TokenEmbeddingSequence out{video_id, indices.size(), N, d, {}};
  out.data.reserve(indices.size() * N * d);
  const std::size_t frame = N * d;
  for (std::size_t t : indices) {
    if (t >= T) throw std::out_of_range("frame index " + std::to_string(t) + " outside video of " + std::to_string(T));
    out.data.insert(out.data.end(), data.begin() + t * frame, data.begin() + (t + 1) * frame);
  }
  return out;
}

void write_token_embeddings(const std::filesystem::path& path, const TokenEmbeddingSequence& seq) {
  if (seq.data.size() != seq.T * seq.N * seq.d) throw FormatError("embedding payload does not match T x N x d");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(seq.T));
  put_u32(out, static_cast<std::uint32_t>(seq.N));
  put_u32(out, static_cast<std::uint32_t>(seq.d));
  for (float f : seq.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw IoError("short write to " + path.string());
}

TokenEmbeddingSequence read_token_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string who = path.string() + ": ";
  if (bytes.size() < 16) throw FormatError(who + "truncated header");
  if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0) throw FormatError(who + "bad magic (expected BYV1)");
  TokenEmbeddingSequence seq;
  seq.video_id = path.stem().string();
  seq.T = get_u32(bytes.data() + 4);
  seq.N = get_u32(bytes.data() + 8);
  seq.d = get_u32(bytes.data() + 12);
  if (seq.T == 0 || seq.N == 0 || seq.d == 0) throw FormatError(who + "zero extent in header");
  const std::size_t count = seq.T * seq.N * seq.d;
  const std::size_t payload = bytes.size() - 16;
  if (payload < count * 4) {
    throw FormatError(who + "truncated payload: header needs " + std::to_string(count) + " floats, file has " +
                      std::to_string(payload / 4));
  }
  if (payload > count * 4) throw FormatError(who + "trailing bytes after payload");
  seq.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
    if (!std::isfinite(f)) throw FormatError(who + "non-finite value at element " + std::to_string(i));
    seq.data[i] = f;
  }
  return seq;
}

TokenEmbeddingSequence load_token_embeddings(const Dataset& dataset, const VideoRecord& record) {
  TokenEmbeddingSequence seq = read_token_embeddings(dataset.embedding_file(record));
  if (seq.T != record.num_frames || seq.N != dataset.meta.N || seq.d != dataset.meta.d) {
    throw FormatError("record '" + record.video_id + "': file header T=" + std::to_string(seq.T) +
                      " N=" + std::to_string(seq.N) + " d=" + std::to_string(seq.d) + " disagrees with the manifest");
  }
  seq.video_id = record.video_id;
  return seq;
}

}  // namespace byov
