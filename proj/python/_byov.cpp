#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "byov/checkpoint.hpp"
#include "byov/cli.hpp"
#include "byov/config.hpp"
#include "byov/eval.hpp"
#include "byov/trainer.hpp"

namespace py = pybind11;
using namespace byov;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

TokenEmbeddingSequence tokens_from(const FloatArray& a, const std::string& video_id) {
  if (a.ndim() != 3) throw py::value_error("token embeddings must have shape (T, N, d)");
  TokenEmbeddingSequence s;
  s.video_id = video_id;
  s.T = std::size_t(a.shape(0));
  s.N = std::size_t(a.shape(1));
  s.d = std::size_t(a.shape(2));
  s.data.assign(a.data(), a.data() + a.size());
  return s;
}

py::array_t<float> to_array(const std::vector<float>& v, std::vector<py::ssize_t> shape) {
  py::array_t<float> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// A (T, dim) latent matrix wrapped as an evaluation video.
eval::EmbeddedVideo video_from(const std::string& id, const FloatArray& latents, std::vector<int> labels = {}) {
  if (latents.ndim() != 2) throw py::value_error("latents must have shape (T, dim)");
  eval::EmbeddedVideo v;
  v.video_id = id;
  v.T = std::size_t(latents.shape(0));
  v.dim = std::size_t(latents.shape(1));
  v.latents.assign(latents.data(), latents.data() + latents.size());
  if (!labels.empty() && labels.size() != v.T) throw py::value_error("one phase label per frame is required");
  v.phase_labels = std::move(labels);
  return v;
}

std::vector<eval::EmbeddedVideo> videos_from(const std::vector<std::tuple<std::string, FloatArray, std::vector<int>>>& in) {
  std::vector<eval::EmbeddedVideo> out;
  for (const auto& [id, x, y] : in) out.push_back(video_from(id, x, y));
  return out;
}

std::vector<const eval::EmbeddedVideo*> pointers(const std::vector<eval::EmbeddedVideo>& v) {
  std::vector<const eval::EmbeddedVideo*> out;
  for (const auto& x : v) out.push_back(&x);
  return out;
}

py::dict record_dict(const VideoRecord& r) {
  py::dict d;
  d["video_id"] = r.video_id;
  d["view"] = to_string(r.view);
  d["action_class"] = r.action_class;
  d["num_frames"] = r.num_frames;
  d["embedding_path"] = r.embedding_path;
  d["split"] = to_string(r.split);
  d["phase_labels"] = r.phase_labels ? py::cast(*r.phase_labels) : py::none();
  d["key_event_frames"] = r.key_event_frames ? py::cast(*r.key_event_frames) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_byov, m) {
  m.doc() = "Masked ego-exo representation learning: token merging, I/O, metrics and the training pipeline.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);
  py::register_exception<num::NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);
  py::register_exception<eval::TaskError>(m, "TaskError", PyExc_ValueError);

  m.def(
      "merge_selected",
      [](const FloatArray& tokens, double ratio) {
        const auto r = stm::merge_selected(tokens_from(tokens, "array"), ratio);
        return py::make_tuple(to_array(r.frames.data, {py::ssize_t(r.frames.T), py::ssize_t(r.frames.d)}),
                              r.selection.selected);
      },
      py::arg("tokens"), py::arg("ratio") = 0.3,
      "Merge the top-K most changing tokens of each frame; returns (frames, selected indices per frame).");
  m.def(
      "mean_pool",
      [](const FloatArray& tokens) {
        const auto f = stm::mean_pool(tokens_from(tokens, "array"));
        return to_array(f.data, {py::ssize_t(f.T), py::ssize_t(f.d)});
      },
      py::arg("tokens"));
  m.def(
      "token_change_scores",
      [](const FloatArray& tokens) {
        const auto t = tokens_from(tokens, "array");
        const auto s = stm::token_change_scores(t);
        py::array_t<double> out({py::ssize_t(t.T - 1), py::ssize_t(t.N)});
        std::copy(s.begin(), s.end(), out.mutable_data());
        return out;
      },
      py::arg("tokens"));

  m.def(
      "read_embeddings",
      [](const std::filesystem::path& path) {
        const auto s = read_token_embeddings(path);
        return to_array(s.data, {py::ssize_t(s.T), py::ssize_t(s.N), py::ssize_t(s.d)});
      },
      py::arg("path"), "Read a BYV1 file as a (T, N, d) float32 array.");
  m.def(
      "write_embeddings",
      [](const std::filesystem::path& path, const FloatArray& tokens) {
        write_token_embeddings(path, tokens_from(tokens, path.stem().string()));
      },
      py::arg("path"), py::arg("tokens"));
  m.def(
      "load_manifest",
      [](const std::filesystem::path& path) {
        const Dataset ds = load_manifest(path);
        py::list records;
        for (const auto& r : ds.records) records.append(record_dict(r));
        py::dict meta;
        meta["N"] = ds.meta.N;
        meta["d"] = ds.meta.d;
        meta["num_phases"] = ds.meta.num_phases;
        return py::make_tuple(records, meta);
      },
      py::arg("path"), "Validated manifest as (records, meta).");
  m.def(
      "sample_frames",
      [](std::size_t total, std::size_t target, std::uint64_t seed, const std::string& mode) {
        Rng rng(seed);
        return sample_frames(total, target, rng, trainer::parse_sample_mode(mode));
      },
      py::arg("total"), py::arg("target"), py::arg("seed") = 0, py::arg("mode") = "train_random");
  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& out_dir, const std::vector<std::string>& overrides) {
        std::vector<std::string> keys;
        for (const auto& o : overrides) keys.push_back(o.rfind("synth.", 0) == 0 ? o : "synth." + o);
        const auto cfg = config::load_run_config(nullptr, keys);
        return generate_synthetic(cfg.synth, out_dir).records.size();
      },
      py::arg("out_dir"), py::arg("overrides") = std::vector<std::string>{},
      "Write a synthetic dataset; overrides are KEY=VALUE synth settings. Returns the video count.");

  m.def(
      "kendall_tau",
      [](const FloatArray& a, const FloatArray& b, const std::string& similarity) {
        return eval::kendall_tau(video_from("a", a), video_from("b", b), eval::parse_similarity(similarity));
      },
      py::arg("a"), py::arg("b"), py::arg("similarity") = "cosine");
  m.def(
      "retrieval_map",
      [](const std::vector<std::tuple<std::string, FloatArray, std::vector<int>>>& queries,
         const std::vector<std::tuple<std::string, FloatArray, std::vector<int>>>& gallery, std::size_t k,
         const std::string& similarity) {
        const auto q = videos_from(queries), g = videos_from(gallery);
        return eval::retrieval_map(pointers(q), pointers(g), k, eval::parse_similarity(similarity));
      },
      py::arg("queries"), py::arg("gallery"), py::arg("k") = 10, py::arg("similarity") = "cosine",
      "mAP@K in percent; each video is (video_id, latents (T, dim), phase labels).");
  m.def(
      "macro_f1", [](const std::vector<int>& truth, const std::vector<int>& pred) { return eval::macro_f1(truth, pred); },
      py::arg("truth"), py::arg("predicted"));
  m.def(
      "r2_scores",
      [](const std::vector<std::vector<double>>& truth, const std::vector<std::vector<double>>& pred) {
        return eval::r2_scores(truth, pred);
      },
      py::arg("truth"), py::arg("predicted"));

  py::class_<model::Checkpoint>(m, "Checkpoint")
      .def_static("load", &model::load_checkpoint, py::arg("path"))
      .def_property_readonly("step", [](const model::Checkpoint& c) { return c.step; })
      .def_property_readonly("config_json", [](const model::Checkpoint& c) { return c.config.dump(); })
      .def_property_readonly("arch_json", [](const model::Checkpoint& c) { return model::arch_to_json(c.arch).dump(); })
      .def_property_readonly("encoder_param_count", [](const model::Checkpoint& c) { return c.params.encoder_param_count(); })
      .def_property_readonly("decoder_param_count", [](const model::Checkpoint& c) { return c.params.decoder_param_count(); })
      .def(
          "embed",
          [](const model::Checkpoint& c, const FloatArray& tokens, double stm_ratio, bool enable_stm) {
            const auto seq = tokens_from(tokens, "array");
            VideoRecord record;
            record.video_id = seq.video_id;
            record.num_frames = seq.T;
            eval::EmbeddedVideo v;
            {
              py::gil_scoped_release release;
              v = eval::embed_video(c.params, record, seq, {stm_ratio, enable_stm});
            }
            return to_array(v.latents, {py::ssize_t(v.T), py::ssize_t(v.dim)});
          },
          py::arg("tokens"), py::arg("stm_ratio") = 0.3, py::arg("enable_stm") = true,
          "Per-frame latents (T, d_model) for a (T, N, d) token array.");

  m.def(
      "default_param_counts",
      [] {
        Rng rng(0);
        const auto p = model::ModelParams<float>::init(model::ArchConfig{}, rng);
        return py::make_tuple(p.encoder_param_count(), p.decoder_param_count());
      },
      "(encoder, decoder) parameter counts of the default architecture.");
  m.def("default_config_json", [] { return config::to_json(config::RunConfig{}).dump(); });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "byov");
        py::gil_scoped_release release;
        return cli::run(args);
      },
      py::arg("args"), "Run the command-line interface in-process; returns the exit code.");
}
