#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "byov/data.hpp"

namespace byov {

using nlohmann::json;

std::string to_string(View view) { return view == View::ego ? "ego" : "exo"; }

View parse_view(const std::string& s) {
  if (s == "ego") return View::ego;
  if (s == "exo") return View::exo;
  throw ValidationError("unknown view '" + s + "' (expected ego or exo)");
}

View other_view(View view) { return view == View::ego ? View::exo : View::ego; }

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + s + "'");
}

std::filesystem::path Dataset::embedding_file(const VideoRecord& record) const {
  std::filesystem::path p(record.embedding_path);
  return p.is_absolute() ? p : meta.base_dir / p;
}

std::vector<const VideoRecord*> Dataset::select(std::optional<Split> split, std::optional<View> view) const {
  std::vector<const VideoRecord*> out;
  for (const auto& r : records) {
    if (split && r.split != *split) continue;
    if (view && r.view != *view) continue;
    out.push_back(&r);
  }
  return out;
}

void validate_record(const VideoRecord& r, const DatasetMeta& meta) {
  const std::string who = "record '" + r.video_id + "': ";
  if (r.video_id.empty()) throw ValidationError("record with empty video_id");
  if (r.num_frames == 0) throw ValidationError(who + "num_frames must be positive");
  if (r.embedding_path.empty()) throw ValidationError(who + "missing embedding_path");
  if (r.phase_labels) {
    const auto& labels = *r.phase_labels;
    if (labels.size() != r.num_frames) {
      throw ValidationError(who + "phase_labels has " + std::to_string(labels.size()) + " entries but num_frames is " +
                            std::to_string(r.num_frames));
    }
    for (int l : labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= meta.num_phases) {
        throw ValidationError(who + "phase label " + std::to_string(l) + " outside [0, num_phases)");
      }
    }
  }
  if (r.key_event_frames) {
    const auto& events = *r.key_event_frames;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (events[i] >= r.num_frames) throw ValidationError(who + "key event frame outside [0, T)");
      if (i > 0 && events[i] <= events[i - 1]) throw ValidationError(who + "key_event_frames must be strictly increasing");
    }
    if (r.phase_labels) {
      const std::set<std::size_t> event_set(events.begin(), events.end());
      const auto& labels = *r.phase_labels;
      for (std::size_t t = 1; t < labels.size(); ++t) {
        if (labels[t] != labels[t - 1] && !event_set.contains(t)) {
          throw ValidationError(who + "phase label changes at frame " + std::to_string(t) + ", which is not a key event");
        }
      }
    }
  }
}

Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  Dataset ds;
  try {
    if (doc.at("version").get<int>() != 1) throw ValidationError("unsupported manifest version");
    ds.meta.N = doc.at("N").get<std::size_t>();
    ds.meta.d = doc.at("d").get<std::size_t>();
    ds.meta.num_phases = doc.at("num_phases").get<std::size_t>();
    ds.meta.base_dir = path.parent_path();
    if (ds.meta.N == 0 || ds.meta.d == 0) throw ValidationError("manifest N and d must be positive");
    std::set<std::string> ids;
    for (const auto& j : doc.at("records")) {
      VideoRecord r;
      r.video_id = j.at("video_id").get<std::string>();
      r.view = parse_view(j.at("view").get<std::string>());
      r.action_class = j.at("action_class").get<std::string>();
      r.num_frames = j.at("num_frames").get<std::size_t>();
      r.embedding_path = j.at("embedding_path").get<std::string>();
      r.split = parse_split(j.value("split", std::string("train")));
      if (j.contains("phase_labels")) r.phase_labels = j["phase_labels"].get<std::vector<int>>();
      if (j.contains("key_event_frames")) r.key_event_frames = j["key_event_frames"].get<std::vector<std::size_t>>();
      validate_record(r, ds.meta);
      if (!ids.insert(r.video_id).second) throw ValidationError("duplicate video_id '" + r.video_id + "'");
      ds.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path.string() + " violates the schema: " + e.what());
  }
  if (ds.records.empty()) throw ValidationError("empty dataset");
  return ds;
}

void write_manifest(const std::filesystem::path& path, const Dataset& dataset) {
  json doc;
  doc["version"] = 1;
  doc["N"] = dataset.meta.N;
  doc["d"] = dataset.meta.d;
  doc["num_phases"] = dataset.meta.num_phases;
  json records = json::array();
  for (const auto& r : dataset.records) {
    json j;
    j["video_id"] = r.video_id;
    j["view"] = to_string(r.view);
    j["action_class"] = r.action_class;
    j["num_frames"] = r.num_frames;
    j["embedding_path"] = r.embedding_path;
    j["split"] = to_string(r.split);
    if (r.phase_labels) j["phase_labels"] = *r.phase_labels;
    if (r.key_event_frames) j["key_event_frames"] = *r.key_event_frames;
    records.push_back(std::move(j));
  }
  doc["records"] = std::move(records);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << doc.dump(1) << "\n";
}

}  // namespace byov
