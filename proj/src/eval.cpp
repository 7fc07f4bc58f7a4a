#include "byov/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "byov/parallel.hpp"

namespace byov::eval {

using nlohmann::json;

stm::FrameEmbeddingSequence frame_features(const TokenEmbeddingSequence& tokens, const EmbedSettings& settings) {
  if (settings.enable_stm) return stm::merge_selected(tokens, settings.stm_ratio).frames;
  return stm::mean_pool(tokens);
}

namespace {

EmbeddedVideo skeleton(const VideoRecord& record, std::size_t T) {
  EmbeddedVideo v;
  v.video_id = record.video_id;
  v.view = record.view;
  v.action_class = record.action_class;
  v.split = record.split;
  v.T = T;
  if (record.phase_labels) v.phase_labels = *record.phase_labels;
  if (record.key_event_frames) v.key_event_frames = *record.key_event_frames;
  return v;
}

}  // namespace

EmbeddedVideo embed_video(const model::ModelParams<float>& params, const VideoRecord& record,
                          const TokenEmbeddingSequence& tokens, const EmbedSettings& settings) {
  if (tokens.d != params.arch.d_in) {
    throw num::DimensionError("embed_video: checkpoint expects width " + std::to_string(params.arch.d_in) + ", video '" +
                              record.video_id + "' has " + std::to_string(tokens.d));
  }
  const auto frames = frame_features(tokens, settings);
  std::vector<std::size_t> all(frames.T);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto z = model::encode_frames(params, frames, all, record.view);
  EmbeddedVideo v = skeleton(record, frames.T);
  v.dim = params.arch.d_model;
  v.latents.assign(z.data.data().begin(), z.data.data().end());
  return v;
}

EmbeddedVideo embed_video(const model::ModelParams<float>& params, const Dataset& dataset, const VideoRecord& record,
                          const EmbedSettings& settings) {
  return embed_video(params, record, load_token_embeddings(dataset, record), settings);
}

EmbeddedVideo raw_video(const VideoRecord& record, const TokenEmbeddingSequence& tokens, const EmbedSettings& settings) {
  const auto frames = frame_features(tokens, settings);
  EmbeddedVideo v = skeleton(record, frames.T);
  v.dim = frames.d;
  v.latents = frames.data;
  return v;
}

std::string to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "euclidean"; }

Similarity parse_similarity(const std::string& s) {
  if (s == "cosine") return Similarity::cosine;
  if (s == "euclidean") return Similarity::euclidean;
  throw ValidationError("unknown similarity '" + s + "'");
}

double similarity(std::span<const float> a, std::span<const float> b, Similarity kind) {
  if (a.size() != b.size()) throw num::DimensionError("similarity: vector widths differ");
  if (kind == Similarity::euclidean) {
    double d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    return -std::sqrt(d2);
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string to_string(Setting s) {
  switch (s) {
    case Setting::regular: return "regular";
    case Setting::ego2exo: return "ego2exo";
    case Setting::exo2ego: return "exo2ego";
  }
  return "?";
}

// ---- classification -------------------------------------------------------

void LabeledFrames::append(const EmbeddedVideo& v) {
  if (v.phase_labels.size() != v.T) throw TaskError("video '" + v.video_id + "' has no per-frame phase labels");
  if (dim == 0) dim = v.dim;
  if (dim != v.dim) throw num::DimensionError("LabeledFrames: latent widths differ");
  x.insert(x.end(), v.latents.begin(), v.latents.end());
  y.insert(y.end(), v.phase_labels.begin(), v.phase_labels.end());
}

LinearSvm LinearSvm::fit(const LabeledFrames& train, double C, std::uint64_t seed) {
  const std::size_t n = train.size(), d = train.dim;
  std::set<int> labels(train.y.begin(), train.y.end());
  if (labels.size() < 2) throw TaskError("classification needs at least two classes in the training set");
  if (!(C > 0)) throw ValidationError("svm C must be positive");
  LinearSvm svm;
  svm.classes_.assign(labels.begin(), labels.end());

  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;  // bias feature
    for (std::size_t c = 0; c < d; ++c) s += double(train.x[i * d + c]) * double(train.x[i * d + c]);
    qii[i] = s;
  }
  constexpr std::size_t kMaxEpochs = 1000;
  constexpr double kTol = 1e-3;
  for (int cls : svm.classes_) {
    std::vector<double> w(d + 1, 0.0);
    std::vector<double> alpha(n, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t epoch = 0; epoch < kMaxEpochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double pg_max = -std::numeric_limits<double>::infinity();
      double pg_min = std::numeric_limits<double>::infinity();
      for (std::size_t i : order) {
        const double yi = train.y[i] == cls ? 1.0 : -1.0;
        const float* xi = train.x.data() + i * d;
        double wx = w[d];
        for (std::size_t c = 0; c < d; ++c) wx += w[c] * double(xi[c]);
        const double g = yi * wx - 1.0;
        double pg = g;
        if (alpha[i] == 0.0) pg = std::min(g, 0.0);
        else if (alpha[i] == C) pg = std::max(g, 0.0);
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (pg == 0.0) continue;
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / qii[i], 0.0, C);
        const double delta = (alpha[i] - old) * yi;
        for (std::size_t c = 0; c < d; ++c) w[c] += delta * double(xi[c]);
        w[d] += delta;
      }
      if (pg_max - pg_min < kTol) break;
    }
    svm.w_.push_back(std::move(w));
  }
  return svm;
}

int LinearSvm::predict(std::span<const float> x) const {
  int best = classes_.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    const auto& w = w_[k];
    if (x.size() + 1 != w.size()) throw num::DimensionError("svm: feature width mismatch");
    double s = w.back();
    for (std::size_t c = 0; c < x.size(); ++c) s += w[c] * double(x[c]);
    if (s > best_score) {
      best_score = s;
      best = classes_[k];
    }
  }
  return best;
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw num::DimensionError("macro_f1: length mismatch");
  if (truth.empty()) throw TaskError("macro_f1: empty test set");
  std::set<int> labels(truth.begin(), truth.end());
  labels.insert(predicted.begin(), predicted.end());
  double total = 0;
  for (int c : labels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = predicted[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    if (tp > 0) total += 2.0 * double(tp) / double(2 * tp + fp + fn);
  }
  return 100.0 * total / double(labels.size());
}

LabeledFrames few_shot_subsample(const LabeledFrames& train, double percent, std::uint64_t seed) {
  if (!(percent > 0 && percent <= 100)) throw ValidationError("few-shot percent must lie in (0, 100]");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < train.size(); ++i) by_label[train.y[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [label, idx] : by_label) {
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(percent / 100.0 * double(idx.size()) - 1e-9)));
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, idx.size())));
  }
  std::sort(keep.begin(), keep.end());
  LabeledFrames out;
  out.dim = train.dim;
  for (std::size_t i : keep) {
    out.x.insert(out.x.end(), train.x.begin() + i * train.dim, train.x.begin() + (i + 1) * train.dim);
    out.y.push_back(train.y[i]);
  }
  return out;
}

double classify_f1(const LabeledFrames& train, const LabeledFrames& test, double C) {
  const LinearSvm svm = LinearSvm::fit(train, C);
  std::vector<int> pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) pred[i] = svm.predict({test.x.data() + i * test.dim, test.dim});
  return macro_f1(test.y, pred);
}

// ---- retrieval ------------------------------------------------------------

double retrieval_map(std::span<const EmbeddedVideo* const> queries, std::span<const EmbeddedVideo* const> gallery,
                     std::size_t K, Similarity kind) {
  if (K == 0) throw ValidationError("retrieval K must be positive");
  struct Item {
    const EmbeddedVideo* video;
    std::size_t t;
  };
  std::vector<Item> items;
  for (const auto* g : gallery) {
    if (g->phase_labels.size() != g->T) throw TaskError("gallery video '" + g->video_id + "' has no phase labels");
    for (std::size_t t = 0; t < g->T; ++t) items.push_back({g, t});
  }
  double total = 0;
  std::size_t count = 0;
  std::vector<std::pair<double, std::size_t>> scored;
  for (const auto* q : queries) {
    if (q->phase_labels.size() != q->T) throw TaskError("query video '" + q->video_id + "' has no phase labels");
    for (std::size_t t = 0; t < q->T; ++t) {
      const int label = q->phase_labels[t];
      scored.clear();
      std::size_t relevant = 0;
      for (std::size_t g = 0; g < items.size(); ++g) {
        const Item& it = items[g];
        if (it.video->video_id == q->video_id) continue;
        scored.emplace_back(similarity(q->row(t), it.video->row(it.t), kind), g);
        relevant += it.video->phase_labels[it.t] == label;
      }
      if (scored.empty()) throw TaskError("retrieval gallery is empty after excluding the query's video");
      if (scored.size() < K) throw TaskError("retrieval gallery has fewer than K frames");
      auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
      std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(K), scored.end(), better);
      double ap = 0;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < K; ++i) {
        const Item& it = items[scored[i].second];
        if (it.video->phase_labels[it.t] == label) {
          ++hits;
          ap += double(hits) / double(i + 1);
        }
      }
      if (relevant > 0) total += ap / double(std::min(K, relevant));
      ++count;
    }
  }
  if (count == 0) throw TaskError("retrieval has no query frames");
  return 100.0 * total / double(count);
}

// ---- progression ----------------------------------------------------------

std::vector<std::vector<double>> progression_targets(const EmbeddedVideo& v) {
  std::vector<std::vector<double>> y(v.T, std::vector<double>(v.key_event_frames.size()));
  for (std::size_t t = 0; t < v.T; ++t)
    for (std::size_t e = 0; e < v.key_event_frames.size(); ++e)
      y[t][e] = (double(t) - double(v.key_event_frames[e])) / double(v.T);
  return y;
}

std::vector<double> RidgeModel::predict(std::span<const float> x) const {
  if (x.size() != dim) throw num::DimensionError("ridge: feature width mismatch");
  std::vector<double> out(outputs);
  for (std::size_t o = 0; o < outputs; ++o) {
    double s = weights[dim * outputs + o];
    for (std::size_t c = 0; c < dim; ++c) s += double(x[c]) * weights[c * outputs + o];
    out[o] = s;
  }
  return out;
}

RidgeModel fit_ridge(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y, double lambda) {
  if (x.empty() || x.size() != y.size()) throw TaskError("ridge: need matching, non-empty inputs and targets");
  if (!(lambda >= 0)) throw ValidationError("ridge lambda must be nonnegative");
  const std::size_t n = x.size(), d = x.front().size(), k = y.front().size();
  Eigen::MatrixXd X(n, d + 1), Y(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) X(i, c) = x[i][c];
    X(i, d) = 1.0;
    for (std::size_t o = 0; o < k; ++o) Y(i, o) = y[i][o];
  }
  Eigen::MatrixXd A = X.transpose() * X;
  for (std::size_t c = 0; c < d; ++c) A(c, c) += lambda;
  const Eigen::MatrixXd W = A.ldlt().solve(X.transpose() * Y);
  RidgeModel m;
  m.dim = d;
  m.outputs = k;
  m.weights.resize((d + 1) * k);
  for (std::size_t r = 0; r <= d; ++r)
    for (std::size_t o = 0; o < k; ++o) m.weights[r * k + o] = W(r, o);
  return m;
}

std::vector<std::optional<double>> r2_scores(const std::vector<std::vector<double>>& truth,
                                             const std::vector<std::vector<double>>& predicted) {
  if (truth.empty() || truth.size() != predicted.size()) throw TaskError("r2: need matching, non-empty inputs");
  const std::size_t k = truth.front().size();
  std::vector<std::optional<double>> out(k);
  for (std::size_t o = 0; o < k; ++o) {
    double mean = 0;
    for (const auto& row : truth) mean += row[o];
    mean /= double(truth.size());
    double ss_tot = 0, ss_res = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      ss_tot += (truth[i][o] - mean) * (truth[i][o] - mean);
      ss_res += (truth[i][o] - predicted[i][o]) * (truth[i][o] - predicted[i][o]);
    }
    if (ss_tot > 0) out[o] = 1.0 - ss_res / ss_tot;
  }
  return out;
}

namespace {

void progression_rows(std::span<const EmbeddedVideo* const> videos, std::vector<std::vector<double>>& x,
                      std::vector<std::vector<double>>& y, std::optional<std::size_t>& events) {
  for (const auto* v : videos) {
    if (v->key_event_frames.empty()) throw TaskError("video '" + v->video_id + "' has no key events");
    if (events && *events != v->key_event_frames.size()) throw TaskError("videos disagree on the number of key events");
    events = v->key_event_frames.size();
    const auto targets = progression_targets(*v);
    for (std::size_t t = 0; t < v->T; ++t) {
      auto r = v->row(t);
      x.emplace_back(r.begin(), r.end());
      y.push_back(targets[t]);
    }
  }
}

}  // namespace

double phase_progression_r2(std::span<const EmbeddedVideo* const> train, std::span<const EmbeddedVideo* const> test,
                            double lambda) {
  std::vector<std::vector<double>> xtr, ytr, xte, yte;
  std::optional<std::size_t> events;
  progression_rows(train, xtr, ytr, events);
  progression_rows(test, xte, yte, events);
  const RidgeModel model = fit_ridge(xtr, ytr, lambda);
  std::vector<std::vector<double>> pred;
  pred.reserve(xte.size());
  for (const auto& row : xte) {
    std::vector<float> f(row.begin(), row.end());
    pred.push_back(model.predict(f));
  }
  const auto scores = r2_scores(yte, pred);
  double total = 0;
  std::size_t n = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (!scores[e]) {
      spdlog::warn("phase progression: key event {} has zero target variance on test; excluded", e);
      continue;
    }
    total += *scores[e];
    ++n;
  }
  if (n == 0) throw TaskError("phase progression: no key event has defined R²");
  return total / double(n);
}

// ---- alignment ------------------------------------------------------------

std::size_t nearest_frame(std::span<const float> query, const EmbeddedVideo& b, Similarity kind) {
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < b.T; ++t) {
    const double s = similarity(query, b.row(t), kind);
    if (s > best_sim) {
      best_sim = s;
      best = t;
    }
  }
  return best;
}

double kendall_tau(const EmbeddedVideo& a, const EmbeddedVideo& b, Similarity kind) {
  if (a.T < 2 || b.T < 2) throw num::ContractError("kendall_tau: both videos need at least two frames");
  if (a.dim != b.dim) throw num::DimensionError("kendall_tau: latent widths differ");
  std::vector<std::size_t> nn(a.T);
  for (std::size_t i = 0; i < a.T; ++i) nn[i] = nearest_frame(a.row(i), b, kind);
  // For i < j the pair matches iff nn[j] > nn[i].
  long long matched = 0;
  const long long pairs = static_cast<long long>(a.T) * static_cast<long long>(a.T - 1) / 2;
  for (std::size_t i = 0; i < a.T; ++i)
    for (std::size_t j = i + 1; j < a.T; ++j) matched += nn[j] > nn[i];
  return double(matched - (pairs - matched)) / double(pairs);
}

double dataset_tau(std::span<const EmbeddedVideo* const> videos, Similarity kind) {
  double total = 0;
  std::size_t n = 0;
  for (const auto* a : videos)
    for (const auto* b : videos) {
      if (a->view == b->view) continue;
      total += kendall_tau(*a, *b, kind);
      ++n;
    }
  if (n == 0) throw TaskError("alignment needs at least one ego and one exo video");
  return total / double(n);
}

// ---- reports --------------------------------------------------------------

void EvalConfig::validate() const {
  if (k_values.empty()) throw ValidationError("eval.k_values must not be empty");
  for (std::size_t k : k_values)
    if (k == 0) throw ValidationError("eval.k_values entries must be positive");
  if (!(svm_c > 0)) throw ValidationError("eval.svm_c must be positive");
  if (!(ridge_lambda >= 0)) throw ValidationError("eval.ridge_lambda must be nonnegative");
  if (few_shot_percent && !(*few_shot_percent > 0 && *few_shot_percent <= 100)) {
    throw ValidationError("eval.few_shot_percent must lie in (0, 100]");
  }
  if (threads == 0) throw ValidationError("eval.threads must be positive");
}

namespace {

Setting parse_setting(const std::string& s) {
  for (Setting x : kSettings)
    if (to_string(x) == s) return x;
  throw ValidationError("unknown evaluation setting '" + s + "'");
}

json fields_json(const MetricsReport& r) {
  json f1 = json::object(), map_at = json::object();
  for (auto& [s, v] : r.f1) f1[to_string(s)] = v;
  for (auto& [k, cells] : r.map_at) {
    json row = json::object();
    for (auto& [s, v] : cells) row[to_string(s)] = v;
    map_at[std::to_string(k)] = row;
  }
  return {{"f1", f1}, {"map_at", map_at}, {"r2_progression", r.r2_progression}, {"kendall_tau", r.kendall_tau}};
}

void read_fields(const json& j, MetricsReport& r) {
  for (auto& [s, v] : j.at("f1").items()) r.f1[parse_setting(s)] = v.get<double>();
  for (auto& [k, cells] : j.at("map_at").items())
    for (auto& [s, v] : cells.items()) r.map_at[std::stoul(k)][parse_setting(s)] = v.get<double>();
  r.r2_progression = j.at("r2_progression").get<double>();
  r.kendall_tau = j.at("kendall_tau").get<double>();
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

json MetricsReport::to_json() const {
  json j = fields_json(*this);
  j["config"] = config;
  j["per_class"] = per_class;
  return j;
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  read_fields(j, r);
  if (j.contains("config")) r.config = j.at("config");
  if (j.contains("per_class")) r.per_class = j.at("per_class");
  return r;
}

std::string MetricsReport::to_csv() const {
  std::string out = "metric,setting,value\n";
  for (auto& [s, v] : f1) out += "f1," + to_string(s) + "," + csv_number(v) + "\n";
  for (auto& [k, cells] : map_at)
    for (auto& [s, v] : cells) out += "map@" + std::to_string(k) + "," + to_string(s) + "," + csv_number(v) + "\n";
  out += "r2_progression,all," + csv_number(r2_progression) + "\n";
  out += "kendall_tau,all," + csv_number(kendall_tau) + "\n";
  return out;
}

namespace {

using VideoList = std::vector<const EmbeddedVideo*>;

VideoList of_views(const VideoList& videos, std::optional<View> view) {
  VideoList out;
  for (const auto* v : videos)
    if (!view || v->view == *view) out.push_back(v);
  return out;
}

std::pair<std::optional<View>, std::optional<View>> setting_views(Setting s) {
  switch (s) {
    case Setting::regular: return {std::nullopt, std::nullopt};
    case Setting::ego2exo: return {View::ego, View::exo};
    case Setting::exo2ego: return {View::exo, View::ego};
  }
  return {};
}

MetricsReport evaluate_class(const VideoList& train, const VideoList& test, const EvalConfig& cfg) {
  MetricsReport r;
  for (Setting s : kSettings) {
    const auto [from, to] = setting_views(s);
    const VideoList tr = of_views(train, from), te = of_views(test, to);
    if (tr.empty() || te.empty()) throw TaskError("setting " + to_string(s) + " has no videos for one of its views");
    LabeledFrames xtr, xte;
    for (const auto* v : tr) xtr.append(*v);
    for (const auto* v : te) xte.append(*v);
    if (cfg.few_shot_percent) xtr = few_shot_subsample(xtr, *cfg.few_shot_percent, cfg.few_shot_seed);
    r.f1[s] = classify_f1(xtr, xte, cfg.svm_c);
    const VideoList queries = of_views(test, from), gallery = of_views(test, to);
    for (std::size_t k : cfg.k_values) r.map_at[k][s] = retrieval_map(queries, gallery, k, cfg.similarity);
  }
  r.r2_progression = phase_progression_r2(train, test, cfg.ridge_lambda);
  r.kendall_tau = dataset_tau(test, cfg.similarity);
  return r;
}

json config_json(const EvalConfig& c) {
  return {{"k_values", c.k_values},
          {"similarity", to_string(c.similarity)},
          {"svm_c", c.svm_c},
          {"ridge_lambda", c.ridge_lambda},
          {"few_shot_percent", c.few_shot_percent ? json(*c.few_shot_percent) : json(nullptr)},
          {"few_shot_seed", c.few_shot_seed}};
}

}  // namespace

MetricsReport evaluate(const EmbeddedSplit& videos, const EvalConfig& cfg) {
  cfg.validate();
  std::map<std::string, std::pair<VideoList, VideoList>> by_class;
  for (const auto& v : videos.train) by_class[v.action_class].first.push_back(&v);
  for (const auto& v : videos.test) by_class[v.action_class].second.push_back(&v);
  std::vector<std::string> classes;
  for (auto& [cls, lists] : by_class)
    if (!lists.second.empty()) classes.push_back(cls);
  if (classes.empty()) throw TaskError("no test videos to evaluate");

  std::vector<MetricsReport> parts(classes.size());
  parallel_for(classes.size(), cfg.threads, [&](std::size_t i) {
    const auto& [train, test] = by_class[classes[i]];
    try {
      parts[i] = evaluate_class(train, test, cfg);
    } catch (const TaskError& e) {
      throw TaskError("action class '" + classes[i] + "': " + e.what());
    }
  });

  MetricsReport out;
  const double n = double(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& p = parts[i];
    for (auto& [s, v] : p.f1) out.f1[s] += v / n;
    for (auto& [k, cells] : p.map_at)
      for (auto& [s, v] : cells) out.map_at[k][s] += v / n;
    out.r2_progression += p.r2_progression / n;
    out.kendall_tau += p.kendall_tau / n;
    out.per_class[classes[i]] = fields_json(p);
  }
  out.config = config_json(cfg);
  return out;
}

namespace {

template <class F>
EmbeddedSplit embed_splits(const Dataset& dataset, std::size_t threads, F&& make) {
  std::vector<const VideoRecord*> train = dataset.select(Split::train), test = dataset.select(Split::test);
  EmbeddedSplit out;
  out.train.resize(train.size());
  out.test.resize(test.size());
  parallel_for(train.size() + test.size(), threads, [&](std::size_t i) {
    if (i < train.size()) {
      out.train[i] = make(*train[i]);
    } else {
      out.test[i - train.size()] = make(*test[i - train.size()]);
    }
  });
  return out;
}

}  // namespace

EmbeddedSplit embed_dataset(const model::ModelParams<float>& params, const Dataset& dataset,
                            const EmbedSettings& settings, std::size_t threads) {
  return embed_splits(dataset, threads, [&](const VideoRecord& r) { return embed_video(params, dataset, r, settings); });
}

EmbeddedSplit raw_dataset(const Dataset& dataset, const EmbedSettings& settings) {
  return embed_splits(dataset, 1, [&](const VideoRecord& r) {
    return raw_video(r, load_token_embeddings(dataset, r), settings);
  });
}

MetricsReport eval_all(const model::ModelParams<float>& params, const Dataset& dataset, const EmbedSettings& settings,
                       const EvalConfig& config) {
  config.validate();
  MetricsReport r = evaluate(embed_dataset(params, dataset, settings, config.threads), config);
  r.config["embedding"] = {{"stm_ratio", settings.stm_ratio}, {"enable_stm", settings.enable_stm}};
  return r;
}

}  // namespace byov::eval
