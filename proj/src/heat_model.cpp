#include "heat/heat_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <tuple>

#include "heat/error.hpp"
#include "heat/hashing.hpp"
#include "heat/parallel.hpp"

namespace heat {

nlohmann::json to_json(const LabeledPair& l) {
  return {{"critical_episode_id", l.critical_episode_id},
          {"prior_episode_id", l.prior_episode_id},
          {"heat", l.heat},
          {"annotator", l.annotator},
          {"created_at", l.created_at}};
}

LabeledPair label_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::validation, "label must be a JSON object");
  LabeledPair l;
  auto required_string = [&](const char* field) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
      fail(ErrorKind::validation, std::string(field) + " must be a non-empty string", field);
    }
    return it->get<std::string>();
  };
  l.critical_episode_id = required_string("critical_episode_id");
  l.prior_episode_id = required_string("prior_episode_id");
  auto heat = j.find("heat");
  if (heat == j.end() || !heat->is_number_integer()) {
    fail(ErrorKind::validation, "heat must be an integer in 0..3", "heat");
  }
  const auto value = heat->get<long long>();
  if (value < 0 || value > 3) {
    fail(ErrorKind::validation, "heat must be an integer in 0..3 (got " + std::to_string(value) + ")", "heat");
  }
  l.heat = static_cast<int>(value);
  if (auto a = j.find("annotator"); a != j.end()) {
    if (!a->is_string()) fail(ErrorKind::validation, "annotator must be a string", "annotator");
    l.annotator = a->get<std::string>();
  }
  if (auto c = j.find("created_at"); c != j.end()) {
    if (!c->is_number() || !std::isfinite(c->get<double>())) {
      fail(ErrorKind::validation, "created_at must be a number", "created_at");
    }
    l.created_at = c->get<double>();
  }
  return l;
}

std::vector<LabeledPair> read_labels_jsonl(std::istream& in) {
  std::vector<LabeledPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::data, "labels line " + std::to_string(line_no) + ": invalid JSON");
    try {
      out.push_back(label_from_json(j));
    } catch (const Error& e) {
      throw Error(e.kind(), "labels line " + std::to_string(line_no) + ": " + e.what(), e.field());
    }
  }
  return out;
}

std::vector<LabeledPair> read_labels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "cannot open labels file " + path);
  return read_labels_jsonl(in);
}

void write_labels_jsonl(std::ostream& out, std::span<const LabeledPair> labels) {
  for (const auto& l : labels) out << to_json(l).dump() << '\n';
}

namespace {

using LabelKey = std::tuple<std::string, std::string, std::string>;

LabelKey key_of(const LabeledPair& l) { return {l.critical_episode_id, l.prior_episode_id, l.annotator}; }

}  // namespace

std::vector<LabeledPair> deduplicate_labels(std::span<const LabeledPair> labels) {
  std::map<LabelKey, std::size_t> position;
  std::vector<LabeledPair> out;
  for (const auto& l : labels) {
    auto [it, inserted] = position.emplace(key_of(l), out.size());
    if (inserted) out.push_back(l);
    else out[it->second] = l;
  }
  return out;
}

nlohmann::json Hyperparams::to_json() const {
  return {{"regressor", heat::to_string(kind)},
          {"gbrt",
           {{"n_estimators", gbrt.n_estimators},
            {"learning_rate", gbrt.learning_rate},
            {"max_depth", gbrt.max_depth},
            {"min_samples_leaf", gbrt.min_samples_leaf},
            {"subsample", gbrt.subsample}}},
          {"mlp",
           {{"hidden1", mlp.hidden1},
            {"hidden2", mlp.hidden2},
            {"epochs", mlp.epochs},
            {"learning_rate", mlp.learning_rate},
            {"l2", mlp.l2}}},
          {"seed", seed},
          {"cv_folds", cv_folds},
          {"overlap", features.overlap == OverlapMode::seconds ? "seconds" : "temporal_jaccard"}};
}

Hyperparams Hyperparams::from_json(const nlohmann::json& j) {
  Hyperparams h;
  if (j.is_null()) return h;
  if (auto it = j.find("regressor"); it != j.end()) h.kind = parse_regressor_kind(it->get<std::string>());
  if (auto g = j.find("gbrt"); g != j.end()) {
    h.gbrt.n_estimators = g->value("n_estimators", h.gbrt.n_estimators);
    h.gbrt.learning_rate = g->value("learning_rate", h.gbrt.learning_rate);
    h.gbrt.max_depth = g->value("max_depth", h.gbrt.max_depth);
    h.gbrt.min_samples_leaf = g->value("min_samples_leaf", h.gbrt.min_samples_leaf);
    h.gbrt.subsample = g->value("subsample", h.gbrt.subsample);
  }
  if (auto m = j.find("mlp"); m != j.end()) {
    h.mlp.hidden1 = m->value("hidden1", h.mlp.hidden1);
    h.mlp.hidden2 = m->value("hidden2", h.mlp.hidden2);
    h.mlp.epochs = m->value("epochs", h.mlp.epochs);
    h.mlp.learning_rate = m->value("learning_rate", h.mlp.learning_rate);
    h.mlp.l2 = m->value("l2", h.mlp.l2);
  }
  h.seed = j.value("seed", h.seed);
  h.cv_folds = j.value("cv_folds", h.cv_folds);
  const std::string overlap = j.value("overlap", std::string("temporal_jaccard"));
  if (overlap == "seconds") h.features.overlap = OverlapMode::seconds;
  else if (overlap == "temporal_jaccard") h.features.overlap = OverlapMode::temporal_jaccard;
  else fail(ErrorKind::validation, "unknown overlap mode '" + overlap + "'", "overlap");
  if (h.cv_folds < 2) fail(ErrorKind::validation, "cv_folds must be >= 2", "cv_folds");
  return h;
}

namespace {

double clip_heat(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, 0.0, kMaxHeat);
}

Regressor make_regressor(const Hyperparams& h) {
  if (h.kind == RegressorKind::mlp) return Mlp(h.mlp);
  return GradientBoostedTrees(h.gbrt);
}

void fit_regressor(Regressor& r, MatrixView x, std::span<const double> y, std::uint64_t seed) {
  std::visit([&](auto& m) { m.fit(x, y, seed); }, r);
}

std::string fingerprint_examples(std::span<const TrainingExample> examples) {
  std::vector<std::string> lines;
  for (const auto& e : examples) {
    lines.push_back(e.label.critical_episode_id + '\x1f' + e.label.prior_episode_id + '\x1f' + e.label.annotator +
                    '\x1f' + std::to_string(e.label.heat));
  }
  std::sort(lines.begin(), lines.end());
  std::string all;
  for (const auto& l : lines) all += l + '\n';
  return sha256_hex(all);
}

HeatModel train_from_examples(std::vector<TrainingExample> examples, const StageVocabulary& vocab,
                              const Hyperparams& hyper) {
  if (examples.size() < kMinTrainingLabels) {
    fail(ErrorKind::validation, "≥ " + std::to_string(kMinTrainingLabels) + " labels required (got " +
                                    std::to_string(examples.size()) + ")",
         "labels");
  }
  std::set<int> distinct;
  for (const auto& e : examples) distinct.insert(e.label.heat);
  if (distinct.size() < 2) {
    fail(ErrorKind::validation,
         "degenerate label set: every label has heat " + std::to_string(*distinct.begin()), "labels");
  }
  const std::size_t dim = feature_dimension(vocab.size());
  std::vector<double> raw;
  std::vector<double> y;
  raw.reserve(examples.size() * dim);
  for (const auto& e : examples) {
    if (e.features.size() != dim) fail(ErrorKind::data, "training example has the wrong feature dimension");
    raw.insert(raw.end(), e.features.begin(), e.features.end());
    y.push_back(e.label.heat);
  }

  HeatModel model;
  model.vocab = vocab;
  model.hyper = hyper;
  model.cv_mse = cross_validate(MatrixView{raw, examples.size(), dim}, y, hyper);
  model.standardizer = fit_standardizer(raw, dim);
  std::vector<double> scaled = raw;
  for (std::size_t r = 0; r < examples.size(); ++r) {
    model.standardizer.apply_inplace(std::span<double>(scaled).subspan(r * dim, dim));
  }
  model.regressor = make_regressor(hyper);
  fit_regressor(model.regressor, MatrixView{scaled, examples.size(), dim}, y, hyper.seed);
  model.training_fingerprint = fingerprint_examples(examples);
  model.training = std::move(examples);
  return model;
}

std::vector<TrainingExample> resolve_examples(std::span<const LabeledPair> labels, const EpisodeStore& store,
                                              const StageVocabulary& vocab, const FeatureConfig& cfg) {
  std::vector<TrainingExample> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const Episode* prior = store.find(l.prior_episode_id);
    if (prior == nullptr) fail(ErrorKind::not_found, "unknown prior episode " + l.prior_episode_id, "prior_episode_id");
    const Episode* critical = store.find(l.critical_episode_id);
    if (critical == nullptr) {
      fail(ErrorKind::not_found, "unknown critical episode " + l.critical_episode_id, "critical_episode_id");
    }
    out.push_back({l, prior->stage, extract_features(*prior, *critical, vocab, cfg).to_vector()});
  }
  return out;
}

}  // namespace

double HeatModel::predict_row(std::span<const double> raw_features) const {
  std::vector<double> row = standardizer.apply(raw_features);
  return clip_heat(predict_raw(regressor, row));
}

std::vector<int> stratified_folds(std::span<const double> y, int folds, std::uint64_t seed) {
  std::map<long long, std::vector<std::size_t>> by_value;
  for (std::size_t i = 0; i < y.size(); ++i) by_value[std::llround(y[i])].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<int> fold(y.size(), 0);
  std::size_t dealt = 0;
  for (auto& [value, idx] : by_value) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

double cross_validate(MatrixView x, std::span<const double> y, const Hyperparams& hyper) {
  const auto folds = stratified_folds(y, hyper.cv_folds, hyper.seed);
  double total = 0.0;
  int used = 0;
  for (int f = 0; f < hyper.cv_folds; ++f) {
    std::vector<double> train_x, train_y;
    std::vector<std::size_t> test;
    for (std::size_t r = 0; r < x.rows; ++r) {
      if (folds[r] == f) {
        test.push_back(r);
      } else {
        const auto row = x.row(r);
        train_x.insert(train_x.end(), row.begin(), row.end());
        train_y.push_back(y[r]);
      }
    }
    if (test.empty() || train_y.size() < 2) continue;
    const auto scaler = fit_standardizer(train_x, x.cols);
    for (std::size_t r = 0; r < train_y.size(); ++r) {
      scaler.apply_inplace(std::span<double>(train_x).subspan(r * x.cols, x.cols));
    }
    Regressor reg = make_regressor(hyper);
    fit_regressor(reg, MatrixView{train_x, train_y.size(), x.cols}, train_y, hyper.seed);
    double sse = 0.0;
    for (std::size_t r : test) {
      const double pred = clip_heat(predict_raw(reg, scaler.apply(x.row(r))));
      sse += (pred - y[r]) * (pred - y[r]);
    }
    total += sse / static_cast<double>(test.size());
    ++used;
  }
  return used == 0 ? 0.0 : total / used;
}

HeatModel train(std::span<const LabeledPair> labels, const EpisodeStore& store, const StageVocabulary& vocab,
                const Hyperparams& hyper) {
  const auto unique = deduplicate_labels(labels);
  if (unique.size() < kMinTrainingLabels) {
    fail(ErrorKind::validation, "≥ " + std::to_string(kMinTrainingLabels) + " labels required (got " +
                                    std::to_string(unique.size()) + ")",
         "labels");
  }
  return train_from_examples(resolve_examples(unique, store, vocab, hyper.features), vocab, hyper);
}

HeatModel fine_tune(const HeatModel& model, std::span<const LabeledPair> new_labels, const EpisodeStore& store) {
  if (new_labels.empty()) fail(ErrorKind::validation, "fine-tuning needs at least one new label", "labels");
  auto fresh = resolve_examples(deduplicate_labels(new_labels), store, model.vocab, model.hyper.features);
  std::vector<TrainingExample> merged = model.training;
  std::map<LabelKey, std::size_t> position;
  for (std::size_t i = 0; i < merged.size(); ++i) position.emplace(key_of(merged[i].label), i);
  for (auto& e : fresh) {
    auto it = position.find(key_of(e.label));
    if (it != position.end()) {
      merged[it->second] = std::move(e);
    } else {
      position.emplace(key_of(e.label), merged.size());
      merged.push_back(std::move(e));
    }
  }
  return train_from_examples(std::move(merged), model.vocab, model.hyper);
}

double predict(const HeatModel& model, const Episode& prior, const Episode& critical) {
  return model.predict_row(extract_features(prior, critical, model.vocab, model.hyper.features).to_vector());
}

std::vector<double> predict_batch(const HeatModel& model, const EpisodeStore& store,
                                  std::span<const EpisodePair> pairs) {
  std::vector<double> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    out[i] = predict(model, store[pairs[i].prior], store[pairs[i].critical]);
  });
  return out;
}

nlohmann::json HeatModel::to_json() const {
  nlohmann::json training_json = nlohmann::json::array();
  for (const auto& e : training) {
    auto j = heat::to_json(e.label);
    j["prior_stage"] = e.prior_stage;
    j["features"] = e.features;
    training_json.push_back(std::move(j));
  }
  return {{"format", "heat-model"},
          {"format_version", format_version},
          {"vocabulary", vocab.to_json()},
          {"vocabulary_fingerprint", hex64(vocab.fingerprint())},
          {"hyperparams", hyper.to_json()},
          {"standardizer", standardizer.to_json()},
          {"regressor", regressor_to_json(regressor)},
          {"training_fingerprint", training_fingerprint},
          {"cv_mse", cv_mse},
          {"training", std::move(training_json)}};
}

HeatModel HeatModel::from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "heat-model") fail(ErrorKind::data, "not a heat model file");
    HeatModel m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kModelFormatVersion) {
      fail(ErrorKind::data, "unsupported model format version " + std::to_string(m.format_version));
    }
    m.vocab = StageVocabulary::from_json(j.at("vocabulary"));
    if (j.at("vocabulary_fingerprint").get<std::string>() != hex64(m.vocab.fingerprint())) {
      fail(ErrorKind::data, "model vocabulary fingerprint does not match its vocabulary");
    }
    m.hyper = Hyperparams::from_json(j.at("hyperparams"));
    m.standardizer = Standardizer::from_json(j.at("standardizer"));
    if (m.standardizer.dimension() != feature_dimension(m.vocab.size())) {
      fail(ErrorKind::data, "model standardizer dimension does not match its vocabulary");
    }
    m.regressor = regressor_from_json(j.at("regressor"));
    m.training_fingerprint = j.at("training_fingerprint").get<std::string>();
    m.cv_mse = j.at("cv_mse").get<double>();
    for (const auto& tj : j.at("training")) {
      TrainingExample e;
      e.label = label_from_json(tj);
      e.prior_stage = tj.at("prior_stage").get<std::string>();
      e.features = tj.at("features").get<std::vector<double>>();
      m.training.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const HeatModel& model, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorKind::data, "cannot write model file " + path);
    out << model.to_json().dump() << '\n';
    if (!out) fail(ErrorKind::data, "cannot write model file " + path);
  }
  std::filesystem::rename(tmp, path);
}

HeatModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::not_found, "cannot open model file " + path, "model");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::data, "model file " + path + " is not valid JSON");
  return HeatModel::from_json(j);
}

}  // namespace heat
