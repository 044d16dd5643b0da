#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "heat/episode_store.hpp"
#include "heat/features.hpp"
#include "heat/regressor.hpp"
#include "heat/vocabulary.hpp"

namespace heat {

inline constexpr double kMaxHeat = 3.0;
inline constexpr std::size_t kMinTrainingLabels = 25;
inline constexpr int kModelFormatVersion = 1;

/// Analyst-assigned heat of a prior episode relative to a critical one.
///   0  no relation to the critical event
///   1  reconnaissance that may inform it
///   2  exploitation giving access required to achieve it
///   3  exfiltration / DoS / access directly relevant to it
struct LabeledPair {
  std::string critical_episode_id;
  std::string prior_episode_id;
  int heat = 0;
  std::string annotator = "analyst";
  double created_at = 0.0;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

nlohmann::json to_json(const LabeledPair& label);
/// Field-level validation errors (field name carried in the Error).
LabeledPair label_from_json(const nlohmann::json& j);
std::vector<LabeledPair> read_labels_jsonl(std::istream& in);
std::vector<LabeledPair> read_labels_file(const std::string& path);
void write_labels_jsonl(std::ostream& out, std::span<const LabeledPair> labels);

/// Keeps the last label for each (critical, prior, annotator), in first-seen order.
std::vector<LabeledPair> deduplicate_labels(std::span<const LabeledPair> labels);

struct Hyperparams {
  RegressorKind kind = RegressorKind::gbrt;
  GbrtParams gbrt;
  MlpParams mlp;
  std::uint64_t seed = 42;
  int cv_folds = 5;
  FeatureConfig features;

  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);
};

/// A label together with the raw features it was trained on, so a model can
/// be fine-tuned against a different episode store.
struct TrainingExample {
  LabeledPair label;
  StageId prior_stage;
  std::vector<double> features;
};

struct HeatModel {
  int format_version = kModelFormatVersion;
  StageVocabulary vocab;
  Hyperparams hyper;
  Standardizer standardizer;
  Regressor regressor;
  std::string training_fingerprint;
  double cv_mse = 0.0;
  std::vector<TrainingExample> training;

  std::uint64_t vocab_fingerprint() const noexcept { return vocab.fingerprint(); }
  /// Clipped prediction from an unstandardized feature row.
  double predict_row(std::span<const double> raw_features) const;

  nlohmann::json to_json() const;
  static HeatModel from_json(const nlohmann::json& j);
};

/// Needs ≥ 25 labels over ≥ 2 distinct heats whose episode ids resolve in `store`.
HeatModel train(std::span<const LabeledPair> labels, const EpisodeStore& store,
                const StageVocabulary& vocab, const Hyperparams& hyper = {});

/// Full retrain on the model's training examples plus `new_labels` (later wins).
HeatModel fine_tune(const HeatModel& model, std::span<const LabeledPair> new_labels,
                    const EpisodeStore& store);

/// Heat of `prior` relative to `critical`, clipped to [0, 3].
double predict(const HeatModel& model, const Episode& prior, const Episode& critical);

/// Parallel batch prediction over store index pairs.
std::vector<double> predict_batch(const HeatModel& model, const EpisodeStore& store,
                                  std::span<const EpisodePair> pairs);

/// Mean held-out MSE over stratified folds (clipped predictions).
double cross_validate(MatrixView x, std::span<const double> y, const Hyperparams& hyper);

/// Fold id per sample; samples of each heat value are dealt round-robin
/// after a seeded shuffle.
std::vector<int> stratified_folds(std::span<const double> y, int folds, std::uint64_t seed);

void save_model(const HeatModel& model, const std::string& path);
HeatModel load_model(const std::string& path);

}  // namespace heat
