#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "heat/aggregation_key.hpp"
#include "heat/corpus.hpp"
#include "heat/gain.hpp"
#include "heat/hac.hpp"
#include "heat/heat_model.hpp"

namespace heat {

/// `config.json` in the workspace root. Every key is optional.
struct WorkspaceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  double threshold = 0.5;
  double lookback_seconds = kUnboundedLookback;
  double acg_min = 0.4;
  std::optional<std::string> auth_token;  // bearer token required by the service when set
  Hyperparams hyperparams;
  GainConfig gain;

  nlohmann::json to_json() const;
  static WorkspaceConfig from_json(const nlohmann::json& j);
};

struct IngestOptions {
  KeyMode mode = KeyMode::per_source_ip;
  std::optional<std::string> mapping_path;
  std::optional<std::string> asn_table_path;  // copied into the workspace
};

struct CorpusInfo {
  std::string corpus_id;  // sha256 of the EVE bytes
  KeyMode mode = KeyMode::per_source_ip;
  IngestStats stats;
  std::size_t episodes = 0;

  nlohmann::json to_json() const;
};

struct ModelInfo {
  int version = 0;
  std::optional<int> base_version;  // set for fine-tuned models
  double cv_mse = 0.0;
  std::size_t labels = 0;
  std::string training_fingerprint;
  std::string corpus_id;
  bool active = false;

  nlohmann::json to_json() const;
};

/// File-backed state under one root directory:
///   config.json, vocabulary.json, mapping.json (optional), asn.csv (optional)
///   corpus/<id>/{eve.json, episodes.jsonl, meta.json}, corpus/ACTIVE
///   labels.jsonl (append-only)
///   models/vNNNN.json, models/vNNNN.meta.json, models/ACTIVE
/// Readers get immutable snapshots; training is exclusive.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  /// HEAT_WORKSPACE, else ./heat-workspace.
  static std::filesystem::path default_root();

  const std::filesystem::path& root() const noexcept { return root_; }
  const WorkspaceConfig& config() const noexcept { return config_; }
  const StageVocabulary& vocabulary() const noexcept { return vocab_; }
  void set_vocabulary(const StageVocabulary& vocab);

  CorpusInfo ingest_file(const std::string& eve_path, const IngestOptions& options);
  CorpusInfo ingest_text(const std::string& eve_text, const IngestOptions& options);
  std::optional<CorpusInfo> corpus_info() const;
  /// Throws not_found before the first ingest.
  std::shared_ptr<const Corpus> corpus() const;

  /// Validates that every episode id exists in the active corpus, then appends.
  std::size_t add_labels(const std::vector<LabeledPair>& labels);
  std::vector<LabeledPair> labels() const;

  /// Trains on the label log plus `extra`; `extra` is appended to the log only
  /// when training succeeds. Conflict error while another run is in progress.
  ModelInfo train(const std::optional<Hyperparams>& hyper = std::nullopt,
                  const std::vector<LabeledPair>& extra = {});
  /// Retrains `base` (default: active) on its examples plus logged and
  /// `extra` labels it has not seen or whose heat changed.
  ModelInfo fine_tune(std::optional<int> base_version = std::nullopt, const std::vector<LabeledPair>& extra = {});

  std::vector<ModelInfo> models() const;
  std::optional<int> active_model_version() const;
  void activate_model(int version);
  /// `spec` is empty (active model), a version ("3" / "v3"), or a model file path.
  std::shared_ptr<const HeatModel> model(const std::string& spec = {}) const;
  int resolve_model_version(const std::string& spec) const;

 private:
  std::filesystem::path corpus_dir(const std::string& id) const;
  std::filesystem::path model_path(int version) const;
  CorpusInfo ingest_bytes(const std::string& bytes, const IngestOptions& options);
  void check_labels(const Corpus& corpus, const std::vector<LabeledPair>& labels) const;
  void append_labels(const std::vector<LabeledPair>& labels);
  ModelInfo store_model(const HeatModel& model, std::optional<int> base_version);
  ModelInfo read_model_info(int version) const;
  std::shared_ptr<const Corpus> load_corpus(const std::string& id) const;

  std::filesystem::path root_;
  WorkspaceConfig config_;
  StageVocabulary vocab_;

  mutable std::mutex state_mu_;  // guards the cached snapshots and file writes
  mutable std::shared_ptr<const Corpus> corpus_;
  mutable std::string corpus_id_;
  mutable std::map<int, std::shared_ptr<const HeatModel>> models_;
  std::mutex train_mu_;
};

// JSON views shared by the CLI (--json) and the service so both render
// identical documents.

struct EpisodeQuery {
  std::optional<std::string> key;
  std::optional<std::string> stage;
  std::optional<double> from;
  std::optional<double> to;
  std::size_t offset = 0;
  std::size_t limit = 100;
};

struct HacQuery {
  std::string ioc;
  std::string model;
  std::optional<double> threshold;
  std::optional<double> lookback;
  HacMethod method = HacMethod::heat_model;
};

struct RankQuery {
  std::string model;
  std::optional<double> acg_min;
  std::optional<double> threshold;
  std::optional<double> lookback;
  std::string signature;
  int max_severity = 1;
};

/// Seconds, or "inf" / "none" for an unbounded window.
double parse_lookback(std::string_view text);

nlohmann::json episodes_view(const Workspace& ws, const EpisodeQuery& q);
nlohmann::json iocs_view(const Workspace& ws, const std::string& signature, int max_severity);
nlohmann::json hac_view(const Workspace& ws, const HacQuery& q);
nlohmann::json gain_view(const Workspace& ws, const HacQuery& q);
nlohmann::json rank_view(const Workspace& ws, const RankQuery& q);
nlohmann::json models_view(const Workspace& ws);

}  // namespace heat
