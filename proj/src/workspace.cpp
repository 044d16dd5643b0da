#include "heat/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "heat/error.hpp"
#include "heat/hashing.hpp"

namespace fs = std::filesystem;

namespace heat {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write-then-rename so readers never see a partial file.
void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::data, "cannot write " + path.string());
    out << content;
    if (!out) fail(ErrorKind::data, "cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

nlohmann::json read_json(const fs::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::data, path.string() + " is not valid JSON");
  return j;
}

nlohmann::json lookback_json(double lookback) {
  return std::isfinite(lookback) ? nlohmann::json(lookback) : nlohmann::json(nullptr);
}

std::optional<int> parse_version(const std::string& spec) {
  std::string digits = spec;
  if (!digits.empty() && (digits[0] == 'v' || digits[0] == 'V')) digits.erase(0, 1);
  if (digits.empty() || digits.size() > 6) return std::nullopt;
  if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  return std::stoi(digits);
}

std::string version_label(int version) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "v%04d", version);
  return buf;
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

nlohmann::json WorkspaceConfig::to_json() const {
  return {{"host", host},
          {"port", port},
          {"threshold", threshold},
          {"lookback", lookback_json(lookback_seconds)},
          {"acg_min", acg_min},
          {"auth_token", auth_token ? nlohmann::json(*auth_token) : nlohmann::json(nullptr)},
          {"hyperparams", hyperparams.to_json()},
          {"gain", {{"include_critical", gain.include_critical}, {"extended_nrg_base", gain.extended_nrg_base}}}};
}

WorkspaceConfig WorkspaceConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::validation, "config must be a JSON object");
  try {
    WorkspaceConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.threshold = j.value("threshold", c.threshold);
    if (auto it = j.find("lookback"); it != j.end() && !it->is_null()) c.lookback_seconds = it->get<double>();
    c.acg_min = j.value("acg_min", c.acg_min);
    if (auto it = j.find("auth_token"); it != j.end() && !it->is_null()) c.auth_token = it->get<std::string>();
    if (auto it = j.find("hyperparams"); it != j.end()) c.hyperparams = Hyperparams::from_json(*it);
    if (auto it = j.find("gain"); it != j.end()) {
      c.gain.include_critical = it->value("include_critical", c.gain.include_critical);
      c.gain.extended_nrg_base = it->value("extended_nrg_base", c.gain.extended_nrg_base);
    }
    if (c.port < 0 || c.port > 65535) fail(ErrorKind::validation, "port must be in 0..65535", "port");
    if (!(c.threshold >= 0.0)) fail(ErrorKind::validation, "threshold must be >= 0", "threshold");
    if (!(c.lookback_seconds >= 0.0)) fail(ErrorKind::validation, "lookback must be >= 0", "lookback");
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("malformed config: ") + e.what());
  }
}

nlohmann::json CorpusInfo::to_json() const {
  return {{"corpus_id", corpus_id}, {"mode", heat::to_string(mode)}, {"stats", stats.to_json()}, {"episodes", episodes}};
}

nlohmann::json ModelInfo::to_json() const {
  return {{"version", version},
          {"base_version", base_version ? nlohmann::json(*base_version) : nlohmann::json(nullptr)},
          {"cv_mse", cv_mse},
          {"labels", labels},
          {"training_fingerprint", training_fingerprint},
          {"corpus_id", corpus_id},
          {"active", active}};
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "corpus");
  fs::create_directories(root_ / "models");
  const fs::path config_path = root_ / "config.json";
  if (fs::exists(config_path)) {
    config_ = WorkspaceConfig::from_json(read_json(config_path));
  } else {
    write_file(config_path, config_.to_json().dump(2) + "\n");
  }
  const fs::path vocab_path = root_ / "vocabulary.json";
  if (fs::exists(vocab_path)) {
    vocab_ = StageVocabulary::from_json(read_json(vocab_path));
  } else {
    vocab_ = default_vocabulary();
    write_file(vocab_path, vocab_.to_json().dump(2) + "\n");
  }
}

fs::path Workspace::default_root() {
  if (const char* env = std::getenv("HEAT_WORKSPACE"); env != nullptr && *env != '\0') return env;
  return fs::current_path() / "heat-workspace";
}

void Workspace::set_vocabulary(const StageVocabulary& vocab) {
  std::lock_guard lock(state_mu_);
  if (vocab == vocab_) return;
  if (fs::exists(root_ / "corpus" / "ACTIVE")) {
    fail(ErrorKind::conflict, "cannot change the vocabulary of a workspace that already holds a corpus", "vocab");
  }
  vocab_ = vocab;
  write_file(root_ / "vocabulary.json", vocab_.to_json().dump(2) + "\n");
}

fs::path Workspace::corpus_dir(const std::string& id) const { return root_ / "corpus" / id; }

fs::path Workspace::model_path(int version) const { return root_ / "models" / (version_label(version) + ".json"); }

CorpusInfo Workspace::ingest_file(const std::string& eve_path, const IngestOptions& options) {
  return ingest_bytes(read_file(eve_path), options);
}

CorpusInfo Workspace::ingest_text(const std::string& eve_text, const IngestOptions& options) {
  return ingest_bytes(eve_text, options);
}

CorpusInfo Workspace::ingest_bytes(const std::string& bytes, const IngestOptions& options) {
  std::lock_guard lock(state_mu_);
  if (options.mapping_path) {
    const StageMapping mapping = load_mapping(*options.mapping_path, vocab_);
    write_file(root_ / "mapping.json", mapping.to_json().dump(2) + "\n");
  }
  if (options.asn_table_path) {
    AsnTable::load_csv(*options.asn_table_path);  // validate before copying
    write_file(root_ / "asn.csv", read_file(*options.asn_table_path));
  }
  if (options.mode == KeyMode::per_source_asn && !fs::exists(root_ / "asn.csv")) {
    fail(ErrorKind::validation, "ASN keys need an ASN table (--asn-table)", "asn_table");
  }

  CorpusInfo info;
  info.corpus_id = sha256_hex(bytes);
  info.mode = options.mode;
  const fs::path dir = corpus_dir(info.corpus_id);
  fs::create_directories(dir);
  write_file(dir / "eve.json", bytes);
  nlohmann::json meta = {{"corpus_id", info.corpus_id}, {"mode", to_string(info.mode)}};
  write_file(dir / "meta.json", meta.dump(2) + "\n");

  auto corpus = load_corpus(info.corpus_id);
  std::ostringstream episodes;
  corpus->store.write_jsonl(episodes);
  write_file(dir / "episodes.jsonl", episodes.str());

  std::istringstream in(bytes);
  StageMapping mapping = fs::exists(root_ / "mapping.json")
                             ? StageMapping::from_json(read_json(root_ / "mapping.json"), vocab_)
                             : default_mapping(vocab_);
  info.stats = parse_eve_stream(in, mapping, vocab_).stats;
  info.episodes = corpus->store.size();
  meta["stats"] = info.stats.to_json();
  meta["episodes"] = info.episodes;
  write_file(dir / "meta.json", meta.dump(2) + "\n");
  write_file(root_ / "corpus" / "ACTIVE", info.corpus_id + "\n");
  corpus_ = std::move(corpus);
  corpus_id_ = info.corpus_id;
  return info;
}

std::shared_ptr<const Corpus> Workspace::load_corpus(const std::string& id) const {
  const fs::path dir = corpus_dir(id);
  const auto meta = read_json(dir / "meta.json");
  const KeyMode mode = parse_key_mode(meta.at("mode").get<std::string>());
  const StageMapping mapping = fs::exists(root_ / "mapping.json")
                                   ? StageMapping::from_json(read_json(root_ / "mapping.json"), vocab_)
                                   : default_mapping(vocab_);
  auto parsed = parse_eve_file((dir / "eve.json").string(), mapping, vocab_);
  AggregationConfig cfg;
  cfg.smoothing = SmoothingConfig::from_vocabulary(vocab_);
  cfg.mode = mode;
  auto table = std::make_shared<AsnTable>();
  if (mode == KeyMode::per_source_asn) {
    *table = AsnTable::load_csv((root_ / "asn.csv").string());
    cfg.asn_table = table.get();
  }
  return std::make_shared<const Corpus>(make_corpus(std::move(parsed.alerts), vocab_, cfg));
}

std::optional<CorpusInfo> Workspace::corpus_info() const {
  const fs::path active = root_ / "corpus" / "ACTIVE";
  if (!fs::exists(active)) return std::nullopt;
  std::string id = read_file(active);
  id.erase(id.find_last_not_of(" \n\r\t") + 1);
  const auto meta = read_json(corpus_dir(id) / "meta.json");
  CorpusInfo info;
  info.corpus_id = id;
  info.mode = parse_key_mode(meta.at("mode").get<std::string>());
  if (auto s = meta.find("stats"); s != meta.end()) {
    info.stats.lines = s->value("lines", 0);
    info.stats.alerts = s->value("alerts", 0);
    info.stats.skipped_non_alert = s->value("skipped_non_alert", 0);
    info.stats.skipped_malformed = s->value("skipped_malformed", 0);
    info.stats.unmapped = s->value("unmapped", 0);
    info.stats.renamed_duplicate_ids = s->value("renamed_duplicate_ids", 0);
  }
  info.episodes = meta.value("episodes", 0);
  return info;
}

std::shared_ptr<const Corpus> Workspace::corpus() const {
  const auto info = corpus_info();
  if (!info) fail(ErrorKind::not_found, "no corpus ingested yet", "corpus");
  std::lock_guard lock(state_mu_);
  if (!corpus_ || corpus_id_ != info->corpus_id) {
    corpus_ = load_corpus(info->corpus_id);
    corpus_id_ = info->corpus_id;
  }
  return corpus_;
}

void Workspace::check_labels(const Corpus& corpus, const std::vector<LabeledPair>& labels) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    const std::string where = "labels[" + std::to_string(i) + "]";
    if (corpus.store.find(l.critical_episode_id) == nullptr) {
      fail(ErrorKind::not_found, where + ": unknown critical episode " + l.critical_episode_id,
           "critical_episode_id");
    }
    if (corpus.store.find(l.prior_episode_id) == nullptr) {
      fail(ErrorKind::not_found, where + ": unknown prior episode " + l.prior_episode_id, "prior_episode_id");
    }
    if (l.prior_episode_id == l.critical_episode_id) {
      fail(ErrorKind::validation, where + ": an episode cannot be labeled against itself", "prior_episode_id");
    }
  }
}

void Workspace::append_labels(const std::vector<LabeledPair>& labels) {
  std::ostringstream out;
  const double stamp = now_seconds();
  for (auto l : labels) {
    if (l.created_at == 0.0) l.created_at = stamp;
    out << to_json(l).dump() << '\n';
  }
  std::lock_guard lock(state_mu_);
  std::ofstream file(root_ / "labels.jsonl", std::ios::app);
  if (!file) fail(ErrorKind::data, "cannot append to labels.jsonl");
  file << out.str();
  file.flush();
  if (!file) fail(ErrorKind::data, "cannot append to labels.jsonl");
}

std::size_t Workspace::add_labels(const std::vector<LabeledPair>& labels) {
  check_labels(*corpus(), labels);
  append_labels(labels);
  return labels.size();
}

std::vector<LabeledPair> Workspace::labels() const {
  std::lock_guard lock(state_mu_);
  const fs::path path = root_ / "labels.jsonl";
  if (!fs::exists(path)) return {};
  return deduplicate_labels(read_labels_file(path.string()));
}

ModelInfo Workspace::train(const std::optional<Hyperparams>& hyper, const std::vector<LabeledPair>& extra) {
  std::unique_lock guard(train_mu_, std::try_to_lock);
  if (!guard.owns_lock()) fail(ErrorKind::conflict, "a training run is already in progress");
  const auto snapshot = corpus();
  check_labels(*snapshot, extra);
  auto all = labels();
  all.insert(all.end(), extra.begin(), extra.end());
  HeatModel model = heat::train(deduplicate_labels(all), snapshot->store, vocab_, hyper.value_or(config_.hyperparams));
  append_labels(extra);
  return store_model(model, std::nullopt);
}

ModelInfo Workspace::fine_tune(std::optional<int> base_version, const std::vector<LabeledPair>& extra) {
  std::unique_lock guard(train_mu_, std::try_to_lock);
  if (!guard.owns_lock()) fail(ErrorKind::conflict, "a training run is already in progress");
  const auto snapshot = corpus();
  check_labels(*snapshot, extra);
  const int base = base_version ? *base_version : resolve_model_version({});
  const auto base_model = model(std::to_string(base));
  std::map<std::tuple<std::string, std::string, std::string>, int> seen;
  for (const auto& e : base_model->training) {
    seen[{e.label.critical_episode_id, e.label.prior_episode_id, e.label.annotator}] = e.label.heat;
  }
  auto all = labels();
  all.insert(all.end(), extra.begin(), extra.end());
  std::vector<LabeledPair> fresh;
  for (const auto& l : deduplicate_labels(all)) {
    auto it = seen.find({l.critical_episode_id, l.prior_episode_id, l.annotator});
    if (it == seen.end() || it->second != l.heat) fresh.push_back(l);
  }
  if (fresh.empty()) fail(ErrorKind::validation, "no new labels since model " + version_label(base), "labels");
  HeatModel tuned = heat::fine_tune(*base_model, fresh, snapshot->store);
  append_labels(extra);
  return store_model(tuned, base);
}

ModelInfo Workspace::store_model(const HeatModel& model, std::optional<int> base_version) {
  std::lock_guard lock(state_mu_);
  int version = 1;
  for (const auto& entry : fs::directory_iterator(root_ / "models")) {
    const std::string name = entry.path().filename().string();
    if (name.size() == 10 && name[0] == 'v' && name.ends_with(".json")) {
      if (auto v = parse_version(name.substr(0, 5))) version = std::max(version, *v + 1);
    }
  }
  save_model(model, model_path(version).string());
  ModelInfo info;
  info.version = version;
  info.base_version = base_version;
  info.cv_mse = model.cv_mse;
  info.labels = model.training.size();
  info.training_fingerprint = model.training_fingerprint;
  info.corpus_id = corpus_id_;
  auto meta = info.to_json();
  meta.erase("active");
  write_file(root_ / "models" / (version_label(version) + ".meta.json"), meta.dump(2) + "\n");
  write_file(root_ / "models" / "ACTIVE", std::to_string(version) + "\n");
  models_[version] = std::make_shared<const HeatModel>(model);
  info.active = true;
  return info;
}

ModelInfo Workspace::read_model_info(int version) const {
  const auto meta = read_json(root_ / "models" / (version_label(version) + ".meta.json"));
  ModelInfo info;
  info.version = version;
  if (auto b = meta.find("base_version"); b != meta.end() && !b->is_null()) info.base_version = b->get<int>();
  info.cv_mse = meta.value("cv_mse", 0.0);
  info.labels = meta.value("labels", std::size_t{0});
  info.training_fingerprint = meta.value("training_fingerprint", std::string());
  info.corpus_id = meta.value("corpus_id", std::string());
  return info;
}

std::vector<ModelInfo> Workspace::models() const {
  std::vector<ModelInfo> out;
  const auto active = active_model_version();
  std::lock_guard lock(state_mu_);
  std::vector<int> versions;
  for (const auto& entry : fs::directory_iterator(root_ / "models")) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".meta.json")) {
      if (auto v = parse_version(name.substr(0, 5))) versions.push_back(*v);
    }
  }
  std::sort(versions.begin(), versions.end());
  for (int v : versions) {
    auto info = read_model_info(v);
    info.active = active && *active == v;
    out.push_back(std::move(info));
  }
  return out;
}

std::optional<int> Workspace::active_model_version() const {
  const fs::path path = root_ / "models" / "ACTIVE";
  if (!fs::exists(path)) return std::nullopt;
  return parse_version(read_file(path).substr(0, read_file(path).find_first_of(" \n\r")));
}

void Workspace::activate_model(int version) {
  std::lock_guard lock(state_mu_);
  if (!fs::exists(model_path(version))) fail(ErrorKind::not_found, "no model " + version_label(version), "model");
  write_file(root_ / "models" / "ACTIVE", std::to_string(version) + "\n");
}

int Workspace::resolve_model_version(const std::string& spec) const {
  if (spec.empty()) {
    const auto active = active_model_version();
    if (!active) fail(ErrorKind::conflict, "no active model", "model");
    return *active;
  }
  const auto v = parse_version(spec);
  if (!v) fail(ErrorKind::validation, "not a model version: " + spec, "model");
  if (!fs::exists(model_path(*v))) fail(ErrorKind::not_found, "no model " + version_label(*v), "model");
  return *v;
}

std::shared_ptr<const HeatModel> Workspace::model(const std::string& spec) const {
  if (!spec.empty() && !parse_version(spec)) {
    if (!fs::exists(spec)) fail(ErrorKind::not_found, "no model file " + spec, "model");
    auto m = std::make_shared<const HeatModel>(load_model(spec));
    if (m->vocab != vocab_) fail(ErrorKind::validation, "model vocabulary does not match the workspace", "model");
    return m;
  }
  const int version = resolve_model_version(spec);
  std::lock_guard lock(state_mu_);
  auto& slot = models_[version];
  if (!slot) slot = std::make_shared<const HeatModel>(load_model(model_path(version).string()));
  return slot;
}

double parse_lookback(std::string_view text) {
  if (text == "inf" || text == "none" || text == "unbounded") return kUnboundedLookback;
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || !(v >= 0.0)) {
    fail(ErrorKind::validation, "lookback must be a non-negative number of seconds or 'inf'", "lookback");
  }
  return v;
}

namespace {

std::string model_label(const Workspace& ws, const std::string& spec) {
  if (!spec.empty() && !parse_version(spec)) return spec;
  return version_label(ws.resolve_model_version(spec));
}

}  // namespace

nlohmann::json episodes_view(const Workspace& ws, const EpisodeQuery& q) {
  const auto corpus = ws.corpus();
  if (q.stage && !ws.vocabulary().contains(*q.stage)) {
    fail(ErrorKind::validation, "unknown stage '" + *q.stage + "'", "stage");
  }
  if (q.limit == 0 || q.limit > 10000) fail(ErrorKind::validation, "limit must be in 1..10000", "limit");
  nlohmann::json page = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& e : corpus->store.episodes()) {
    if (q.key && e.key != *q.key) continue;
    if (q.stage && e.stage != *q.stage) continue;
    if (q.from && e.peak_time < *q.from) continue;
    if (q.to && e.peak_time >= *q.to) continue;
    if (total >= q.offset && page.size() < q.limit) page.push_back(to_json(e));
    ++total;
  }
  return {{"corpus_id", ws.corpus_info()->corpus_id},
          {"total", total},
          {"offset", q.offset},
          {"limit", q.limit},
          {"episodes", std::move(page)}};
}

nlohmann::json iocs_view(const Workspace& ws, const std::string& signature, int max_severity) {
  const auto corpus = ws.corpus();
  nlohmann::json list = nlohmann::json::array();
  for (const auto& ioc : candidate_iocs(*corpus, signature, max_severity)) list.push_back(to_json(ioc));
  return {{"signature", signature}, {"max_severity", max_severity}, {"iocs", std::move(list)}};
}

namespace {

struct HacContext {
  std::shared_ptr<const Corpus> corpus;
  std::shared_ptr<const HeatModel> model;
  std::string model_label;
  Hac hac;
};

HacContext build_hac(const Workspace& ws, const HacQuery& q, bool need_model) {
  HacContext c;
  c.corpus = ws.corpus();
  const double threshold = q.threshold.value_or(ws.config().threshold);
  const double lookback = q.lookback.value_or(ws.config().lookback_seconds);
  const Ioc ioc = resolve_ioc(q.ioc, *c.corpus);
  if (need_model || q.method == HacMethod::heat_model) {
    c.model = ws.model(q.model);
    c.model_label = model_label(ws, q.model);
  }
  c.hac = q.method == HacMethod::heat_model ? extract_hac(ioc, *c.model, *c.corpus, lookback, threshold)
                                            : extract_baseline(ioc, *c.corpus, q.method, lookback);
  return c;
}

}  // namespace

nlohmann::json hac_view(const Workspace& ws, const HacQuery& q) {
  const auto c = build_hac(ws, q, false);
  auto j = to_json(c.hac, c.corpus->store);
  j["model"] = c.model ? nlohmann::json(c.model_label) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json gain_view(const Workspace& ws, const HacQuery& q) {
  const auto c = build_hac(ws, q, true);
  const auto report =
      compute_gain(c.hac, c.corpus->store, training_stage_heats(*c.model), ws.vocabulary(), ws.config().gain);
  auto j = report.to_json();
  j["ioc"] = to_json(c.hac.ioc);
  j["method"] = to_string(c.hac.method);
  j["model"] = c.model_label;
  j["threshold"] = c.hac.threshold;
  j["lookback"] = lookback_json(c.hac.lookback_seconds);
  return j;
}

nlohmann::json rank_view(const Workspace& ws, const RankQuery& q) {
  const auto corpus = ws.corpus();
  const auto model = ws.model(q.model);
  RankConfig cfg;
  cfg.threshold = q.threshold.value_or(ws.config().threshold);
  cfg.lookback_seconds = q.lookback.value_or(ws.config().lookback_seconds);
  cfg.acg_min = q.acg_min.value_or(ws.config().acg_min);
  cfg.gain = ws.config().gain;
  const auto iocs = candidate_iocs(*corpus, q.signature, q.max_severity);
  nlohmann::json ranking = nlohmann::json::array();
  for (const auto& r : rank_iocs(iocs, *model, *corpus, cfg)) ranking.push_back(to_json(r));
  return {{"model", model_label(ws, q.model)},
          {"acg_min", cfg.acg_min},
          {"threshold", cfg.threshold},
          {"lookback", lookback_json(cfg.lookback_seconds)},
          {"signature", q.signature},
          {"max_severity", q.max_severity},
          {"candidates", iocs.size()},
          {"ranking", std::move(ranking)}};
}

nlohmann::json models_view(const Workspace& ws) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& m : ws.models()) list.push_back(m.to_json());
  const auto active = ws.active_model_version();
  return {{"active", active ? nlohmann::json(*active) : nlohmann::json(nullptr)}, {"models", std::move(list)}};
}

}  // namespace heat
