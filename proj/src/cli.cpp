#include "heat/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "heat/error.hpp"
#include "heat/scenario.hpp"
#include "heat/service.hpp"
#include "heat/timestamp.hpp"
#include "heat/workspace.hpp"

namespace heat {
namespace {

constexpr const char* kHeatLegend =
    "  0  no relation to the critical event\n"
    "  1  reconnaissance that may inform it\n"
    "  2  exploitation giving access required to achieve it\n"
    "  3  exfiltration, DoS or access directly relevant to it\n";

std::string join(const std::vector<std::string>& items, std::size_t max_items = 4) {
  std::string out;
  for (std::size_t i = 0; i < items.size() && i < max_items; ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  if (items.size() > max_items) out += ", +" + std::to_string(items.size() - max_items);
  return out;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string describe(const Episode& e) {
  std::ostringstream s;
  s << format_timestamp(e.peak_time) << "  " << e.stage << "  alerts=" << e.alert_count << "\n"
    << "    id       " << e.episode_id << "\n"
    << "    span     " << format_timestamp(e.start_time) << " .. " << format_timestamp(e.end_time) << "\n"
    << "    sources  " << join(e.sources) << "\n"
    << "    targets  " << join(e.targets) << "\n"
    << "    sigs     " << join(e.signatures, 3) << "\n";
  if (!e.dst_ports.empty()) {
    std::vector<std::string> ports;
    for (int p : e.dst_ports) ports.push_back(std::to_string(p));
    s << "    ports    " << join(ports, 8) << "\n";
  }
  return s.str();
}

std::vector<LabeledPair> read_labels_arg(const std::string& path) {
  return path.empty() ? std::vector<LabeledPair>{} : read_labels_file(path);
}

struct Options {
  std::string workspace;
  bool json = false;

  std::string eve, mapping, vocab, mode = "ip", asn_table;
  std::optional<std::string> key, stage;
  std::optional<double> from, to;
  std::size_t offset = 0, limit = 100;
  std::string ioc, model, method = "heat-model", lookback, labels_file, out, truth, annotator = "analyst";
  std::string hyperparams_file, signature, csv, spec, family = "desk";
  std::optional<double> threshold, acg_min;
  std::optional<std::uint64_t> seed;
  std::optional<int> base;
  int max_severity = 1, negatives = 20;
  bool interactive = false;
  std::string host;
  std::optional<int> port;
  std::optional<int> activate;
};

class Runner {
 public:
  Runner(Options o, std::istream& in, std::ostream& out) : o_(std::move(o)), in_(in), out_(out) {}

  Workspace& ws() {
    if (!ws_) ws_ = std::make_unique<Workspace>(o_.workspace.empty() ? Workspace::default_root() : std::filesystem::path(o_.workspace));
    return *ws_;
  }

  void print(const nlohmann::json& j) { out_ << j.dump(2) << "\n"; }

  std::optional<double> lookback() const {
    if (o_.lookback.empty()) return std::nullopt;
    return parse_lookback(o_.lookback);
  }

  HacQuery hac_query() const {
    HacQuery q;
    q.ioc = o_.ioc;
    q.model = o_.model;
    q.threshold = o_.threshold;
    q.lookback = lookback();
    q.method = parse_hac_method(o_.method);
    return q;
  }

  void ingest() {
    if (!o_.vocab.empty()) ws().set_vocabulary(load_vocabulary(o_.vocab));
    IngestOptions options;
    options.mode = parse_key_mode(o_.mode);
    if (!o_.mapping.empty()) options.mapping_path = o_.mapping;
    if (!o_.asn_table.empty()) options.asn_table_path = o_.asn_table;
    const auto info = ws().ingest_file(o_.eve, options);
    if (o_.json) return print(info.to_json());
    out_ << "corpus " << info.corpus_id << "\n"
         << "  alerts " << info.stats.alerts << " (" << info.stats.skipped_malformed << " malformed, "
         << info.stats.skipped_non_alert << " non-alert, " << info.stats.unmapped << " unmapped)\n"
         << "  episodes " << info.episodes << " keyed by " << to_string(info.mode) << "\n";
  }

  void episodes() {
    EpisodeQuery q{o_.key, o_.stage, o_.from, o_.to, o_.offset, o_.limit};
    const auto view = episodes_view(ws(), q);
    if (o_.json) return print(view);
    const auto corpus = ws().corpus();
    for (const auto& e : view["episodes"]) out_ << describe(corpus->store.at(e["episode_id"].get<std::string>()));
    out_ << view["episodes"].size() << " of " << view["total"].get<std::size_t>() << " episodes\n";
  }

  void iocs() {
    const auto view = iocs_view(ws(), o_.signature, o_.max_severity);
    if (o_.json) return print(view);
    for (const auto& i : view["iocs"]) {
      out_ << i["critical_alert_id"].get<std::string>() << "  "
           << format_timestamp(i["timestamp"].get<double>()) << "  " << i["signature"].get<std::string>() << "\n";
    }
  }

  void label() {
    auto& w = ws();
    const auto corpus = w.corpus();
    if (!o_.labels_file.empty()) {
      const auto stored = w.add_labels(read_labels_file(o_.labels_file));
      if (o_.json) return print({{"stored", stored}});
      out_ << "stored " << stored << " labels\n";
      return;
    }
    if (o_.ioc.empty()) fail(ErrorKind::validation, "--ioc is required unless --file is given", "ioc");
    const Ioc ioc = resolve_ioc(o_.ioc, *corpus);
    const double lb = lookback().value_or(w.config().lookback_seconds);
    if (!o_.truth.empty()) {
      std::ifstream tin(o_.truth);
      if (!tin) fail(ErrorKind::data, "cannot open truth file " + o_.truth);
      const TruthIndex truth(read_truth_jsonl(tin));
      const auto labels = simulate_analyst_labels(*corpus, truth, ioc.critical_alert_id, lb, o_.negatives,
                                                  o_.seed.value_or(1), o_.annotator);
      const auto stored = w.add_labels(labels);
      if (o_.json) return print({{"stored", stored}});
      out_ << "stored " << stored << " simulated labels for " << ioc.critical_alert_id << "\n";
      return;
    }
    const auto crit = corpus->store.index_of(ioc.critical_episode_id);
    const auto window = prior_window(corpus->store, *crit, lb);
    if (!o_.interactive) {
      if (o_.json) {
        nlohmann::json list = nlohmann::json::array();
        for (auto i : window) list.push_back(to_json(corpus->store[i]));
        return print({{"ioc", to_json(ioc)}, {"critical_episode_id", ioc.critical_episode_id}, {"prior", list}});
      }
      out_ << "critical " << describe(corpus->store[*crit]);
      for (auto i : window) out_ << describe(corpus->store[i]);
      out_ << window.size() << " prior episodes\n";
      return;
    }
    out_ << "critical " << describe(corpus->store[*crit]) << "\nheat levels:\n" << kHeatLegend;
    std::vector<LabeledPair> labels;
    std::size_t seen = 0;
    // Most recent first: the episodes nearest the IoC are the easiest to judge.
    for (auto it = window.rbegin(); it != window.rend(); ++it) {
      const Episode& e = corpus->store[*it];
      out_ << "\n[" << ++seen << "/" << window.size() << "] " << describe(e) << "heat 0-3, s skip, q quit> "
           << std::flush;
      std::string answer;
      bool quit = false;
      while (true) {
        if (!std::getline(in_, answer)) {
          quit = true;
          break;
        }
        if (answer == "q") {
          quit = true;
          break;
        }
        if (answer == "s" || answer.empty()) break;
        if (answer.size() == 1 && answer[0] >= '0' && answer[0] <= '3') {
          labels.push_back({ioc.critical_episode_id, e.episode_id, answer[0] - '0', o_.annotator, 0.0});
          break;
        }
        out_ << "enter 0, 1, 2, 3, s or q> " << std::flush;
      }
      if (quit) break;
    }
    const auto stored = labels.empty() ? 0 : w.add_labels(labels);
    out_ << "\nstored " << stored << " labels\n";
  }

  std::optional<Hyperparams> hyperparams() const {
    if (o_.hyperparams_file.empty()) return std::nullopt;
    std::ifstream in(o_.hyperparams_file);
    if (!in) fail(ErrorKind::data, "cannot open " + o_.hyperparams_file);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::data, o_.hyperparams_file + " is not valid JSON");
    return Hyperparams::from_json(j);
  }

  void report_model(const ModelInfo& info) {
    if (!o_.out.empty()) save_model(*ws().model(std::to_string(info.version)), o_.out);
    if (o_.json) return print(info.to_json());
    out_ << "model v" << info.version << "  labels=" << info.labels << "  cv_mse=" << fixed(info.cv_mse, 4);
    if (info.base_version) out_ << "  base=v" << *info.base_version;
    out_ << "\n";
  }

  void train() { report_model(ws().train(hyperparams(), read_labels_arg(o_.labels_file))); }

  void finetune() { report_model(ws().fine_tune(o_.base, read_labels_arg(o_.labels_file))); }

  void models() {
    if (o_.activate) ws().activate_model(ws().resolve_model_version(std::to_string(*o_.activate)));
    const auto view = models_view(ws());
    if (o_.json) return print(view);
    for (const auto& m : ws().models()) {
      out_ << (m.active ? "* " : "  ") << "v" << m.version << "  labels=" << m.labels
           << "  cv_mse=" << fixed(m.cv_mse, 4);
      if (m.base_version) out_ << "  base=v" << *m.base_version;
      out_ << "\n";
    }
  }

  void hac() {
    const auto view = hac_view(ws(), hac_query());
    if (o_.json) return print(view);
    const auto corpus = ws().corpus();
    out_ << "HAC for " << view["ioc"]["critical_alert_id"].get<std::string>() << " (" << o_.method
         << ", threshold " << view["threshold"].get<double>() << "): " << view["episodes"].size() << " of "
         << view["window_size"].get<std::size_t>() << " prior episodes\n";
    for (const auto& e : view["episodes"]) {
      out_ << "  heat " << fixed(e["heat"].get<double>(), 2) << "  "
           << describe(corpus->store.at(e["episode_id"].get<std::string>()));
    }
  }

  void gain() {
    const auto view = gain_view(ws(), hac_query());
    if (o_.json) return print(view);
    out_ << "gain " << fixed(view["gain"].get<double>()) << " = acg " << fixed(view["acg"].get<double>())
         << " + nrg " << fixed(view["nrg"].get<double>()) << " - coh " << fixed(view["coh"].get<double>())
         << "  (hac " << view["hac_size"].get<std::size_t>() << " / window "
         << view["window_size"].get<std::size_t>() << ")";
    if (view["partial"].get<bool>()) out_ << "  [no training labels, coh not computed]";
    out_ << "\n";
  }

  void rank() {
    RankQuery q{o_.model, o_.acg_min, o_.threshold, lookback(), o_.signature, o_.max_severity};
    const auto view = rank_view(ws(), q);
    if (!o_.csv.empty()) {
      const auto corpus = ws().corpus();
      const auto model = ws().model(o_.model);
      RankConfig cfg;
      cfg.threshold = view["threshold"].get<double>();
      cfg.lookback_seconds = q.lookback.value_or(ws().config().lookback_seconds);
      cfg.acg_min = view["acg_min"].get<double>();
      cfg.gain = ws().config().gain;
      const auto iocs = candidate_iocs(*corpus, o_.signature, o_.max_severity);
      std::ofstream csv(o_.csv);
      if (!csv) fail(ErrorKind::data, "cannot write " + o_.csv);
      write_ranking_csv(csv, rank_iocs(iocs, *model, *corpus, cfg));
    }
    if (o_.json) return print(view);
    std::size_t n = 0;
    for (const auto& r : view["ranking"]) {
      out_ << ++n << ". " << r["ioc"]["critical_alert_id"].get<std::string>() << "  gain "
           << fixed(r["gain"].get<double>()) << "  hac " << r["hac_size"].get<std::size_t>() << "  "
           << r["ioc"]["signature"].get<std::string>() << "\n";
    }
    out_ << n << " of " << view["candidates"].get<std::size_t>() << " candidate IoCs passed acg >= "
         << view["acg_min"].get<double>() << "\n";
  }

  void synth() {
    ScenarioSpec spec;
    if (!o_.spec.empty()) {
      std::ifstream in(o_.spec);
      if (!in) fail(ErrorKind::data, "cannot open spec file " + o_.spec);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) fail(ErrorKind::data, o_.spec + " is not valid JSON");
      spec = ScenarioSpec::from_json(j);
    } else if (o_.family == "transfer") {
      spec = ScenarioSpec::transfer_family(o_.seed.value_or(1));
    } else if (o_.family == "desk") {
      spec = ScenarioSpec::desk_scale(o_.seed.value_or(1));
    } else {
      fail(ErrorKind::validation, "unknown family '" + o_.family + "' (desk or transfer)", "family");
    }
    if (o_.seed) spec.seed = *o_.seed;
    const auto vocab = o_.vocab.empty() ? default_vocabulary() : load_vocabulary(o_.vocab);
    const auto scenario = generate(spec, vocab);
    const std::filesystem::path dir = o_.out;
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, auto&& fn) {
      std::ofstream f(dir / name);
      if (!f) fail(ErrorKind::data, "cannot write " + (dir / name).string());
      fn(f);
    };
    write("eve.json", [&](std::ostream& f) { scenario.write_eve(f); });
    write("truth.jsonl", [&](std::ostream& f) { scenario.write_truth(f); });
    write("asn.csv", [&](std::ostream& f) { scenario.write_asn_csv(f); });
    write("spec.json", [&](std::ostream& f) { f << spec.to_json().dump(2) << "\n"; });
    nlohmann::json campaigns = nlohmann::json::array();
    for (const auto& c : scenario.campaigns) {
      campaigns.push_back({{"campaign_id", c.campaign_id},
                           {"template", c.template_name},
                           {"attacker_ips", c.attacker_ips},
                           {"victim_ip", c.victim_ip},
                           {"ioc_alert_id", c.ioc_alert_id}});
    }
    write("campaigns.json", [&](std::ostream& f) { f << campaigns.dump(2) << "\n"; });
    if (o_.json) return print({{"out", dir.string()}, {"alerts", scenario.alerts.size()}, {"campaigns", campaigns}});
    out_ << "wrote " << scenario.alerts.size() << " alerts, " << scenario.campaigns.size() << " campaigns to "
         << dir.string() << "\n";
    for (const auto& c : scenario.campaigns) {
      out_ << "  campaign " << c.campaign_id << " (" << c.template_name << ") ioc " << c.ioc_alert_id << "\n";
    }
  }

  void serve() {
    Service service(ws());
    const std::string host = o_.host.empty() ? ws().config().host : o_.host;
    const int port = o_.port.value_or(ws().config().port);
    const int bound = service.bind(host, port);
    if (bound < 0) fail(ErrorKind::internal, "cannot bind " + host + ":" + std::to_string(port));
    out_ << "listening on http://" << host << ":" << bound << "\n" << std::flush;
    service.serve();
  }

 private:
  Options o_;
  std::istream& in_;
  std::ostream& out_;
  std::unique_ptr<Workspace> ws_;
};

void add_hac_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--ioc", o.ioc, "Critical alert id")->required();
  cmd->add_option("--model", o.model, "Model version (3, v3) or model file; default active");
  cmd->add_option("--threshold", o.threshold, "Heat threshold")->check(CLI::Range(0.0, 1e9));
  cmd->add_option("--lookback", o.lookback, "Seconds before the IoC, or inf");
  cmd->add_option("--method", o.method, "heat-model, src-match, tgt-match or src-and-tgt-match");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Alert-episode heat triage"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--workspace", o.workspace, "Workspace directory (default $HEAT_WORKSPACE or ./heat-workspace)");
  app.add_flag("--json", o.json, "Machine-readable output");

  auto* ingest = app.add_subcommand("ingest", "Parse an EVE file and build episodes");
  ingest->add_option("eve", o.eve, "EVE JSON lines file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--mapping", o.mapping, "Stage mapping JSON")->check(CLI::ExistingFile);
  ingest->add_option("--vocab", o.vocab, "Stage vocabulary JSON")->check(CLI::ExistingFile);
  ingest->add_option("--mode", o.mode, "Aggregation key: ip or asn")->check(CLI::IsMember({"ip", "asn"}));
  ingest->add_option("--asn-table", o.asn_table, "CIDR,ASN csv for --mode asn")->check(CLI::ExistingFile);

  auto* episodes = app.add_subcommand("episodes", "List episodes");
  episodes->add_option("--key", o.key, "Aggregation key");
  episodes->add_option("--stage", o.stage, "Stage");
  episodes->add_option("--from", o.from, "Peak time lower bound (epoch seconds)");
  episodes->add_option("--to", o.to, "Peak time upper bound (epoch seconds, exclusive)");
  episodes->add_option("--offset", o.offset, "Page offset");
  episodes->add_option("--limit", o.limit, "Page size")->check(CLI::Range(1, 10000));

  auto* iocs = app.add_subcommand("iocs", "List candidate critical alerts");
  iocs->add_option("--signature", o.signature, "Signature substring");
  iocs->add_option("--max-severity", o.max_severity, "Highest severity number to include")
      ->check(CLI::Range(1, 255));

  auto* label = app.add_subcommand("label", "Label prior episodes of an IoC");
  label->add_option("--ioc", o.ioc, "Critical alert id");
  label->add_flag("--interactive", o.interactive, "Prompt for a heat per prior episode");
  label->add_option("--file", o.labels_file, "Append labels from a JSON lines file")->check(CLI::ExistingFile);
  label->add_option("--truth", o.truth, "Simulate analyst labels from a synthetic truth file")
      ->check(CLI::ExistingFile);
  label->add_option("--negatives", o.negatives, "Random unrelated episodes labeled 0 (with --truth)")
      ->check(CLI::Range(0, 100000));
  label->add_option("--seed", o.seed, "Sampling seed (with --truth)");
  label->add_option("--lookback", o.lookback, "Seconds before the IoC, or inf");
  label->add_option("--annotator", o.annotator, "Annotator name");

  auto* train = app.add_subcommand("train", "Train a new model on the label log");
  train->add_option("--labels", o.labels_file, "Additional labels (JSON lines)")->check(CLI::ExistingFile);
  train->add_option("--out", o.out, "Also write the model file here");
  train->add_option("--hyperparams", o.hyperparams_file, "Hyperparameter JSON")->check(CLI::ExistingFile);

  auto* finetune = app.add_subcommand("finetune", "Retrain a model with new labels");
  finetune->add_option("--labels", o.labels_file, "Additional labels (JSON lines)")->check(CLI::ExistingFile);
  finetune->add_option("--base", o.base, "Base model version (default active)");
  finetune->add_option("--out", o.out, "Also write the model file here");

  auto* models = app.add_subcommand("models", "List model versions");
  models->add_option("--activate", o.activate, "Make this version active");

  auto* hac = app.add_subcommand("hac", "Extract the heated alert chain of an IoC");
  add_hac_flags(hac, o);
  auto* gain = app.add_subcommand("gain", "Score the chain of an IoC");
  add_hac_flags(gain, o);

  auto* rank = app.add_subcommand("rank", "Rank candidate IoCs by gain");
  rank->add_option("--model", o.model, "Model version or file; default active");
  rank->add_option("--acg-min", o.acg_min, "Minimum stage coverage")->check(CLI::Range(0.0, 1.0));
  rank->add_option("--threshold", o.threshold, "Heat threshold")->check(CLI::Range(0.0, 1e9));
  rank->add_option("--lookback", o.lookback, "Seconds before each IoC, or inf");
  rank->add_option("--signature", o.signature, "Candidate signature substring");
  rank->add_option("--max-severity", o.max_severity, "Highest severity number of candidates")
      ->check(CLI::Range(1, 255));
  rank->add_option("--csv", o.csv, "Also write the ranking as CSV");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario");
  synth->add_option("--spec", o.spec, "Scenario spec JSON")->check(CLI::ExistingFile);
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Seed");
  synth->add_option("--family", o.family, "desk or transfer")->check(CLI::IsMember({"desk", "transfer"}));
  synth->add_option("--vocab", o.vocab, "Stage vocabulary JSON")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Run the REST service");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o_out, o_err;
    const int code = app.exit(e, o_out, o_err);
    out << o_out.str();
    err << o_err.str();
    return code == 0 ? 0 : 1;
  }

  Runner run(o, in, out);
  try {
    if (*ingest) run.ingest();
    else if (*episodes) run.episodes();
    else if (*iocs) run.iocs();
    else if (*label) run.label();
    else if (*train) run.train();
    else if (*finetune) run.finetune();
    else if (*models) run.models();
    else if (*hac) run.hac();
    else if (*gain) run.gain();
    else if (*rank) run.rank();
    else if (*synth) run.synth();
    else if (*serve) run.serve();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace heat
