#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "heat/alert.hpp"
#include "heat/corpus.hpp"
#include "heat/heat_model.hpp"

namespace heat {

enum class Flow {
  attacker_to_victim,
  victim_to_attacker,
  victim_to_internal,  // pivot from the victim to other internal hosts
};

/// One stage of a planted campaign.
struct StepTemplate {
  StageId stage;
  int truth_heat = 0;
  Flow flow = Flow::attacker_to_victim;
  double delay_min = 600.0;  // seconds after the previous step began
  double delay_max = 1800.0;
  int alerts_min = 20;
  int alerts_max = 40;
  double spread_seconds = 180.0;  // burst duration
  int extra_targets = 0;          // additional internal hosts hit in the same step
  std::vector<int> ports;
};

/// Ordered stage sequence; the last step is the objective used as the IoC.
struct CampaignTemplate {
  std::string name;
  std::vector<StepTemplate> steps;
};

struct AddressPlan {
  std::string internal_base = "10.0.0.0";    // one /16, all internal hosts
  std::string attacker_base = "203.0.0.0";   // one /24 per campaign
  std::string noise_base = "100.64.0.0";     // one /24 per noise ASN
  std::uint32_t internal_asn = 64512;
  std::uint32_t attacker_asn_base = 65000;
  std::uint32_t noise_asn_base = 60000;
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  double start_time = 1767225600.0;  // 2026-01-01T00:00:00Z
  double duration = 86400.0;
  int n_attackers = 3;  // one planted campaign per attacker
  std::vector<CampaignTemplate> templates;
  double noise_rate = 0.22;  // alerts per second
  double noise_burst_mean = 20.0;
  int noise_sources = 1500;
  int noise_asns = 60;
  int internal_hosts = 250;
  int attacker_ips_per_campaign = 1;
  int decoy_targets = 0;  // extra hosts sprayed on attacker→victim steps before the objective
  int distractions_per_campaign = 4;
  double victim_noise_fraction = 0.08;  // noise bursts aimed at a campaign victim
  std::map<StageId, double> noise_stage_weights;
  int signatures_per_stage = 6;
  AddressPlan addresses;

  /// Default desk-scale scenario: ≈20k alerts, 3 campaigns, ≈95% noise.
  static ScenarioSpec desk_scale(std::uint64_t seed = 1);
  /// Different network: disjoint addresses, multi-IP attackers, decoy targets.
  static ScenarioSpec transfer_family(std::uint64_t seed = 1);

  void validate(const StageVocabulary& vocab) const;
  nlohmann::json to_json() const;
  static ScenarioSpec from_json(const nlohmann::json& j);
};

std::vector<CampaignTemplate> default_campaign_templates();

struct TruthRecord {
  std::string alert_id;
  std::optional<int> campaign_id;
  StageId stage;
  int truth_heat = 0;
  int step = -1;  // index of the campaign step, -1 for noise
};

struct PlantedCampaign {
  int campaign_id = 0;
  std::string template_name;
  std::vector<std::string> attacker_ips;
  std::string victim_ip;
  std::string ioc_alert_id;
};

struct Scenario {
  std::vector<Alert> alerts;  // time-sorted
  std::vector<TruthRecord> truth;
  std::vector<PlantedCampaign> campaigns;
  std::vector<std::pair<std::string, std::uint32_t>> asn_prefixes;  // cidr, asn

  void write_eve(std::ostream& out) const;
  void write_truth(std::ostream& out) const;
  void write_asn_csv(std::ostream& out) const;
};

/// Deterministic in `spec.seed`. Alerts carry the stage their category maps
/// to under `default_mapping`.
Scenario generate(const ScenarioSpec& spec, const StageVocabulary& vocab);

std::vector<TruthRecord> read_truth_jsonl(std::istream& in);

/// Ground truth projected onto episodes (majority vote over member alerts).
struct EpisodeTruth {
  std::optional<int> campaign_id;
  int truth_heat = 0;
  int step = -1;
};

class TruthIndex {
 public:
  explicit TruthIndex(const std::vector<TruthRecord>& truth);
  const TruthRecord* find(const std::string& alert_id) const;
  EpisodeTruth episode_truth(const Episode& episode) const;

 private:
  std::unordered_map<std::string, TruthRecord> by_alert_;
};

/// Simulated analyst triage of one IoC: every prior episode of the IoC's
/// campaign with its truth heat, every prior episode sharing an address with
/// the critical episode, and `random_negatives` other prior episodes, all
/// within `lookback` seconds.
std::vector<LabeledPair> simulate_analyst_labels(const Corpus& corpus, const TruthIndex& truth,
                                                 const std::string& ioc_alert_id, double lookback,
                                                 int random_negatives, std::uint64_t seed,
                                                 const std::string& annotator = "simulated");

}  // namespace heat
