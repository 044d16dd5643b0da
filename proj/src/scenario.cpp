#include "heat/scenario.hpp"

#include <algorithm>
#include <arpa/inet.h>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "heat/error.hpp"
#include "heat/hac.hpp"
#include "heat/timestamp.hpp"

namespace heat {

namespace {

struct SignaturePool {
  const char* stage;
  const char* prefix;
  const char* category;
  int severity;
  std::vector<const char*> themes;
  std::vector<int> ports;
};

// Every entry maps to its stage under default_mapping.
const std::vector<SignaturePool>& signature_pools() {
  static const std::vector<SignaturePool> pools = {
      {"discovery",
       "ET SCAN",
       "Detection of a Network Scan",
       3,
       {"Nmap Scripting Engine User-Agent Detected", "Potential SSH Scan", "Suspicious inbound to MSSQL port 1433",
        "Behavioral Unusual Port 445 traffic", "NMAP OS Detection Probe", "Zmap User-Agent"},
       {22, 80, 443, 445, 1433, 3389, 8080}},
      {"exploitation",
       "ET EXPLOIT",
       "Web Application Attack",
       1,
       {"Apache Struts OGNL Injection", "Possible Log4j JNDI Lookup RCE Attempt", "SQL Injection UNION SELECT",
        "PHP Remote File Inclusion", "Possible SMBv1 Remote Code Execution", "Directory Traversal Attempt"},
       {80, 443, 445, 8080}},
      {"privilege_escalation",
       "ET ATTACK_RESPONSE",
       "Successful Administrator Privilege Gain",
       1,
       {"Possible Mimikatz Command Output", "Windows Token Impersonation", "Sudo Abuse Detected",
        "Local Admin Account Created", "UAC Bypass Attempt", "Kerberos TGT Request Anomaly"},
       {445, 88, 135}},
      {"command_and_control",
       "ET TROJAN",
       "A Network Trojan was detected",
       1,
       {"Cobalt Strike Beacon Observed", "Meterpreter Reverse HTTPS", "Sliver C2 Checkin", "DNS Tunnel Beacon",
        "Empire Stager Request", "Generic RAT Heartbeat"},
       {443, 8443, 53, 4444}},
      {"lateral_movement",
       "ET LATERAL",
       "Misc Attack",
       2,
       {"PsExec Service Creation", "WMI Remote Execution", "SMB Admin Share Access", "RDP Session from Internal Host",
        "WinRM Remote Command", "DCOM Remote Execution"},
       {445, 135, 3389, 5985}},
      {"exfiltration",
       "ET EXFIL",
       "Large Scale Information Leak",
       1,
       {"Large Data Transfer over FTP", "HTTP POST of Archive File", "DNS Exfiltration Pattern",
        "Outbound SMB File Copy", "Cloud Storage Bulk Upload", "Encrypted Archive Transfer"},
       {21, 443, 53, 445}},
      {"denial_of_service",
       "ET DOS",
       "Attempted Denial of Service",
       2,
       {"SYN Flood Inbound", "Slowloris Attack", "NTP Amplification", "HTTP GET Flood", "DNS Amplification Query",
        "SMB Resource Exhaustion"},
       {80, 443, 53, 123}},
      {"benign",
       "ET INFO",
       "Not Suspicious Traffic",
       3,
       {"Session Traversal Utilities for NAT", "Windows Update Check", "Dropbox Client Heartbeat",
        "Observed DNS Query to .cloud TLD", "Python User-Agent Outbound", "TLS Handshake Failure"},
       {53, 80, 443}},
      {"unmapped",
       "GPL MISC",
       "Unclassified",
       3,
       {"rsh root", "TCP Port 0 Traffic", "UPnP Service Discover", "Xtacacs Failed Login",
        "Source Port 53 to below 1024", "Invalid PIM Packet"},
       {0, 53, 514, 1900}},
  };
  return pools;
}

const SignaturePool* find_pool(const StageId& stage) {
  for (const auto& p : signature_pools()) {
    if (stage == p.stage) return &p;
  }
  return nullptr;
}

struct Signature {
  std::string text;
  std::int64_t id;
  std::string category;
  int severity;
};

std::vector<Signature> make_signatures(const SignaturePool& pool, std::size_t pool_index, int count) {
  std::vector<Signature> out;
  for (int k = 0; k < count; ++k) {
    std::string text = std::string(pool.prefix) + ' ' + pool.themes[k % pool.themes.size()];
    if (k >= static_cast<int>(pool.themes.size())) text += " variant " + std::to_string(k / pool.themes.size() + 1);
    out.push_back({std::move(text), static_cast<std::int64_t>(2100000 + pool_index * 1000 + k), pool.category,
                   pool.severity});
  }
  return out;
}

std::uint32_t ipv4_value(const std::string& text, const char* field) {
  in_addr a{};
  if (inet_pton(AF_INET, text.c_str(), &a) != 1) fail(ErrorKind::validation, "not an IPv4 address: " + text, field);
  return ntohl(a.s_addr);
}

std::string ipv4_text(std::uint32_t v) {
  return std::to_string(v >> 24) + '.' + std::to_string((v >> 16) & 0xff) + '.' + std::to_string((v >> 8) & 0xff) +
         '.' + std::to_string(v & 0xff);
}

const char* flow_name(Flow f) {
  switch (f) {
    case Flow::attacker_to_victim: return "attacker_to_victim";
    case Flow::victim_to_attacker: return "victim_to_attacker";
    case Flow::victim_to_internal: return "victim_to_internal";
  }
  return "?";
}

Flow parse_flow(const std::string& s) {
  if (s == "attacker_to_victim") return Flow::attacker_to_victim;
  if (s == "victim_to_attacker") return Flow::victim_to_attacker;
  if (s == "victim_to_internal") return Flow::victim_to_internal;
  fail(ErrorKind::validation, "unknown flow '" + s + "'", "flow");
}

StepTemplate step(StageId stage, int heat, Flow flow, double dmin, double dmax, int amin, int amax, double spread,
                  int extra = 0, std::vector<int> ports = {}) {
  return {std::move(stage), heat, flow, dmin, dmax, amin, amax, spread, extra, std::move(ports)};
}

double total_max_delay(const CampaignTemplate& t) {
  double total = 0.0;
  for (std::size_t i = 1; i < t.steps.size(); ++i) total += t.steps[i].delay_max;
  return total + t.steps.back().spread_seconds;
}

// Draws uniformly from [lo, hi].
double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

struct Draft {
  Alert alert;
  TruthRecord truth;
};

}  // namespace

std::vector<CampaignTemplate> default_campaign_templates() {
  using F = Flow;
  CampaignTemplate exfil{
      "exfiltration",
      {
          step("discovery", 1, F::attacker_to_victim, 0, 0, 30, 60, 300, 6),
          step("exploitation", 2, F::attacker_to_victim, 1200, 3600, 15, 30, 180, 0, {80, 443}),
          step("privilege_escalation", 2, F::attacker_to_victim, 600, 1800, 10, 20, 120, 0, {445}),
          step("command_and_control", 2, F::victim_to_attacker, 300, 900, 20, 40, 600, 0, {443, 8443}),
          step("lateral_movement", 2, F::victim_to_internal, 900, 2700, 15, 30, 300, 2, {445, 135}),
          step("exfiltration", 3, F::attacker_to_victim, 1800, 5400, 15, 30, 300, 0, {21, 443}),
      }};
  CampaignTemplate sabotage{
      "sabotage",
      {
          step("discovery", 1, F::attacker_to_victim, 0, 0, 30, 60, 300, 6),
          step("exploitation", 2, F::attacker_to_victim, 1200, 3600, 15, 30, 180, 0, {80, 443}),
          step("privilege_escalation", 2, F::attacker_to_victim, 600, 1800, 10, 20, 120, 0, {445, 88}),
          step("command_and_control", 2, F::victim_to_attacker, 300, 900, 20, 40, 600, 0, {53, 443}),
          step("lateral_movement", 2, F::victim_to_internal, 900, 2700, 15, 30, 300, 4, {3389, 5985}),
          step("denial_of_service", 3, F::attacker_to_victim, 1800, 5400, 20, 40, 300, 0, {80, 443}),
      }};
  return {exfil, sabotage};
}

ScenarioSpec ScenarioSpec::desk_scale(std::uint64_t seed) {
  ScenarioSpec s;
  s.seed = seed;
  s.templates = default_campaign_templates();
  s.noise_stage_weights = {{"benign", 0.55},
                           {"discovery", 0.30},
                           {"exploitation", 0.04},
                           {"unmapped", 0.05},
                           {"command_and_control", 0.02},
                           {"denial_of_service", 0.02},
                           {"privilege_escalation", 0.01},
                           {"exfiltration", 0.01}};
  return s;
}

ScenarioSpec ScenarioSpec::transfer_family(std::uint64_t seed) {
  ScenarioSpec s = desk_scale(seed);
  s.n_attackers = 4;
  s.attacker_ips_per_campaign = 4;
  s.decoy_targets = 12;
  s.internal_hosts = 2000;
  s.victim_noise_fraction = 0.03;
  // Slower intrusions over a longer capture: stages hours apart.
  s.duration = 2 * 86400.0;
  for (auto& t : s.templates) {
    for (auto& st : t.steps) {
      st.delay_min *= 4.0;
      st.delay_max *= 4.0;
    }
  }
  s.addresses.internal_base = "172.16.0.0";
  s.addresses.attacker_base = "45.0.0.0";
  s.addresses.noise_base = "185.0.0.0";
  s.addresses.internal_asn = 64700;
  s.addresses.attacker_asn_base = 39000;
  s.addresses.noise_asn_base = 9000;
  return s;
}

void ScenarioSpec::validate(const StageVocabulary& vocab) const {
  auto check = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) fail(ErrorKind::validation, msg, field);
  };
  auto check_stage = [&](const StageId& stage, const char* field) {
    check(vocab.contains(stage), field, "stage '" + stage + "' is not in the vocabulary");
    check(find_pool(stage) != nullptr, field, "no synthetic signatures for stage '" + stage + "'");
  };
  check(std::isfinite(start_time) && start_time >= 0.0, "start_time", "start_time must be >= 0");
  check(duration > 0.0, "duration", "duration must be > 0");
  check(n_attackers >= 0, "n_attackers", "n_attackers must be >= 0");
  check(n_attackers == 0 || !templates.empty(), "templates", "campaigns need at least one template");
  for (const auto& t : templates) {
    check(!t.steps.empty(), "templates", "template '" + t.name + "' has no steps");
    check(t.steps.back().truth_heat == 3, "templates", "template '" + t.name + "' must end in a heat-3 objective");
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& s = t.steps[i];
      check_stage(s.stage, "templates");
      check(s.truth_heat >= 0 && s.truth_heat <= 3, "templates", "truth heat must be in 0..3");
      if (i > 0) check(s.delay_min > 0.0 && s.delay_max >= s.delay_min, "templates", "step delays must be > 0");
      check(s.alerts_min >= 1 && s.alerts_max >= s.alerts_min, "templates", "step alert counts must be >= 1");
      check(s.spread_seconds > 0.0, "templates", "step spread must be > 0");
      check(s.extra_targets >= 0, "templates", "extra_targets must be >= 0");
    }
    check(total_max_delay(t) < 0.9 * duration, "duration", "duration too short for template '" + t.name + "'");
  }
  check(noise_rate >= 0.0 && std::isfinite(noise_rate), "noise_rate", "noise_rate must be >= 0");
  check(noise_burst_mean >= 1.0, "noise_burst_mean", "noise_burst_mean must be >= 1");
  check(noise_asns >= 1 && noise_asns <= 255, "noise_asns", "noise_asns must be in 1..255");
  check(noise_sources >= 1 && noise_sources <= noise_asns * 250, "noise_sources",
        "noise_sources must be in 1..250 per noise ASN");
  check(internal_hosts >= 10 && internal_hosts <= 60000, "internal_hosts", "internal_hosts must be in 10..60000");
  check(attacker_ips_per_campaign >= 1 && attacker_ips_per_campaign <= 200, "attacker_ips_per_campaign",
        "attacker_ips_per_campaign must be in 1..200");
  check(n_attackers <= 200, "n_attackers", "at most 200 campaigns");
  check(decoy_targets >= 0, "decoy_targets", "decoy_targets must be >= 0");
  check(distractions_per_campaign >= 0, "distractions_per_campaign", "distractions_per_campaign must be >= 0");
  check(victim_noise_fraction >= 0.0 && victim_noise_fraction <= 1.0, "victim_noise_fraction",
        "victim_noise_fraction must be in [0, 1]");
  check(signatures_per_stage >= 1 && signatures_per_stage <= 50, "signatures_per_stage",
        "signatures_per_stage must be in 1..50");
  double weight = 0.0;
  for (const auto& [stage, w] : noise_stage_weights) {
    check_stage(stage, "noise_stage_weights");
    check(w >= 0.0 && std::isfinite(w), "noise_stage_weights", "noise weights must be >= 0");
    weight += w;
  }
  check(noise_rate == 0.0 || weight > 0.0, "noise_stage_weights", "noise needs a positive stage weight");
  ipv4_value(addresses.internal_base, "addresses");
  ipv4_value(addresses.attacker_base, "addresses");
  ipv4_value(addresses.noise_base, "addresses");
}

nlohmann::json ScenarioSpec::to_json() const {
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : templates) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : t.steps) {
      steps.push_back({{"stage", s.stage},
                       {"truth_heat", s.truth_heat},
                       {"flow", flow_name(s.flow)},
                       {"delay_min", s.delay_min},
                       {"delay_max", s.delay_max},
                       {"alerts_min", s.alerts_min},
                       {"alerts_max", s.alerts_max},
                       {"spread_seconds", s.spread_seconds},
                       {"extra_targets", s.extra_targets},
                       {"ports", s.ports}});
    }
    tj.push_back({{"name", t.name}, {"steps", std::move(steps)}});
  }
  return {{"seed", seed},
          {"start_time", start_time},
          {"duration", duration},
          {"n_attackers", n_attackers},
          {"templates", std::move(tj)},
          {"noise_rate", noise_rate},
          {"noise_burst_mean", noise_burst_mean},
          {"noise_sources", noise_sources},
          {"noise_asns", noise_asns},
          {"internal_hosts", internal_hosts},
          {"attacker_ips_per_campaign", attacker_ips_per_campaign},
          {"decoy_targets", decoy_targets},
          {"distractions_per_campaign", distractions_per_campaign},
          {"victim_noise_fraction", victim_noise_fraction},
          {"noise_stage_weights", noise_stage_weights},
          {"signatures_per_stage", signatures_per_stage},
          {"addresses",
           {{"internal_base", addresses.internal_base},
            {"attacker_base", addresses.attacker_base},
            {"noise_base", addresses.noise_base},
            {"internal_asn", addresses.internal_asn},
            {"attacker_asn_base", addresses.attacker_asn_base},
            {"noise_asn_base", addresses.noise_asn_base}}}};
}

ScenarioSpec ScenarioSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::validation, "scenario spec must be a JSON object");
  try {
    ScenarioSpec s = j.value("family", std::string("desk")) == "transfer" ? transfer_family(j.value("seed", 1ULL))
                                                                           : desk_scale(j.value("seed", 1ULL));
    s.start_time = j.value("start_time", s.start_time);
    s.duration = j.value("duration", s.duration);
    s.n_attackers = j.value("n_attackers", s.n_attackers);
    if (auto it = j.find("templates"); it != j.end()) {
      s.templates.clear();
      for (const auto& tj : *it) {
        CampaignTemplate t;
        t.name = tj.value("name", std::string("campaign"));
        for (const auto& sj : tj.at("steps")) {
          StepTemplate st;
          st.stage = sj.at("stage").get<std::string>();
          st.truth_heat = sj.at("truth_heat").get<int>();
          st.flow = parse_flow(sj.value("flow", std::string("attacker_to_victim")));
          st.delay_min = sj.value("delay_min", st.delay_min);
          st.delay_max = sj.value("delay_max", st.delay_max);
          st.alerts_min = sj.value("alerts_min", st.alerts_min);
          st.alerts_max = sj.value("alerts_max", st.alerts_max);
          st.spread_seconds = sj.value("spread_seconds", st.spread_seconds);
          st.extra_targets = sj.value("extra_targets", st.extra_targets);
          st.ports = sj.value("ports", st.ports);
          t.steps.push_back(std::move(st));
        }
        s.templates.push_back(std::move(t));
      }
    }
    s.noise_rate = j.value("noise_rate", s.noise_rate);
    s.noise_burst_mean = j.value("noise_burst_mean", s.noise_burst_mean);
    s.noise_sources = j.value("noise_sources", s.noise_sources);
    s.noise_asns = j.value("noise_asns", s.noise_asns);
    s.internal_hosts = j.value("internal_hosts", s.internal_hosts);
    s.attacker_ips_per_campaign = j.value("attacker_ips_per_campaign", s.attacker_ips_per_campaign);
    s.decoy_targets = j.value("decoy_targets", s.decoy_targets);
    s.distractions_per_campaign = j.value("distractions_per_campaign", s.distractions_per_campaign);
    s.victim_noise_fraction = j.value("victim_noise_fraction", s.victim_noise_fraction);
    if (auto it = j.find("noise_stage_weights"); it != j.end()) {
      s.noise_stage_weights = it->get<std::map<StageId, double>>();
    }
    s.signatures_per_stage = j.value("signatures_per_stage", s.signatures_per_stage);
    if (auto a = j.find("addresses"); a != j.end()) {
      s.addresses.internal_base = a->value("internal_base", s.addresses.internal_base);
      s.addresses.attacker_base = a->value("attacker_base", s.addresses.attacker_base);
      s.addresses.noise_base = a->value("noise_base", s.addresses.noise_base);
      s.addresses.internal_asn = a->value("internal_asn", s.addresses.internal_asn);
      s.addresses.attacker_asn_base = a->value("attacker_asn_base", s.addresses.attacker_asn_base);
      s.addresses.noise_asn_base = a->value("noise_asn_base", s.addresses.noise_asn_base);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("malformed scenario spec: ") + e.what());
  }
}

Scenario generate(const ScenarioSpec& spec, const StageVocabulary& vocab) {
  spec.validate(vocab);
  std::mt19937_64 rng(spec.seed);
  const StageMapping mapping = default_mapping(vocab);

  std::map<StageId, std::vector<Signature>> signatures;
  for (std::size_t i = 0; i < signature_pools().size(); ++i) {
    const auto& pool = signature_pools()[i];
    if (!vocab.contains(pool.stage)) continue;
    auto sigs = make_signatures(pool, i, spec.signatures_per_stage);
    for (const auto& s : sigs) {
      if (map_signature(s.text, s.id, s.category, mapping) != pool.stage) {
        fail(ErrorKind::internal, "synthetic signature '" + s.text + "' does not map to " + pool.stage);
      }
    }
    signatures.emplace(pool.stage, std::move(sigs));
  }

  const std::uint32_t internal_base = ipv4_value(spec.addresses.internal_base, "addresses");
  const std::uint32_t attacker_base = ipv4_value(spec.addresses.attacker_base, "addresses");
  const std::uint32_t noise_base = ipv4_value(spec.addresses.noise_base, "addresses");

  Scenario out;
  out.asn_prefixes.emplace_back(ipv4_text(internal_base & 0xffff0000u) + "/16", spec.addresses.internal_asn);

  std::vector<std::string> internal;
  for (int i = 0; i < spec.internal_hosts; ++i) {
    const std::uint32_t off = static_cast<std::uint32_t>(i);
    internal.push_back(ipv4_text((internal_base & 0xffff0000u) + ((off / 250 + 1) << 8) + off % 250 + 1));
  }
  std::vector<std::string> noise_ips;
  for (int a = 0; a < spec.noise_asns; ++a) {
    out.asn_prefixes.emplace_back(ipv4_text(noise_base + (static_cast<std::uint32_t>(a) << 8)) + "/24",
                                  spec.addresses.noise_asn_base + a);
  }
  for (int j = 0; j < spec.noise_sources; ++j) {
    const auto asn = static_cast<std::uint32_t>(j % spec.noise_asns);
    noise_ips.push_back(ipv4_text(noise_base + (asn << 8) + static_cast<std::uint32_t>(j / spec.noise_asns) + 1));
  }

  // A tenth of the internal hosts are servers that attract most noise.
  std::vector<std::size_t> host_order(internal.size());
  std::iota(host_order.begin(), host_order.end(), 0);
  std::shuffle(host_order.begin(), host_order.end(), rng);
  const std::size_t servers = std::max<std::size_t>(1, internal.size() / 10);

  std::vector<std::size_t> victim_hosts(host_order.begin(), host_order.begin() + spec.n_attackers);
  std::vector<Draft> drafts;

  auto emit = [&](double t, const std::string& src, const std::string& dst, const Signature& sig,
                  std::optional<int> port, const StageId& stage, std::optional<int> campaign, int heat, int step_no) {
    Draft d;
    d.alert.timestamp = quantize_timestamp(t);
    d.alert.src_ip = src;
    d.alert.dst_ip = dst;
    d.alert.dst_port = port;
    d.alert.signature = sig.text;
    d.alert.signature_id = sig.id;
    d.alert.category = sig.category;
    d.alert.severity = sig.severity;
    d.alert.stage = stage;
    d.truth.campaign_id = campaign;
    d.truth.stage = stage;
    d.truth.truth_heat = heat;
    d.truth.step = step_no;
    drafts.push_back(std::move(d));
  };
  auto port_for = [&](const StageId& stage, const std::vector<int>& preferred) -> std::optional<int> {
    const int p = preferred.empty() ? pick(rng, find_pool(stage)->ports) : pick(rng, preferred);
    if (p == 0) return std::nullopt;
    return p;
  };
  auto other_hosts = [&](std::size_t count, const std::set<std::size_t>& exclude) {
    std::vector<std::size_t> hosts;
    while (hosts.size() < count && hosts.size() + exclude.size() < internal.size()) {
      const std::size_t h = std::uniform_int_distribution<std::size_t>(0, internal.size() - 1)(rng);
      if (exclude.count(h) || std::find(hosts.begin(), hosts.end(), h) != hosts.end()) continue;
      hosts.push_back(h);
    }
    return hosts;
  };

  const std::set<std::size_t> victim_set(victim_hosts.begin(), victim_hosts.end());
  for (int c = 0; c < spec.n_attackers; ++c) {
    const CampaignTemplate& tmpl = spec.templates[static_cast<std::size_t>(c) % spec.templates.size()];
    PlantedCampaign planted;
    planted.campaign_id = c;
    planted.template_name = tmpl.name;
    const std::uint32_t prefix = attacker_base + (static_cast<std::uint32_t>(c) << 8);
    out.asn_prefixes.emplace_back(ipv4_text(prefix) + "/24", spec.addresses.attacker_asn_base + c);
    for (int k = 0; k < spec.attacker_ips_per_campaign; ++k) {
      planted.attacker_ips.push_back(ipv4_text(prefix + 10 + static_cast<std::uint32_t>(k)));
    }
    const std::size_t victim = victim_hosts[c];
    planted.victim_ip = internal[victim];

    const double earliest = spec.start_time + 0.05 * spec.duration;
    const double latest = spec.start_time + 0.95 * spec.duration - total_max_delay(tmpl);
    double t = uniform(rng, earliest, std::max(earliest, latest));
    std::size_t ioc_draft = 0;
    for (std::size_t s = 0; s < tmpl.steps.size(); ++s) {
      const StepTemplate& st = tmpl.steps[s];
      if (s > 0) t += uniform(rng, st.delay_min, st.delay_max);
      const auto& pool = signatures.at(st.stage);
      const Signature& primary = pick(rng, pool);
      std::vector<std::size_t> targets{victim};
      if (st.flow == Flow::victim_to_internal) targets = other_hosts(1 + st.extra_targets, victim_set);
      else if (st.extra_targets > 0) {
        const auto extra = other_hosts(st.extra_targets, victim_set);
        targets.insert(targets.end(), extra.begin(), extra.end());
      }
      const bool objective = s + 1 == tmpl.steps.size();
      if (st.flow == Flow::attacker_to_victim && !objective) {
        const auto decoys = other_hosts(static_cast<std::size_t>(spec.decoy_targets), victim_set);
        targets.insert(targets.end(), decoys.begin(), decoys.end());
      }

      const int n = uniform_int(rng, st.alerts_min, st.alerts_max);
      std::vector<double> times(n);
      for (auto& x : times) x = t + uniform(rng, 0.0, st.spread_seconds);
      std::sort(times.begin(), times.end());
      for (int i = 0; i < n; ++i) {
        // The objective is carried out from a single handler address.
        const std::string& attacker = objective ? planted.attacker_ips.front() : pick(rng, planted.attacker_ips);
        // The first alert of a step always involves the victim itself.
        const std::size_t target = i == 0 || std::uniform_real_distribution<>(0, 1)(rng) < 0.5 ? targets.front()
                                                                                                : pick(rng, targets);
        const Signature& sig = std::uniform_real_distribution<>(0, 1)(rng) < 0.8 ? primary : pick(rng, pool);
        std::string src, dst;
        switch (st.flow) {
          case Flow::attacker_to_victim: src = attacker; dst = internal[target]; break;
          case Flow::victim_to_attacker: src = planted.victim_ip; dst = attacker; break;
          case Flow::victim_to_internal: src = planted.victim_ip; dst = internal[target]; break;
        }
        if (objective && i == 0) ioc_draft = drafts.size();
        emit(times[i], src, dst, sig, port_for(st.stage, st.ports), st.stage, c, st.truth_heat, static_cast<int>(s));
      }
    }
    // The IoC alert is identified after ids are assigned.
    planted.ioc_alert_id = std::to_string(ioc_draft);
    out.campaigns.push_back(std::move(planted));

    for (int d = 0; d < spec.distractions_per_campaign; ++d) {
      const auto& pool = signatures.at("discovery");
      const Signature& sig = pick(rng, pool);
      const auto hosts = other_hosts(1 + uniform_int(rng, 0, 3), victim_set);
      const double start = uniform(rng, spec.start_time, spec.start_time + spec.duration - 600.0);
      const int n = uniform_int(rng, 10, 30);
      for (int i = 0; i < n; ++i) {
        emit(start + uniform(rng, 0.0, 600.0), pick(rng, out.campaigns.back().attacker_ips),
             internal[pick(rng, hosts)], sig, port_for("discovery", {}), "discovery", std::nullopt, 0, -1);
      }
    }
  }

  if (spec.noise_rate > 0.0) {
    std::vector<StageId> stages;
    std::vector<double> weights;
    for (const auto& [stage, w] : spec.noise_stage_weights) {
      stages.push_back(stage);
      weights.push_back(w);
    }
    std::discrete_distribution<std::size_t> stage_dist(weights.begin(), weights.end());
    const double expected_bursts = spec.noise_rate * spec.duration / spec.noise_burst_mean;
    const auto bursts = std::poisson_distribution<long long>(expected_bursts)(rng);
    std::poisson_distribution<int> extra_alerts(spec.noise_burst_mean - 1.0);
    for (long long b = 0; b < bursts; ++b) {
      const StageId& stage = stages[stage_dist(rng)];
      const Signature& sig = pick(rng, signatures.at(stage));
      const std::string& src = pick(rng, noise_ips);
      std::size_t target;
      if (!victim_hosts.empty() && uniform(rng, 0.0, 1.0) < spec.victim_noise_fraction) {
        target = pick(rng, victim_hosts);
      } else if (uniform(rng, 0.0, 1.0) < 0.5) {
        target = host_order[std::uniform_int_distribution<std::size_t>(0, servers - 1)(rng)];
      } else {
        target = std::uniform_int_distribution<std::size_t>(0, internal.size() - 1)(rng);
      }
      const int n = 1 + (spec.noise_burst_mean > 1.0 ? extra_alerts(rng) : 0);
      const double spread = uniform(rng, 60.0, 900.0);
      const double start = uniform(rng, spec.start_time, spec.start_time + spec.duration - spread);
      const auto port = port_for(stage, {});
      for (int i = 0; i < n; ++i) {
        emit(start + uniform(rng, 0.0, spread), src, internal[target], sig, port, stage, std::nullopt, 0, -1);
      }
    }
  }

  std::vector<std::size_t> order(drafts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return drafts[a].alert.timestamp < drafts[b].alert.timestamp; });
  std::vector<std::string> id_of(drafts.size());
  out.alerts.reserve(drafts.size());
  out.truth.reserve(drafts.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "a%07zu", rank);
    Draft& d = drafts[order[rank]];
    id_of[order[rank]] = buf;
    d.alert.id = buf;
    d.truth.alert_id = buf;
    out.alerts.push_back(std::move(d.alert));
    out.truth.push_back(std::move(d.truth));
  }
  for (auto& c : out.campaigns) c.ioc_alert_id = id_of[std::stoul(c.ioc_alert_id)];
  return out;
}

void Scenario::write_eve(std::ostream& out) const {
  for (const auto& a : alerts) out << to_eve_line(a) << '\n';
}

void Scenario::write_truth(std::ostream& out) const {
  for (const auto& t : truth) {
    nlohmann::ordered_json j;
    j["alert_id"] = t.alert_id;
    j["campaign_id"] = t.campaign_id ? nlohmann::ordered_json(*t.campaign_id) : nlohmann::ordered_json(nullptr);
    j["stage"] = t.stage;
    j["truth_heat"] = t.truth_heat;
    j["step"] = t.step;
    out << j.dump() << '\n';
  }
}

void Scenario::write_asn_csv(std::ostream& out) const {
  out << "cidr,asn\n";
  for (const auto& [cidr, asn] : asn_prefixes) out << cidr << ',' << asn << '\n';
}

std::vector<TruthRecord> read_truth_jsonl(std::istream& in) {
  std::vector<TruthRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw std::runtime_error("invalid JSON");
      TruthRecord r;
      r.alert_id = j.at("alert_id").get<std::string>();
      if (!j.at("campaign_id").is_null()) r.campaign_id = j.at("campaign_id").get<int>();
      r.stage = j.at("stage").get<std::string>();
      r.truth_heat = j.at("truth_heat").get<int>();
      r.step = j.value("step", -1);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      fail(ErrorKind::data, "truth line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

TruthIndex::TruthIndex(const std::vector<TruthRecord>& truth) {
  for (const auto& t : truth) by_alert_.emplace(t.alert_id, t);
}

const TruthRecord* TruthIndex::find(const std::string& alert_id) const {
  auto it = by_alert_.find(alert_id);
  return it == by_alert_.end() ? nullptr : &it->second;
}

EpisodeTruth TruthIndex::episode_truth(const Episode& episode) const {
  // Majority vote over (campaign, step); ties go to the higher heat.
  std::map<std::pair<int, int>, std::pair<std::size_t, int>> votes;
  for (const auto& id : episode.alert_ids) {
    const TruthRecord* t = find(id);
    if (t == nullptr) continue;
    auto& v = votes[{t->campaign_id.value_or(-1), t->step}];
    ++v.first;
    v.second = std::max(v.second, t->truth_heat);
  }
  EpisodeTruth best;
  std::size_t best_count = 0;
  for (const auto& [key, v] : votes) {
    if (v.first > best_count || (v.first == best_count && v.second > best.truth_heat)) {
      best_count = v.first;
      best.campaign_id = key.first < 0 ? std::nullopt : std::optional<int>(key.first);
      best.step = key.second;
      best.truth_heat = v.second;
    }
  }
  return best;
}

std::vector<LabeledPair> simulate_analyst_labels(const Corpus& corpus, const TruthIndex& truth,
                                                 const std::string& ioc_alert_id, double lookback,
                                                 int random_negatives, std::uint64_t seed,
                                                 const std::string& annotator) {
  const Ioc ioc = resolve_ioc(ioc_alert_id, corpus);
  const std::size_t critical_index = *corpus.store.index_of(ioc.critical_episode_id);
  const Episode& critical = corpus.store[critical_index];
  const auto campaign = truth.episode_truth(critical).campaign_id;
  const auto window = prior_window(corpus.store, critical_index, lookback);

  std::vector<std::string> crit_addrs = critical.sources;
  crit_addrs.insert(crit_addrs.end(), critical.targets.begin(), critical.targets.end());
  std::sort(crit_addrs.begin(), crit_addrs.end());
  crit_addrs.erase(std::unique(crit_addrs.begin(), crit_addrs.end()), crit_addrs.end());

  auto heat_of = [&](const Episode& e) {
    const auto et = truth.episode_truth(e);
    return campaign && et.campaign_id == campaign ? et.truth_heat : 0;
  };
  std::vector<bool> chosen(window.size(), false);
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const Episode& e = corpus.store[window[i]];
    const auto et = truth.episode_truth(e);
    const bool same_campaign = campaign && et.campaign_id == campaign;
    const bool shares_address =
        intersection_size(e.sources, crit_addrs) > 0 || intersection_size(e.targets, crit_addrs) > 0;
    if (same_campaign || shares_address) chosen[i] = true;
    else rest.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (std::size_t k = 0; k < rest.size() && k < static_cast<std::size_t>(std::max(0, random_negatives)); ++k) {
    chosen[rest[k]] = true;
  }
  std::vector<LabeledPair> labels;
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (!chosen[i]) continue;
    const Episode& e = corpus.store[window[i]];
    labels.push_back({critical.episode_id, e.episode_id, heat_of(e), annotator, critical.peak_time});
  }
  return labels;
}

}  // namespace heat
