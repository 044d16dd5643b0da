#include "heat/alert.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <unordered_set>

#include "heat/error.hpp"
#include "heat/timestamp.hpp"

namespace heat {
namespace {

MatchKind parse_match_kind(const std::string& text) {
  if (text == "signature_id") return MatchKind::signature_id;
  if (text == "signature") return MatchKind::signature;
  if (text == "signature_contains") return MatchKind::signature_contains;
  if (text == "category") return MatchKind::category;
  fail(ErrorKind::validation, "unknown match kind '" + text + "'", "kind");
}

const char* match_kind_name(MatchKind kind) {
  switch (kind) {
    case MatchKind::signature_id: return "signature_id";
    case MatchKind::signature: return "signature";
    case MatchKind::signature_contains: return "signature_contains";
    case MatchKind::category: return "category";
  }
  return "category";
}

std::optional<std::int64_t> parse_i64(const std::string& s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

bool rule_matches(const MappingRule& rule, const std::string& signature, std::int64_t signature_id,
                  const std::string& category) {
  switch (rule.kind) {
    case MatchKind::signature_id: {
      auto id = parse_i64(rule.value);
      return id && *id == signature_id;
    }
    case MatchKind::signature: return signature == rule.value;
    case MatchKind::signature_contains: return signature.find(rule.value) != std::string::npos;
    case MatchKind::category: return category == rule.value;
  }
  return false;
}

}  // namespace

StageMapping::StageMapping(std::vector<MappingRule> rules, const StageVocabulary& vocab) : rules_(std::move(rules)) {
  for (const auto& r : rules_) {
    if (!vocab.contains(r.stage)) {
      fail(ErrorKind::validation, "mapping rule targets unknown stage '" + r.stage + "'", "stage");
    }
    if (r.kind == MatchKind::signature_id && !parse_i64(r.value)) {
      fail(ErrorKind::validation, "signature_id rule value '" + r.value + "' is not an integer", "value");
    }
  }
}

nlohmann::json StageMapping::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& r : rules_) {
    nlohmann::json value = r.value;
    if (r.kind == MatchKind::signature_id) value = *parse_i64(r.value);
    arr.push_back({{"match", {{"kind", match_kind_name(r.kind)}, {"value", value}}}, {"stage", r.stage}});
  }
  return arr;
}

StageMapping StageMapping::from_json(const nlohmann::json& j, const StageVocabulary& vocab) {
  if (!j.is_array()) fail(ErrorKind::data, "stage mapping must be a JSON list");
  std::vector<MappingRule> rules;
  for (const auto& item : j) {
    MappingRule r;
    const auto& match = item.at("match");
    r.kind = parse_match_kind(match.at("kind").get<std::string>());
    const auto& value = match.at("value");
    r.value = value.is_string() ? value.get<std::string>() : value.dump();
    r.stage = item.at("stage").get<std::string>();
    rules.push_back(std::move(r));
  }
  return StageMapping(std::move(rules), vocab);
}

StageMapping default_mapping(const StageVocabulary& vocab) {
  using K = MatchKind;
  std::vector<MappingRule> rules = {
      {K::signature_contains, "ET SCAN", "discovery"},
      {K::signature_contains, "ET LATERAL", "lateral_movement"},
      {K::signature_contains, "PsExec", "lateral_movement"},
      {K::signature_contains, "ET TROJAN", "command_and_control"},
      {K::signature_contains, "ET MALWARE", "command_and_control"},
      {K::category, "Detection of a Network Scan", "discovery"},
      {K::category, "Attempted Information Leak", "discovery"},
      {K::category, "Device Retrieving External IP Address Detected", "discovery"},
      {K::category, "Web Application Attack", "exploitation"},
      {K::category, "Executable code was detected", "exploitation"},
      {K::category, "Attempt to login by a default username and password", "exploitation"},
      {K::category, "Misc Attack", "exploitation"},
      {K::category, "Attempted User Privilege Gain", "privilege_escalation"},
      {K::category, "Unsuccessful User Privilege Gain", "privilege_escalation"},
      {K::category, "Successful User Privilege Gain", "privilege_escalation"},
      {K::category, "Attempted Administrator Privilege Gain", "privilege_escalation"},
      {K::category, "Successful Administrator Privilege Gain", "privilege_escalation"},
      {K::category, "A Network Trojan was detected", "command_and_control"},
      {K::category, "Malware Command and Control Activity Detected", "command_and_control"},
      {K::category, "Domain Observed Used for C2 Detected", "command_and_control"},
      {K::category, "Information Leak", "exfiltration"},
      {K::category, "Large Scale Information Leak", "exfiltration"},
      {K::category, "Detection of a Denial of Service Attack", "denial_of_service"},
      {K::category, "Attempted Denial of Service", "denial_of_service"},
      {K::category, "Denial of Service", "denial_of_service"},
      {K::category, "Not Suspicious Traffic", "benign"},
      {K::category, "Generic Protocol Command Decode", "benign"},
      {K::category, "Misc activity", "benign"},
      {K::category, "Unknown Traffic", "benign"},
      {K::category, "Potentially Bad Traffic", "benign"},
      {K::category, "Potential Corporate Privacy Violation", "benign"},
  };
  std::erase_if(rules, [&](const MappingRule& r) { return !vocab.contains(r.stage); });
  return StageMapping(std::move(rules), vocab);
}

StageMapping load_mapping(const std::string& path, const StageVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "cannot open mapping file " + path);
  try {
    return StageMapping::from_json(nlohmann::json::parse(in), vocab);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, "invalid mapping file " + path + ": " + e.what());
  }
}

StageId map_signature(const std::string& signature, std::int64_t signature_id, const std::string& category,
                      const StageMapping& mapping) {
  for (const auto& rule : mapping.rules()) {
    if (rule_matches(rule, signature, signature_id, category)) return rule.stage;
  }
  return StageId(kUnmappedStage);
}

nlohmann::json IngestStats::to_json() const {
  return {{"lines", lines},
          {"alerts", alerts},
          {"skipped_non_alert", skipped_non_alert},
          {"skipped_malformed", skipped_malformed},
          {"unmapped", unmapped},
          {"renamed_duplicate_ids", renamed_duplicate_ids}};
}

namespace {

// Returns nullopt for lines that are not usable alerts; `non_alert` tells why.
std::optional<Alert> parse_alert_line(const std::string& line, bool& non_alert) {
  non_alert = false;
  auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto type = j.find("event_type");
  if (type == j.end() || !type->is_string()) return std::nullopt;
  if (type->get_ref<const std::string&>() != "alert") {
    non_alert = true;
    return std::nullopt;
  }
  try {
    Alert a;
    const auto& ts = j.at("timestamp");
    std::optional<double> t;
    if (ts.is_string()) t = parse_timestamp(ts.get_ref<const std::string&>());
    else if (ts.is_number() && ts.get<double>() >= 0.0) t = ts.get<double>();
    if (!t) return std::nullopt;
    a.timestamp = *t;
    a.src_ip = j.at("src_ip").get<std::string>();
    a.dst_ip = j.at("dest_ip").get<std::string>();
    if (auto p = j.find("dest_port"); p != j.end() && !p->is_null()) {
      const int port = p->get<int>();
      if (port < 0 || port > 65535) return std::nullopt;
      a.dst_port = port;
    }
    const auto& al = j.at("alert");
    a.signature = al.at("signature").get<std::string>();
    a.signature_id = al.at("signature_id").get<std::int64_t>();
    a.category = al.at("category").get<std::string>();
    a.severity = al.at("severity").get<int>();
    if (a.severity < 1) return std::nullopt;
    if (auto id = j.find("alert_id"); id != j.end()) {
      a.id = id->is_string() ? id->get<std::string>() : id->dump();
    }
    return a;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

IngestResult parse_eve_stream(std::istream& input, const StageMapping& mapping, const StageVocabulary& vocab) {
  if (!input.good()) fail(ErrorKind::data, "alert stream is not readable");
  IngestResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(input, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++result.stats.lines;
    bool non_alert = false;
    auto alert = parse_alert_line(line, non_alert);
    if (!alert) {
      ++(non_alert ? result.stats.skipped_non_alert : result.stats.skipped_malformed);
      continue;
    }
    const std::string line_id = "L" + std::to_string(line_no);
    if (alert->id.empty()) alert->id = line_id;
    if (!seen.insert(alert->id).second) {
      alert->id += "~" + line_id;
      seen.insert(alert->id);
      ++result.stats.renamed_duplicate_ids;
    }
    alert->stage = map_signature(alert->signature, alert->signature_id, alert->category, mapping);
    if (!vocab.contains(alert->stage)) fail(ErrorKind::internal, "mapping produced unknown stage " + alert->stage);
    if (alert->stage == kUnmappedStage) ++result.stats.unmapped;
    result.alerts.push_back(std::move(*alert));
  }
  if (input.bad()) fail(ErrorKind::data, "read error in alert stream");
  result.stats.alerts = result.alerts.size();
  return result;
}

IngestResult parse_eve_file(const std::string& path, const StageMapping& mapping, const StageVocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot open alert file " + path);
  return parse_eve_stream(in, mapping, vocab);
}

std::string to_eve_line(const Alert& a) {
  nlohmann::ordered_json j;
  j["timestamp"] = format_timestamp(a.timestamp);
  j["event_type"] = "alert";
  j["alert_id"] = a.id;
  j["src_ip"] = a.src_ip;
  j["dest_ip"] = a.dst_ip;
  if (a.dst_port) j["dest_port"] = *a.dst_port;
  j["proto"] = "TCP";
  j["alert"] = {{"action", "allowed"},
                {"gid", 1},
                {"signature_id", a.signature_id},
                {"rev", 1},
                {"signature", a.signature},
                {"category", a.category},
                {"severity", a.severity}};
  return j.dump();
}

}  // namespace heat
