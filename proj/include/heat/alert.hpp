#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "heat/vocabulary.hpp"

namespace heat {

/// One normalized IDS alert.
struct Alert {
  std::string id;
  double timestamp = 0.0;  // UTC epoch seconds
  std::string src_ip;
  std::string dst_ip;
  std::optional<int> dst_port;
  std::string signature;
  std::int64_t signature_id = 0;
  std::string category;
  int severity = 1;
  StageId stage;

  friend bool operator==(const Alert&, const Alert&) = default;
};

enum class MatchKind {
  signature_id,        // exact numeric id
  signature,           // exact signature text
  signature_contains,  // substring of signature text
  category,            // exact category text
};

struct MappingRule {
  MatchKind kind = MatchKind::category;
  std::string value;  // numeric ids kept as their decimal text
  StageId stage;
};

/// First-match rule list from alert signature/category to stage.
class StageMapping {
 public:
  StageMapping() = default;
  /// Throws if a rule names a stage missing from `vocab`.
  StageMapping(std::vector<MappingRule> rules, const StageVocabulary& vocab);

  const std::vector<MappingRule>& rules() const noexcept { return rules_; }

  nlohmann::json to_json() const;
  static StageMapping from_json(const nlohmann::json& j, const StageVocabulary& vocab);

 private:
  std::vector<MappingRule> rules_;
};

/// Suricata classtype → default stage, plus a few signature-prefix rules.
StageMapping default_mapping(const StageVocabulary& vocab);

StageMapping load_mapping(const std::string& path, const StageVocabulary& vocab);

/// Stage of the first rule that matches; `unmapped` when none does.
StageId map_signature(const std::string& signature, std::int64_t signature_id,
                      const std::string& category, const StageMapping& mapping);

struct IngestStats {
  std::size_t lines = 0;
  std::size_t alerts = 0;
  std::size_t skipped_non_alert = 0;
  std::size_t skipped_malformed = 0;
  std::size_t unmapped = 0;
  std::size_t renamed_duplicate_ids = 0;

  nlohmann::json to_json() const;
};

struct IngestResult {
  std::vector<Alert> alerts;
  IngestStats stats;
};

/// Parses newline-delimited Suricata EVE JSON. Non-alert events and
/// malformed lines are counted and skipped. Alert ids come from an
/// optional top-level "alert_id" field, otherwise "L<line number>".
IngestResult parse_eve_stream(std::istream& input, const StageMapping& mapping,
                              const StageVocabulary& vocab);

IngestResult parse_eve_file(const std::string& path, const StageMapping& mapping,
                            const StageVocabulary& vocab);

/// Suricata-style EVE alert line for `alert` (used by the scenario generator).
std::string to_eve_line(const Alert& alert);

}  // namespace heat
