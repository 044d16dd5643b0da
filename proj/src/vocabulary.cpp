#include "heat/vocabulary.hpp"

#include <cmath>
#include <fstream>

#include "heat/error.hpp"
#include "heat/hashing.hpp"

namespace heat {

StageVocabulary::StageVocabulary(std::vector<StageInfo> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) fail(ErrorKind::validation, "stage vocabulary is empty", "stages");
  std::uint64_t h = fnv1a("heat-vocabulary-v1");
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const auto& s = stages_[i];
    if (s.stage_id.empty()) fail(ErrorKind::validation, "empty stage_id", "stage_id");
    if (!(s.smoothing_seconds > 0.0) || !std::isfinite(s.smoothing_seconds)) {
      fail(ErrorKind::validation, "smoothing_seconds must be > 0 for stage " + s.stage_id,
           "smoothing_seconds");
    }
    if (!index_.emplace(s.stage_id, i).second) {
      fail(ErrorKind::validation, "duplicate stage_id " + s.stage_id, "stage_id");
    }
    h = fnv1a(s.stage_id, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  if (!index_.contains(std::string(kUnmappedStage))) {
    fail(ErrorKind::validation, "vocabulary must contain the 'unmapped' stage", "stages");
  }
  fingerprint_ = h;
}

std::optional<std::size_t> StageVocabulary::index_of(std::string_view stage) const {
  auto it = index_.find(std::string(stage));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t StageVocabulary::require_index(std::string_view stage) const {
  auto idx = index_of(stage);
  if (!idx) fail(ErrorKind::validation, "stage '" + std::string(stage) + "' is not in the vocabulary", "stage");
  return *idx;
}

nlohmann::json StageVocabulary::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& s : stages_) {
    arr.push_back({{"stage_id", s.stage_id}, {"display", s.display}, {"smoothing_seconds", s.smoothing_seconds}});
  }
  return arr;
}

StageVocabulary StageVocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array()) fail(ErrorKind::data, "stage vocabulary must be a JSON list");
  std::vector<StageInfo> stages;
  for (const auto& item : j) {
    StageInfo s;
    s.stage_id = item.at("stage_id").get<std::string>();
    s.display = item.value("display", s.stage_id);
    s.smoothing_seconds = item.value("smoothing_seconds", 300.0);
    stages.push_back(std::move(s));
  }
  return StageVocabulary(std::move(stages));
}

StageVocabulary default_vocabulary() {
  return StageVocabulary({
      {"discovery", "Discovery", 300.0},
      {"privilege_escalation", "Privilege Escalation", 120.0},
      {"exploitation", "Exploitation", 120.0},
      {"lateral_movement", "Lateral Movement", 120.0},
      {"command_and_control", "Command and Control", 600.0},
      {"exfiltration", "Exfiltration", 300.0},
      {"denial_of_service", "Denial of Service", 120.0},
      {"benign", "Benign", 300.0},
      {"unmapped", "Unmapped", 300.0},
  });
}

StageVocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "cannot open vocabulary file " + path);
  try {
    return StageVocabulary::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, "invalid vocabulary file " + path + ": " + e.what());
  }
}

}  // namespace heat
