#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace heat {

/// Attack-intent stage name, e.g. "discovery". Stored by name everywhere;
/// the vocabulary gives each one a dense index for one-hot and entropy work.
using StageId = std::string;

inline constexpr std::string_view kUnmappedStage = "unmapped";

struct StageInfo {
  StageId stage_id;
  std::string display;
  double smoothing_seconds = 300.0;
};

/// Ordered stage alphabet. Always contains `unmapped`.
class StageVocabulary {
 public:
  StageVocabulary() = default;
  /// Validates: non-empty, unique ids, positive durations, `unmapped` present.
  explicit StageVocabulary(std::vector<StageInfo> stages);

  std::size_t size() const noexcept { return stages_.size(); }
  const std::vector<StageInfo>& stages() const noexcept { return stages_; }
  const StageInfo& at(std::size_t index) const { return stages_.at(index); }

  std::optional<std::size_t> index_of(std::string_view stage) const;
  /// Throws validation error for unknown stages.
  std::size_t require_index(std::string_view stage) const;
  bool contains(std::string_view stage) const { return index_of(stage).has_value(); }

  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

  nlohmann::json to_json() const;
  static StageVocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const StageVocabulary& a, const StageVocabulary& b) {
    return a.fingerprint_ == b.fingerprint_;
  }

 private:
  std::vector<StageInfo> stages_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t fingerprint_ = 0;
};

/// Eight macro stages plus `unmapped`, with the default smoothing durations.
StageVocabulary default_vocabulary();

StageVocabulary load_vocabulary(const std::string& path);

}  // namespace heat
