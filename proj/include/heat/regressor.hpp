#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace heat {

/// Dense row-major design matrix view.
struct MatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
};

struct GbrtParams {
  int n_estimators = 150;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 2;
  double subsample = 1.0;  // row fraction per tree, drawn with the model seed
};

struct MlpParams {
  int hidden1 = 32;
  int hidden2 = 16;
  int epochs = 600;
  double learning_rate = 0.01;
  double l2 = 1e-4;
};

/// Binary regression tree, nodes stored flat; leaves have feature == -1.
struct RegressionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(std::span<const double> x) const;
};

/// Squared-loss gradient boosting over depth-limited regression trees.
class GradientBoostedTrees {
 public:
  GradientBoostedTrees() = default;
  explicit GradientBoostedTrees(GbrtParams params) : params_(params) {}

  void fit(MatrixView x, std::span<const double> y, std::uint64_t seed);
  double predict(std::span<const double> x) const;

  const GbrtParams& params() const noexcept { return params_; }
  std::size_t tree_count() const noexcept { return trees_.size(); }

  nlohmann::json to_json() const;
  static GradientBoostedTrees from_json(const nlohmann::json& j);

 private:
  GbrtParams params_;
  double base_ = 0.0;
  std::vector<RegressionTree> trees_;
};

/// Two-hidden-layer ReLU network trained full-batch with Adam.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpParams params) : params_(params) {}

  void fit(MatrixView x, std::span<const double> y, std::uint64_t seed);
  double predict(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  MlpParams params_;
  std::size_t inputs_ = 0;
  // Layer weights are row-major [out][in].
  std::vector<double> w1_, b1_, w2_, b2_, w3_;
  double b3_ = 0.0;
};

enum class RegressorKind { gbrt, mlp };

RegressorKind parse_regressor_kind(std::string_view text);
const char* to_string(RegressorKind kind);

using Regressor = std::variant<GradientBoostedTrees, Mlp>;

double predict_raw(const Regressor& r, std::span<const double> x);
nlohmann::json regressor_to_json(const Regressor& r);
Regressor regressor_from_json(const nlohmann::json& j);

}  // namespace heat
