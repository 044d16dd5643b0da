#include "heat/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "heat/error.hpp"

namespace heat {

double RegressionTree::predict(std::span<const double> x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Grows one squared-loss tree. `order[f]` lists all rows sorted by feature f;
// node membership is tracked with a per-row node id so each node scan is O(rows).
class TreeBuilder {
 public:
  TreeBuilder(MatrixView x, std::span<const double> target, const std::vector<std::vector<std::size_t>>& order,
              const GbrtParams& params)
      : x_(x), target_(target), order_(order), params_(params), node_of_(x.rows, -1) {}

  RegressionTree build(std::span<const std::size_t> rows) {
    tree_ = {};
    for (std::size_t r : rows) node_of_[r] = 0;
    std::vector<std::size_t> members(rows.begin(), rows.end());
    grow(members, 0);
    for (std::size_t r : rows) node_of_[r] = -1;
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& members, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double sum = 0.0;
    for (std::size_t r : members) sum += target_[r];
    const auto n = static_cast<double>(members.size());
    tree_.nodes[static_cast<std::size_t>(id)].value = sum / n;
    for (std::size_t r : members) node_of_[r] = id;

    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    if (depth >= params_.max_depth || members.size() < 2 * min_leaf) return id;
    const Split best = best_split(id, members.size(), sum);
    if (best.feature < 0 || best.gain <= 1e-12) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : members) {
      (x_.row(r)[static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(r);
    }
    members.clear();
    members.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rr;
    return id;
  }

  Split best_split(int node, std::size_t count, double total) const {
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    const double parent = total * total / static_cast<double>(count);
    const auto features = static_cast<long long>(x_.cols);
    std::vector<Split> per_feature(x_.cols);
#pragma omp parallel for schedule(static) if (count > 256)
    for (long long f = 0; f < features; ++f) {
      Split best;
      best.feature = -1;
      double left_sum = 0.0;
      std::size_t left_n = 0;
      double prev_value = 0.0;
      for (std::size_t r : order_[static_cast<std::size_t>(f)]) {
        if (node_of_[r] != node) continue;
        const double v = x_.row(r)[static_cast<std::size_t>(f)];
        if (left_n >= min_leaf && count - left_n >= min_leaf && v > prev_value) {
          const double right_sum = total - left_sum;
          const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                              right_sum * right_sum / static_cast<double>(count - left_n) - parent;
          if (gain > best.gain) {
            best.feature = static_cast<int>(f);
            best.threshold = prev_value + (v - prev_value) / 2.0;
            best.gain = gain;
          }
        }
        left_sum += target_[r];
        ++left_n;
        prev_value = v;
      }
      per_feature[static_cast<std::size_t>(f)] = best;
    }
    Split best;
    for (const auto& s : per_feature) {
      if (s.feature >= 0 && s.gain > best.gain) best = s;
    }
    return best;
  }

  MatrixView x_;
  std::span<const double> target_;
  const std::vector<std::vector<std::size_t>>& order_;
  const GbrtParams& params_;
  std::vector<int> node_of_;
  RegressionTree tree_;
};

void check_fit_inputs(MatrixView x, std::span<const double> y) {
  if (x.rows == 0 || x.cols == 0 || x.data.size() != x.rows * x.cols || y.size() != x.rows) {
    fail(ErrorKind::validation, "regressor fit: design matrix and targets do not agree");
  }
}

}  // namespace

void GradientBoostedTrees::fit(MatrixView x, std::span<const double> y, std::uint64_t seed) {
  check_fit_inputs(x, y);
  if (params_.n_estimators < 1 || params_.max_depth < 1 || !(params_.learning_rate > 0.0) ||
      !(params_.subsample > 0.0 && params_.subsample <= 1.0)) {
    fail(ErrorKind::validation, "invalid gradient boosting hyperparameters", "hyperparams");
  }
  const std::size_t n = x.rows;
  std::vector<std::vector<std::size_t>> order(x.cols, std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::iota(order[f].begin(), order[f].end(), std::size_t{0});
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](std::size_t a, std::size_t b) { return x.row(a)[f] < x.row(b)[f]; });
  }

  base_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  trees_.clear();
  std::vector<double> fitted(n, base_);
  std::vector<double> residual(n);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(params_.subsample * static_cast<double>(n))));
  std::mt19937_64 rng(seed);
  TreeBuilder builder(x, residual, order, params_);

  for (int t = 0; t < params_.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
    std::span<const std::size_t> sample(rows);
    if (sample_size < n) {
      std::shuffle(rows.begin(), rows.end(), rng);
      sample = std::span<const std::size_t>(rows).first(sample_size);
    }
    trees_.push_back(builder.build(sample));
    for (std::size_t i = 0; i < n; ++i) fitted[i] += params_.learning_rate * trees_.back().predict(x.row(i));
  }
}

double GradientBoostedTrees::predict(std::span<const double> x) const {
  double out = base_;
  for (const auto& t : trees_) out += params_.learning_rate * t.predict(x);
  return out;
}

nlohmann::json GradientBoostedTrees::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  return {{"n_estimators", params_.n_estimators},
          {"learning_rate", params_.learning_rate},
          {"max_depth", params_.max_depth},
          {"min_samples_leaf", params_.min_samples_leaf},
          {"subsample", params_.subsample},
          {"base", base_},
          {"trees", std::move(trees)}};
}

GradientBoostedTrees GradientBoostedTrees::from_json(const nlohmann::json& j) {
  GbrtParams p;
  p.n_estimators = j.at("n_estimators").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.max_depth = j.at("max_depth").get<int>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.subsample = j.at("subsample").get<double>();
  GradientBoostedTrees g(p);
  g.base_ = j.at("base").get<double>();
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    for (const auto& nj : tj) {
      RegressionTree::Node n;
      n.feature = nj.at(0).get<int>();
      n.threshold = nj.at(1).get<double>();
      n.left = nj.at(2).get<int>();
      n.right = nj.at(3).get<int>();
      n.value = nj.at(4).get<double>();
      t.nodes.push_back(n);
    }
    const auto size = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes) {
      if (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
        fail(ErrorKind::data, "corrupt regression tree in model file");
      }
    }
    if (t.nodes.empty()) fail(ErrorKind::data, "empty regression tree in model file");
    g.trees_.push_back(std::move(t));
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

struct Adam {
  std::vector<double> m, v;
  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  void step(std::vector<double>& w, const std::vector<double>& g, double lr, int t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

}  // namespace

void Mlp::fit(MatrixView x, std::span<const double> y, std::uint64_t seed) {
  check_fit_inputs(x, y);
  if (params_.hidden1 < 1 || params_.hidden2 < 1 || params_.epochs < 1 || !(params_.learning_rate > 0.0)) {
    fail(ErrorKind::validation, "invalid MLP hyperparameters", "hyperparams");
  }
  inputs_ = x.cols;
  const auto h1 = static_cast<std::size_t>(params_.hidden1);
  const auto h2 = static_cast<std::size_t>(params_.hidden2);
  std::mt19937_64 rng(seed);
  auto init = [&](std::vector<double>& w, std::size_t fan_in, std::size_t count) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    w.resize(count);
    for (double& v : w) v = dist(rng);
  };
  init(w1_, inputs_, h1 * inputs_);
  init(w2_, h1, h2 * h1);
  init(w3_, h2, h2);
  b1_.assign(h1, 0.0);
  b2_.assign(h2, 0.0);
  b3_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

  Adam a_w1(w1_.size()), a_b1(h1), a_w2(w2_.size()), a_b2(h2), a_w3(h2), a_b3(1);
  std::vector<double> g_w1(w1_.size()), g_b1(h1), g_w2(w2_.size()), g_b2(h2), g_w3(h2), g_b3(1);
  std::vector<double> z1(h1), a1(h1), z2(h2), a2(h2), d2(h2), d1(h1);
  const auto n = static_cast<double>(x.rows);

  for (int epoch = 1; epoch <= params_.epochs; ++epoch) {
    std::fill(g_w1.begin(), g_w1.end(), 0.0);
    std::fill(g_b1.begin(), g_b1.end(), 0.0);
    std::fill(g_w2.begin(), g_w2.end(), 0.0);
    std::fill(g_b2.begin(), g_b2.end(), 0.0);
    std::fill(g_w3.begin(), g_w3.end(), 0.0);
    g_b3[0] = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto in = x.row(r);
      for (std::size_t j = 0; j < h1; ++j) {
        double s = b1_[j];
        for (std::size_t i = 0; i < inputs_; ++i) s += w1_[j * inputs_ + i] * in[i];
        z1[j] = s;
        a1[j] = s > 0.0 ? s : 0.0;
      }
      double out = b3_;
      for (std::size_t k = 0; k < h2; ++k) {
        double s = b2_[k];
        for (std::size_t j = 0; j < h1; ++j) s += w2_[k * h1 + j] * a1[j];
        z2[k] = s;
        a2[k] = s > 0.0 ? s : 0.0;
        out += w3_[k] * a2[k];
      }
      const double err = 2.0 * (out - y[r]) / n;
      g_b3[0] += err;
      for (std::size_t k = 0; k < h2; ++k) {
        g_w3[k] += err * a2[k];
        d2[k] = z2[k] > 0.0 ? err * w3_[k] : 0.0;
        g_b2[k] += d2[k];
      }
      std::fill(d1.begin(), d1.end(), 0.0);
      for (std::size_t k = 0; k < h2; ++k) {
        if (d2[k] == 0.0) continue;
        for (std::size_t j = 0; j < h1; ++j) {
          g_w2[k * h1 + j] += d2[k] * a1[j];
          d1[j] += d2[k] * w2_[k * h1 + j];
        }
      }
      for (std::size_t j = 0; j < h1; ++j) {
        if (z1[j] <= 0.0) continue;
        g_b1[j] += d1[j];
        for (std::size_t i = 0; i < inputs_; ++i) g_w1[j * inputs_ + i] += d1[j] * in[i];
      }
    }
    for (std::size_t i = 0; i < w1_.size(); ++i) g_w1[i] += params_.l2 * w1_[i];
    for (std::size_t i = 0; i < w2_.size(); ++i) g_w2[i] += params_.l2 * w2_[i];
    for (std::size_t i = 0; i < w3_.size(); ++i) g_w3[i] += params_.l2 * w3_[i];
    const double lr = params_.learning_rate;
    a_w1.step(w1_, g_w1, lr, epoch);
    a_b1.step(b1_, g_b1, lr, epoch);
    a_w2.step(w2_, g_w2, lr, epoch);
    a_b2.step(b2_, g_b2, lr, epoch);
    a_w3.step(w3_, g_w3, lr, epoch);
    std::vector<double> b3{b3_};
    a_b3.step(b3, g_b3, lr, epoch);
    b3_ = b3[0];
  }
}

double Mlp::predict(std::span<const double> x) const {
  if (x.size() != inputs_) fail(ErrorKind::validation, "MLP input dimension mismatch");
  const std::size_t h1 = b1_.size(), h2 = b2_.size();
  std::vector<double> a1(h1);
  for (std::size_t j = 0; j < h1; ++j) {
    double s = b1_[j];
    for (std::size_t i = 0; i < inputs_; ++i) s += w1_[j * inputs_ + i] * x[i];
    a1[j] = s > 0.0 ? s : 0.0;
  }
  double out = b3_;
  for (std::size_t k = 0; k < h2; ++k) {
    double s = b2_[k];
    for (std::size_t j = 0; j < h1; ++j) s += w2_[k * h1 + j] * a1[j];
    out += w3_[k] * (s > 0.0 ? s : 0.0);
  }
  return out;
}

nlohmann::json Mlp::to_json() const {
  return {{"hidden1", params_.hidden1}, {"hidden2", params_.hidden2}, {"epochs", params_.epochs},
          {"learning_rate", params_.learning_rate}, {"l2", params_.l2}, {"inputs", inputs_},
          {"w1", w1_}, {"b1", b1_}, {"w2", w2_}, {"b2", b2_}, {"w3", w3_}, {"b3", b3_}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  MlpParams p;
  p.hidden1 = j.at("hidden1").get<int>();
  p.hidden2 = j.at("hidden2").get<int>();
  p.epochs = j.at("epochs").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.l2 = j.at("l2").get<double>();
  Mlp m(p);
  m.inputs_ = j.at("inputs").get<std::size_t>();
  m.w1_ = j.at("w1").get<std::vector<double>>();
  m.b1_ = j.at("b1").get<std::vector<double>>();
  m.w2_ = j.at("w2").get<std::vector<double>>();
  m.b2_ = j.at("b2").get<std::vector<double>>();
  m.w3_ = j.at("w3").get<std::vector<double>>();
  m.b3_ = j.at("b3").get<double>();
  const auto h1 = static_cast<std::size_t>(p.hidden1), h2 = static_cast<std::size_t>(p.hidden2);
  if (m.w1_.size() != h1 * m.inputs_ || m.b1_.size() != h1 || m.w2_.size() != h2 * h1 || m.b2_.size() != h2 ||
      m.w3_.size() != h2) {
    fail(ErrorKind::data, "MLP weights do not match the declared layer sizes");
  }
  return m;
}

RegressorKind parse_regressor_kind(std::string_view text) {
  if (text == "gbrt") return RegressorKind::gbrt;
  if (text == "mlp") return RegressorKind::mlp;
  fail(ErrorKind::validation, "unknown regressor '" + std::string(text) + "' (expected gbrt|mlp)", "kind");
}

const char* to_string(RegressorKind kind) { return kind == RegressorKind::gbrt ? "gbrt" : "mlp"; }

double predict_raw(const Regressor& r, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, r);
}

nlohmann::json regressor_to_json(const Regressor& r) {
  if (const auto* g = std::get_if<GradientBoostedTrees>(&r)) return {{"kind", "gbrt"}, {"params", g->to_json()}};
  return {{"kind", "mlp"}, {"params", std::get<Mlp>(r).to_json()}};
}

Regressor regressor_from_json(const nlohmann::json& j) {
  switch (parse_regressor_kind(j.at("kind").get<std::string>())) {
    case RegressorKind::gbrt: return GradientBoostedTrees::from_json(j.at("params"));
    case RegressorKind::mlp: return Mlp::from_json(j.at("params"));
  }
  fail(ErrorKind::data, "unknown regressor kind");
}

}  // namespace heat
