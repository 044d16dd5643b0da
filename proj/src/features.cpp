#include "heat/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "heat/error.hpp"
#include "heat/parallel.hpp"

namespace heat {

void PairFeatures::append_to(std::vector<double>& out) const {
  out.insert(out.end(), {interval_overlap, peak_diff, start_diff, end_diff, has_match_src, has_match_tgt, src_ratio,
                         tgt_ratio, crit_src_as_tgt, crit_tgt_as_src});
  out.insert(out.end(), crit_ais_onehot.begin(), crit_ais_onehot.end());
  out.insert(out.end(), prior_ais_onehot.begin(), prior_ais_onehot.end());
  out.insert(out.end(), {has_match_sig, sig_ratio, match_dst_port});
}

std::vector<double> PairFeatures::to_vector() const {
  std::vector<double> v;
  v.reserve(13 + crit_ais_onehot.size() + prior_ais_onehot.size());
  append_to(v);
  return v;
}

std::vector<std::string> feature_columns(const StageVocabulary& vocab) {
  std::vector<std::string> cols = {"interval_overlap", "peak_diff",     "start_diff", "end_diff",
                                   "has_match_src",    "has_match_tgt", "src_ratio",  "tgt_ratio",
                                   "crit_src_as_tgt",  "crit_tgt_as_src"};
  for (const auto& s : vocab.stages()) cols.push_back("crit_ais_" + s.stage_id);
  for (const auto& s : vocab.stages()) cols.push_back("prior_ais_" + s.stage_id);
  cols.insert(cols.end(), {"has_match_sig", "sig_ratio", "match_dst_port"});
  return cols;
}

namespace {

double interval_overlap(const Episode& p, const Episode& c, OverlapMode mode) {
  const double inter = std::max(0.0, std::min(p.end_time, c.end_time) - std::max(p.start_time, c.start_time));
  if (mode == OverlapMode::seconds) return inter;
  const double uni = (p.end_time - p.start_time) + (c.end_time - c.start_time) - inter;
  if (uni > 0.0) return inter / uni;
  // Both zero-length.
  return p.start_time == c.start_time ? 1.0 : 0.0;
}

double flag(std::size_t n) { return n > 0 ? 1.0 : 0.0; }

}  // namespace

PairFeatures extract_features(const Episode& prior, const Episode& critical, const StageVocabulary& vocab,
                              const FeatureConfig& cfg) {
  if (prior.episode_id == critical.episode_id) {
    fail(ErrorKind::validation, "prior and critical episode are the same episode", "prior_episode_id");
  }
  const std::size_t prior_stage = vocab.require_index(prior.stage);
  const std::size_t crit_stage = vocab.require_index(critical.stage);

  PairFeatures f;
  f.interval_overlap = interval_overlap(prior, critical, cfg.overlap);
  f.peak_diff = critical.peak_time - prior.peak_time;
  f.start_diff = critical.start_time - prior.start_time;
  f.end_diff = critical.end_time - prior.end_time;

  f.src_ratio = jaccard(critical.sources, prior.sources);
  f.tgt_ratio = jaccard(critical.targets, prior.targets);
  f.has_match_src = flag(intersection_size(critical.sources, prior.sources));
  f.has_match_tgt = flag(intersection_size(critical.targets, prior.targets));
  f.crit_src_as_tgt = flag(intersection_size(critical.sources, prior.targets));
  f.crit_tgt_as_src = flag(intersection_size(critical.targets, prior.sources));

  f.crit_ais_onehot.assign(vocab.size(), 0.0);
  f.prior_ais_onehot.assign(vocab.size(), 0.0);
  f.crit_ais_onehot[crit_stage] = 1.0;
  f.prior_ais_onehot[prior_stage] = 1.0;

  f.sig_ratio = jaccard(critical.signatures, prior.signatures);
  f.has_match_sig = flag(intersection_size(critical.signatures, prior.signatures));
  f.match_dst_port = flag(intersection_size(critical.dst_ports, prior.dst_ports));
  return f;
}

std::vector<double> feature_matrix(const EpisodeStore& store, std::span<const EpisodePair> pairs,
                                   const StageVocabulary& vocab, const FeatureConfig& cfg) {
  const std::size_t dim = feature_dimension(vocab.size());
  std::vector<double> out(pairs.size() * dim);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto row = extract_features(store[pairs[i].prior], store[pairs[i].critical], vocab, cfg).to_vector();
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  });
  return out;
}

void Standardizer::apply_inplace(std::span<double> row) const {
  if (row.size() != mean.size()) {
    fail(ErrorKind::validation,
         "feature dimension mismatch: got " + std::to_string(row.size()) + ", expected " + std::to_string(mean.size()));
  }
  for (std::size_t d = 0; d < row.size(); ++d) {
    row[d] -= mean[d];
    if (stddev[d] > 0.0) row[d] /= stddev[d];
  }
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  std::vector<double> out(row.begin(), row.end());
  apply_inplace(out);
  return out;
}

nlohmann::json Standardizer::to_json() const { return {{"mean", mean}, {"stddev", stddev}}; }

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) fail(ErrorKind::data, "standardizer mean/stddev length mismatch");
  return s;
}

Standardizer fit_standardizer(std::span<const double> rows, std::size_t dimension) {
  if (dimension == 0 || rows.size() % dimension != 0) {
    fail(ErrorKind::validation, "feature rows do not match the dimension");
  }
  const std::size_t n = rows.size() / dimension;
  if (n < 2) fail(ErrorKind::validation, "at least 2 training vectors are required to fit a standardizer");
  Standardizer s;
  s.mean.assign(dimension, 0.0);
  s.stddev.assign(dimension, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t d = 0; d < dimension; ++d) s.mean[d] += rows[r * dimension + d];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t d = 0; d < dimension; ++d) {
      const double dev = rows[r * dimension + d] - s.mean[d];
      s.stddev[d] += dev * dev;
    }
  }
  for (double& v : s.stddev) v = std::sqrt(v / static_cast<double>(n));
  return s;
}

Standardizer fit_standardizer(std::span<const PairFeatures> rows) {
  if (rows.empty()) fail(ErrorKind::validation, "at least 2 training vectors are required to fit a standardizer");
  std::vector<double> flat;
  for (const auto& f : rows) f.append_to(flat);
  return fit_standardizer(flat, flat.size() / rows.size());
}

void write_feature_csv(std::ostream& out, const StageVocabulary& vocab, std::span<const FeatureRow> rows) {
  const auto cols = feature_columns(vocab);
  out << "critical_episode_id,prior_episode_id";
  for (const auto& c : cols) out << ',' << c;
  out << ",heat\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + '"';
  };
  char buf[32];
  for (const auto& row : rows) {
    if (row.values.size() != cols.size()) fail(ErrorKind::validation, "feature row has the wrong dimension");
    out << quote(row.critical_episode_id) << ',' << quote(row.prior_episode_id);
    for (double v : row.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << ',';
    if (row.heat) out << *row.heat;
    out << '\n';
  }
}

}  // namespace heat
