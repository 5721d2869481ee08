#pragma once

// Sample assembly, reproducible partitioning and validation metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "prospect/common.hpp"
#include "prospect/raster.hpp"

namespace prospect::eval {

/// One row per cell valid in every factor and in the target, in row-major cell order.
struct SampleMatrix {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd rows;     // M x N
  Eigen::VectorXd targets;  // M, values in {0, 1}
  std::vector<std::pair<std::size_t, std::size_t>> cell_index;

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
};

inline SampleMatrix build_samples(std::span<const Grid> stack, const Grid& target,
                                  std::vector<std::string> feature_names = {}) {
  std::vector<const Grid*> all;
  for (const auto& g : stack) all.push_back(&g);
  all.push_back(&target);
  assert_aligned(std::span<const Grid* const>(all));
  if (feature_names.empty())
    for (std::size_t i = 0; i < stack.size(); ++i) feature_names.push_back("f" + std::to_string(i));
  if (feature_names.size() != stack.size()) throw InputError("build_samples: feature name count mismatch");

  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!target.valid(i)) continue;
    bool ok = true;
    for (const auto& g : stack) ok = ok && g.valid(i);
    if (!ok) continue;
    if (target[i] != 0.0 && target[i] != 1.0)
      throw InputError("build_samples: target cell (" + std::to_string(i / target.ncols()) + "," +
                       std::to_string(i % target.ncols()) + ") is not 0/1");
    cells.push_back(i);
  }
  SampleMatrix sm;
  sm.feature_names = std::move(feature_names);
  const auto m = static_cast<Eigen::Index>(cells.size());
  sm.rows.resize(m, static_cast<Eigen::Index>(stack.size()));
  sm.targets.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = cells[static_cast<std::size_t>(k)];
    for (std::size_t f = 0; f < stack.size(); ++f) sm.rows(k, static_cast<Eigen::Index>(f)) = stack[f][i];
    sm.targets(k) = target[i];
    sm.cell_index.emplace_back(i / target.ncols(), i % target.ncols());
  }
  return sm;
}

struct Fractions {
  double train = 0.70;
  double test = 0.15;
  double validation = 0.15;
};

struct Split {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::vector<std::size_t> val_idx;
  Fractions fractions;
  std::uint64_t rng_seed = 0;
};

/// Seeded Fisher-Yates shuffle of 0..m-1, then contiguous train/test/validation slices.
inline Split split(std::size_t m, Fractions fr, std::uint64_t seed) {
  if (m < 3) throw InputError("split: need at least 3 samples, got " + std::to_string(m));
  if (!(fr.train > 0 && fr.test > 0 && fr.validation > 0) ||
      std::abs(fr.train + fr.test + fr.validation - 1.0) > 1e-9)
    throw ConfigError("split fractions must be positive and sum to 1");
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = m - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);

  const auto md = static_cast<double>(m);
  auto n_train = static_cast<std::size_t>(std::llround(fr.train * md));
  auto n_test = static_cast<std::size_t>(std::llround(fr.test * md));
  n_train = std::clamp<std::size_t>(n_train, 1, m - 2);
  n_test = std::clamp<std::size_t>(n_test, 1, m - n_train - 1);

  Split s;
  s.fractions = fr;
  s.rng_seed = seed;
  s.train_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                    idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  s.val_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_test), idx.end());
  return s;
}

inline Split split(const SampleMatrix& sm, Fractions fr, std::uint64_t seed) { return split(sm.size(), fr, seed); }

// ---------------------------------------------------------------------------
// Metrics

/// Sample Pearson correlation.
inline double pearson_r(std::span<const double> pred, std::span<const double> obs) {
  if (pred.size() != obs.size()) throw DimensionError("pearson_r: length mismatch");
  if (pred.size() < 2) throw MetricError("pearson_r: need at least 2 values");
  const auto n = static_cast<double>(pred.size());
  double mp = 0.0, mo = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mo += obs[i];
  }
  mp /= n;
  mo /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double a = pred[i] - mp;
    const double b = obs[i] - mo;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw MetricError("pearson_r: undefined for a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double rmse(std::span<const double> pred, std::span<const double> obs) {
  if (pred.size() != obs.size()) throw DimensionError("rmse: length mismatch");
  if (pred.empty()) throw MetricError("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - obs[i]) * (pred[i] - obs[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline void tally(ConfusionMatrix& cm, double pred, double truth) {
  const bool p = pred == 1.0;
  const bool t = truth == 1.0;
  if (p && t) ++cm.tp;
  else if (p) ++cm.fp;
  else if (t) ++cm.fn;
  else ++cm.tn;
}

/// Counts over cells valid in both binary maps.
inline ConfusionMatrix confusion(const Grid& pred, const Grid& truth) {
  assert_aligned({&pred, &truth});
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.valid(i) || !truth.valid(i)) continue;
    for (const Grid* g : {&pred, &truth})
      if ((*g)[i] != 0.0 && (*g)[i] != 1.0)
        throw InputError(std::string("confusion: ") + (g == &pred ? "predicted" : "truth") + " cell (" +
                         std::to_string(i / pred.ncols()) + "," + std::to_string(i % pred.ncols()) +
                         ") has non-binary value " + format_real((*g)[i]));
    tally(cm, pred[i], truth[i]);
  }
  return cm;
}

inline ConfusionMatrix confusion(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DimensionError("confusion: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if ((pred[i] != 0.0 && pred[i] != 1.0) || (truth[i] != 0.0 && truth[i] != 1.0))
      throw InputError("confusion: non-binary value at index " + std::to_string(i));
    tally(cm, pred[i], truth[i]);
  }
  return cm;
}

/// Cohen's kappa for two classes.
inline double kappa(const ConfusionMatrix& cm) {
  const auto total = static_cast<double>(cm.total());
  if (cm.total() == 0) throw MetricError("kappa: empty confusion matrix");
  const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
  const double fn = static_cast<double>(cm.fn), tn = static_cast<double>(cm.tn);
  const double po = (tp + tn) / total;
  const double pe = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (total * total);
  if (pe == 1.0) throw MetricError("kappa: undefined when expected agreement is 1 (single class)");
  return (po - pe) / (1.0 - pe);
}

inline constexpr double kDefaultThreshold = 0.5;

inline double binarize_value(double v, double threshold) { return v >= threshold ? 1.0 : 0.0; }

inline Grid binarize(const Grid& potential, double threshold = kDefaultThreshold) {
  return map_valid(potential, [&](double v) { return binarize_value(v, threshold); });
}

struct Metrics {
  double r = 0.0;
  double rmse = 0.0;
  double kappa = 0.0;
  ConfusionMatrix cm;
  std::uint64_t seed = 0;
  double threshold = kDefaultThreshold;
};

/// R and RMSE on the continuous output, kappa on the binarised output.
inline Metrics evaluate(std::span<const double> continuous, std::span<const double> truth, double threshold,
                        std::uint64_t seed = 0) {
  Metrics m;
  m.threshold = threshold;
  m.seed = seed;
  m.r = pearson_r(continuous, truth);
  m.rmse = rmse(continuous, truth);
  std::vector<double> bin(continuous.size());
  for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = binarize_value(continuous[i], threshold);
  m.cm = confusion(bin, truth);
  m.kappa = kappa(m.cm);
  return m;
}

/// Flat key=value report.
inline std::string format_metrics(const Metrics& m) {
  std::string s;
  s += "r=" + format_real(m.r) + "\n";
  s += "rmse=" + format_real(m.rmse) + "\n";
  s += "kappa=" + format_real(m.kappa) + "\n";
  s += "tp=" + std::to_string(m.cm.tp) + "\n";
  s += "fp=" + std::to_string(m.cm.fp) + "\n";
  s += "fn=" + std::to_string(m.cm.fn) + "\n";
  s += "tn=" + std::to_string(m.cm.tn) + "\n";
  s += "seed=" + std::to_string(m.seed) + "\n";
  s += "threshold=" + format_real(m.threshold) + "\n";
  return s;
}

}  // namespace prospect::eval
