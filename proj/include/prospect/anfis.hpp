#pragma once

// First-order Sugeno ANFIS with Gaussian premise membership functions.
//
// Layer 1: mu[r][d] = exp(-(x_d - c)^2 / (2 sigma^2))
// Layer 2: w_r = prod_d mu[r][d]                      (product t-norm)
// Layer 3: wbar_r = w_r / sum_s w_s
// Layer 4: wbar_r * f_r,  f_r = p_r . x + q_r
// Layer 5: F = sum_r wbar_r f_r
//
// Firing strengths are combined in the log domain so that normalisation stays
// exact when every raw product underflows (many inputs, narrow Gaussians).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prospect/common.hpp"
#include "prospect/raster.hpp"

namespace prospect::anfis {

struct GaussianMf {
  double center = 0.0;
  double sigma = 1.0;

  double operator()(double x) const {
    const double u = (x - center) / sigma;
    return std::exp(-0.5 * u * u);
  }
};

struct Model {
  std::size_t n_inputs = 0;
  std::size_t n_rules = 0;
  std::vector<GaussianMf> premise;  // n_rules x n_inputs, row-major
  Eigen::MatrixXd consequent;       // n_rules x (n_inputs + 1); last column is the intercept

  GaussianMf& mf(std::size_t rule, std::size_t input) { return premise[rule * n_inputs + input]; }
  const GaussianMf& mf(std::size_t rule, std::size_t input) const { return premise[rule * n_inputs + input]; }

  void validate() const {
    if (n_inputs == 0 || n_rules == 0) throw DimensionError("ANFIS model needs at least one input and one rule");
    if (premise.size() != n_rules * n_inputs) throw DimensionError("ANFIS premise array has wrong size");
    if (static_cast<std::size_t>(consequent.rows()) != n_rules ||
        static_cast<std::size_t>(consequent.cols()) != n_inputs + 1)
      throw DimensionError("ANFIS consequent array has wrong shape");
    for (const auto& m : premise)
      if (!(m.sigma > 0.0) || !std::isfinite(m.center) || !std::isfinite(m.sigma))
        throw DimensionError("ANFIS premise parameters must be finite with sigma > 0");
    if (!consequent.allFinite()) throw DimensionError("ANFIS consequents must be finite");
  }
};

inline Model make_model(std::size_t n_inputs, std::size_t n_rules) {
  Model m;
  m.n_inputs = n_inputs;
  m.n_rules = n_rules;
  m.premise.assign(n_inputs * n_rules, GaussianMf{});
  m.consequent = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_rules), static_cast<Eigen::Index>(n_inputs + 1));
  return m;
}

struct ForwardResult {
  Eigen::MatrixXd memberships;   // layer 1, n_rules x n_inputs
  Eigen::VectorXd firing;        // layer 2 (may underflow to 0 individually)
  Eigen::VectorXd normalized;    // layer 3
  Eigen::VectorXd rule_outputs;  // f_r
  Eigen::VectorXd weighted;      // layer 4
  double output = 0.0;           // layer 5
};

namespace detail {

inline double log_firing(const Model& m, std::size_t r, const double* x) {
  double s = 0.0;
  for (std::size_t d = 0; d < m.n_inputs; ++d) {
    const auto& g = m.mf(r, d);
    const double u = (x[d] - g.center) / g.sigma;
    s -= 0.5 * u * u;
  }
  return s;
}

/// Writes normalised firing strengths for one input row into `out`.
inline void normalized_firing(const Model& m, const double* x, double* out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < m.n_rules; ++r) {
    out[r] = log_firing(m, r, x);
    mx = std::max(mx, out[r]);
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < m.n_rules; ++r) {
    out[r] = std::exp(out[r] - mx);
    sum += out[r];
  }
  for (std::size_t r = 0; r < m.n_rules; ++r) out[r] /= sum;
}

}  // namespace detail

inline ForwardResult forward(const Model& m, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != m.n_inputs)
    throw DimensionError("anfis forward: input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(m.n_inputs));
  const auto nr = static_cast<Eigen::Index>(m.n_rules);
  const auto ni = static_cast<Eigen::Index>(m.n_inputs);
  ForwardResult fr;
  fr.memberships.resize(nr, ni);
  fr.firing.resize(nr);
  fr.normalized.resize(nr);
  for (Eigen::Index r = 0; r < nr; ++r) {
    for (Eigen::Index d = 0; d < ni; ++d)
      fr.memberships(r, d) = m.mf(static_cast<std::size_t>(r), static_cast<std::size_t>(d))(x(d));
    fr.firing(r) = std::exp(detail::log_firing(m, static_cast<std::size_t>(r), x.data()));
  }
  detail::normalized_firing(m, x.data(), fr.normalized.data());
  fr.rule_outputs = m.consequent.leftCols(ni) * x + m.consequent.col(ni);
  fr.weighted = fr.normalized.cwiseProduct(fr.rule_outputs);
  fr.output = fr.weighted.sum();
  return fr;
}

inline double predict(const Model& m, const Eigen::VectorXd& x) { return forward(m, x).output; }

// ---------------------------------------------------------------------------
// Rule extraction

struct ClusterConfig {
  double radius = 0.5;
  double squash = 1.25;
  double accept_ratio = 0.5;
  double reject_ratio = 0.15;

  void validate() const {
    if (!(radius > 0.0 && radius <= 1.0)) throw ConfigError("cluster radius must lie in (0, 1]");
    if (!(squash > 1.0)) throw ConfigError("squash factor must be > 1");
    if (!(reject_ratio > 0.0 && reject_ratio < accept_ratio && accept_ratio <= 1.0))
      throw ConfigError("cluster ratios must satisfy 0 < reject < accept <= 1");
  }
};

/// Subtractive clustering over the rows of `data` (already scaled to [0,1]).
/// Returns the selected rows as cluster centers, in selection order.
inline std::vector<Eigen::VectorXd> subtractive_cluster(const Eigen::MatrixXd& data, const ClusterConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(data.rows());
  const auto dim = static_cast<std::size_t>(data.cols());
  if (n == 0) throw InputError("subtractive_cluster: empty data");

  // Row-major copy for cache-friendly pair loops.
  std::vector<double> rows(n * dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) rows[i * dim + d] = data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
  auto dist2 = [&](std::size_t i, std::size_t j) {
    const double* a = &rows[i * dim];
    const double* b = &rows[j * dim];
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
  };

  const double alpha = 4.0 / (cfg.radius * cfg.radius);
  const double rb = cfg.squash * cfg.radius;
  const double beta = 4.0 / (rb * rb);

  std::vector<double> potential(n, 1.0);  // self term exp(0)
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double e = std::exp(-alpha * dist2(i, j));
      potential[i] += e;
      potential[j] += e;
    }

  auto argmax = [&] {
    return static_cast<std::size_t>(std::max_element(potential.begin(), potential.end()) - potential.begin());
  };

  std::vector<std::size_t> chosen;
  std::size_t k = argmax();
  const double first = potential[k];
  chosen.push_back(k);
  double pk = first;

  auto subtract = [&](std::size_t c, double pc) {
    for (std::size_t i = 0; i < n; ++i) potential[i] = std::max(0.0, potential[i] - pc * std::exp(-beta * dist2(i, c)));
  };
  subtract(k, pk);

  while (chosen.size() < n) {
    k = argmax();
    pk = potential[k];
    if (pk > cfg.accept_ratio * first) {
      // accept
    } else if (pk < cfg.reject_ratio * first) {
      break;
    } else {
      double dmin = std::numeric_limits<double>::infinity();
      for (auto c : chosen) dmin = std::min(dmin, std::sqrt(dist2(k, c)));
      if (dmin / cfg.radius + pk / first < 1.0) {
        potential[k] = 0.0;
        continue;
      }
    }
    chosen.push_back(k);
    subtract(k, pk);
  }

  std::vector<Eigen::VectorXd> centers;
  for (auto c : chosen) centers.push_back(data.row(static_cast<Eigen::Index>(c)).transpose());
  return centers;
}

/// One rule per center; sigma on input d is radius * (max_d - min_d) / sqrt(8).
inline Model init_from_clusters(const std::vector<Eigen::VectorXd>& centers, const Eigen::MatrixXd& data,
                                const ClusterConfig& cfg) {
  if (centers.empty()) throw InputError("init_from_clusters: no centers");
  if (data.rows() == 0) throw InputError("init_from_clusters: empty data");
  const auto ni = static_cast<std::size_t>(data.cols());
  Model m = make_model(ni, centers.size());
  for (std::size_t d = 0; d < ni; ++d) {
    const auto col = data.col(static_cast<Eigen::Index>(d));
    const double range = col.maxCoeff() - col.minCoeff();
    const double sigma = std::max(cfg.radius * range / std::sqrt(8.0), 1e-6);
    for (std::size_t r = 0; r < centers.size(); ++r) {
      if (static_cast<std::size_t>(centers[r].size()) != ni) throw DimensionError("cluster center dimension mismatch");
      m.mf(r, d) = {centers[r](static_cast<Eigen::Index>(d)), sigma};
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Consequent estimation

/// Normalised firing strengths for every row of `x` (N x n_rules).
inline Eigen::MatrixXd normalized_firing(const Model& m, const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(m.n_rules));
  std::vector<double> row(m.n_inputs), wbar(m.n_rules);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < m.n_inputs; ++d) row[d] = x(i, static_cast<Eigen::Index>(d));
    detail::normalized_firing(m, row.data(), wbar.data());
    for (std::size_t r = 0; r < m.n_rules; ++r) out(i, static_cast<Eigen::Index>(r)) = wbar[r];
  }
  return out;
}

/// Writes the linear-in-consequents design rows for rows [start, start+count)
/// of `x`: rule r occupies columns r*(n+1) .. r*(n+1)+n as [wbar_r x, wbar_r].
inline void design_rows(const Model& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& wbar, Eigen::Index start,
                        Eigen::Index count, Eigen::MatrixXd& out) {
  const auto ni = static_cast<Eigen::Index>(m.n_inputs);
  const auto nr = static_cast<Eigen::Index>(m.n_rules);
  out.resize(count, nr * (ni + 1));
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index r = 0; r < nr; ++r) {
      const double w = wbar(start + i, r);
      for (Eigen::Index d = 0; d < ni; ++d) out(i, r * (ni + 1) + d) = w * x(start + i, d);
      out(i, r * (ni + 1) + ni) = w;
    }
  }
}

inline Eigen::MatrixXd design_matrix(const Model& m, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a;
  design_rows(m, x, normalized_firing(m, x), 0, x.rows(), a);
  return a;
}

inline constexpr double kLseRidge = 1e-8;
inline constexpr int kLseRefinements = 2;

struct LseReport {
  bool rank_deficient = false;
  double train_mse = 0.0;
};

/// Least-squares consequents with premises fixed: minimises ||A theta - t||
/// through the normal equations with a 1e-8 ridge (scaled by the mean
/// diagonal of A^T A when that exceeds 1), followed by kLseRefinements steps
/// of iterative refinement against the unregularised system. Directions the
/// data determine well converge to the exact solution; near-null directions
/// stay damped.
inline LseReport lse_consequents(Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& targets) {
  m.validate();
  if (x.rows() != targets.size()) throw DimensionError("lse_consequents: data/target row mismatch");
  if (static_cast<std::size_t>(x.cols()) != m.n_inputs) throw DimensionError("lse_consequents: input width mismatch");
  if (x.rows() == 0) throw InputError("lse_consequents: empty data");
  const auto ni = static_cast<Eigen::Index>(m.n_inputs);
  const auto p = static_cast<Eigen::Index>(m.n_rules) * (ni + 1);
  const Eigen::MatrixXd wbar = normalized_firing(m, x);

  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd block;
  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index s = 0; s < x.rows(); s += kBlock) {
    const Eigen::Index count = std::min(kBlock, x.rows() - s);
    design_rows(m, x, wbar, s, count, block);
    ata.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    atb.noalias() += block.transpose() * targets.segment(s, count);
  }
  ata.triangularView<Eigen::StrictlyUpper>() = ata.transpose();
  const double scale = std::max(1.0, ata.diagonal().mean());
  Eigen::MatrixXd reg = ata;
  reg.diagonal().array() += kLseRidge * scale;
  Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower> ldlt(reg);
  Eigen::VectorXd theta = ldlt.solve(atb);
  for (int k = 0; k < kLseRefinements; ++k) theta += ldlt.solve(atb - ata * theta);
  if (ldlt.info() != Eigen::Success || !theta.allFinite())
    throw NumericalError("lse_consequents: normal equations could not be solved");

  LseReport rep;
  // A pivot of the order of the ridge itself means the unregularised system is singular.
  rep.rank_deficient = ldlt.vectorD().cwiseAbs().minCoeff() < 10.0 * kLseRidge * scale;

  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(m.n_rules); ++r)
    m.consequent.row(r) = theta.segment(r * (ni + 1), ni + 1).transpose();

  double sse = 0.0;
  for (Eigen::Index s = 0; s < x.rows(); s += kBlock) {
    const Eigen::Index count = std::min(kBlock, x.rows() - s);
    design_rows(m, x, wbar, s, count, block);
    sse += (block * theta - targets.segment(s, count)).squaredNorm();
  }
  rep.train_mse = sse / static_cast<double>(x.rows());
  return rep;
}

// ---------------------------------------------------------------------------
// Premise gradient and hybrid training

/// Model outputs for every row of `x`.
inline Eigen::VectorXd predict_rows(const Model& m, const Eigen::MatrixXd& x) {
  const auto ni = static_cast<Eigen::Index>(m.n_inputs);
  const Eigen::MatrixXd wbar = normalized_firing(m, x);
  const Eigen::MatrixXd f = (x * m.consequent.leftCols(ni).transpose()).rowwise() + m.consequent.col(ni).transpose();
  return wbar.cwiseProduct(f).rowwise().sum();
}

inline double mse(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) return 0.0;
  return (predict_rows(m, x) - y).squaredNorm() / static_cast<double>(x.rows());
}

/// Gradient of L = 1/(2N) sum (F_i - t_i)^2 with respect to the premise
/// parameters, ordered per rule, per input as (center, sigma).
inline Eigen::VectorXd premise_gradient(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& targets) {
  const auto ni = static_cast<Eigen::Index>(m.n_inputs);
  const auto nr = static_cast<Eigen::Index>(m.n_rules);
  const Eigen::MatrixXd wbar = normalized_firing(m, x);
  const Eigen::MatrixXd f = (x * m.consequent.leftCols(ni).transpose()).rowwise() + m.consequent.col(ni).transpose();
  const Eigen::VectorXd out = wbar.cwiseProduct(f).rowwise().sum();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(nr * ni * 2);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double e = out(i) - targets(i);
    for (Eigen::Index r = 0; r < nr; ++r) {
      // dF / dlog(w_r) = wbar_r (f_r - F)
      const double common = e * wbar(i, r) * (f(i, r) - out(i)) * inv_n;
      if (common == 0.0) continue;
      for (Eigen::Index d = 0; d < ni; ++d) {
        const auto& mf = m.mf(static_cast<std::size_t>(r), static_cast<std::size_t>(d));
        const double diff = x(i, d) - mf.center;
        const double s2 = mf.sigma * mf.sigma;
        g((r * ni + d) * 2) += common * diff / s2;
        g((r * ni + d) * 2 + 1) += common * diff * diff / (s2 * mf.sigma);
      }
    }
  }
  return g;
}

inline Eigen::VectorXd premise_vector(const Model& m) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(m.premise.size() * 2));
  for (std::size_t i = 0; i < m.premise.size(); ++i) {
    v(static_cast<Eigen::Index>(2 * i)) = m.premise[i].center;
    v(static_cast<Eigen::Index>(2 * i + 1)) = m.premise[i].sigma;
  }
  return v;
}

inline void set_premise_vector(Model& m, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != m.premise.size() * 2) throw DimensionError("premise vector size mismatch");
  for (std::size_t i = 0; i < m.premise.size(); ++i)
    m.premise[i] = {v(static_cast<Eigen::Index>(2 * i)), v(static_cast<Eigen::Index>(2 * i + 1))};
}

struct HybridConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.01;
  double error_goal = 0.005;  // train MSE
  double decay = 0.9;         // learning-rate factor applied when the epoch error rises

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("ANFIS learning rate must be > 0");
    if (!(error_goal > 0.0)) throw ConfigError("ANFIS error goal must be > 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("ANFIS decay must lie in (0, 1]");
  }
};

struct HistoryEntry {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
};

struct TrainResult {
  Model model;  // model at the minimum test error
  std::vector<HistoryEntry> history;
  std::size_t best_epoch = 0;
  std::string stop_reason;
  bool rank_deficient = false;  // any LSE pass hit a (near) singular system
};

/// Hybrid learning. Epoch 0 is the initial LSE pass; every later epoch takes
/// one gradient step on the premises and re-solves the consequents.
inline TrainResult train_hybrid(Model m, const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                                const Eigen::MatrixXd& test_x, const Eigen::VectorXd& test_y, const HybridConfig& cfg) {
  cfg.validate();
  TrainResult res;
  auto rep = lse_consequents(m, train_x, train_y);
  res.rank_deficient = rep.rank_deficient;
  double train_mse = rep.train_mse;
  double test_mse = test_x.rows() ? mse(m, test_x, test_y) : train_mse;
  if (!std::isfinite(train_mse) || !std::isfinite(test_mse)) throw TrainingError("ANFIS diverged at epoch 0");
  res.history.push_back({0, train_mse, test_mse});
  res.model = m;
  double best_test = test_mse;
  double eta = cfg.learning_rate;

  for (std::size_t epoch = 1;; ++epoch) {
    if (train_mse <= cfg.error_goal) {
      res.stop_reason = "error_goal";
      break;
    }
    if (epoch > cfg.epochs) {
      res.stop_reason = "max_epochs";
      break;
    }
    const Eigen::VectorXd g = premise_gradient(m, train_x, train_y);
    if (!g.allFinite()) throw TrainingError("ANFIS gradient non-finite at epoch " + std::to_string(epoch));
    Eigen::VectorXd theta = premise_vector(m) - eta * g;
    for (Eigen::Index i = 1; i < theta.size(); i += 2) theta(i) = std::max(theta(i), 1e-6);
    set_premise_vector(m, theta);

    rep = lse_consequents(m, train_x, train_y);
    res.rank_deficient = res.rank_deficient || rep.rank_deficient;
    if (!std::isfinite(rep.train_mse)) throw TrainingError("ANFIS diverged at epoch " + std::to_string(epoch));
    if (rep.train_mse > train_mse) eta *= cfg.decay;
    train_mse = rep.train_mse;
    test_mse = test_x.rows() ? mse(m, test_x, test_y) : train_mse;
    if (!std::isfinite(test_mse)) throw TrainingError("ANFIS diverged at epoch " + std::to_string(epoch));
    res.history.push_back({epoch, train_mse, test_mse});
    if (test_mse < best_test) {
      best_test = test_mse;
      res.model = m;
      res.best_epoch = epoch;
    }
  }
  return res;
}

inline Grid predict_grid(const Model& m, std::span<const Grid> stack) {
  if (stack.empty()) throw InputError("predict_grid: empty stack");
  assert_aligned(stack);
  if (stack.size() != m.n_inputs)
    throw DimensionError("predict_grid: model expects " + std::to_string(m.n_inputs) + " factors, stack has " +
                         std::to_string(stack.size()));
  GridHeader h = stack.front().header();
  h.nodata_value = kDefaultNodata;
  Grid out(h);
  Eigen::VectorXd x(static_cast<Eigen::Index>(stack.size()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    bool ok = true;
    for (std::size_t f = 0; f < stack.size() && ok; ++f) {
      ok = stack[f].valid(i);
      if (ok) x(static_cast<Eigen::Index>(f)) = stack[f][i];
    }
    if (ok) out[i] = predict(m, x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text serialisation

inline std::string serialize(const Model& m) {
  std::ostringstream os;
  os << "prospect-anfis 1\ninputs " << m.n_inputs << "\nrules " << m.n_rules << "\n";
  for (std::size_t r = 0; r < m.n_rules; ++r) {
    os << "rule " << (r + 1) << "\npremise";
    for (std::size_t d = 0; d < m.n_inputs; ++d)
      os << ' ' << format_real(m.mf(r, d).center) << ' ' << format_real(m.mf(r, d).sigma);
    os << "\nconsequent";
    for (Eigen::Index c = 0; c < m.consequent.cols(); ++c)
      os << ' ' << format_real(m.consequent(static_cast<Eigen::Index>(r), c));
    os << '\n';
  }
  return os.str();
}

inline Model deserialize(std::string_view text) {
  auto toks = split_ws(text);
  std::size_t i = 0;
  auto next = [&]() -> std::string_view {
    if (i >= toks.size()) throw ParseError("anfis model: unexpected end of input");
    return toks[i++];
  };
  auto expect = [&](std::string_view kw) {
    auto t = next();
    if (t != kw) throw ParseError("anfis model: expected '" + std::string(kw) + "', got '" + std::string(t) + "'");
  };
  auto count = [&]() {
    long long v;
    auto t = next();
    if (!parse_int(t, v) || v <= 0) throw ParseError("anfis model: invalid count '" + std::string(t) + "'");
    return static_cast<std::size_t>(v);
  };
  auto real = [&]() {
    double v;
    auto t = next();
    if (!parse_real(t, v)) throw ParseError("anfis model: invalid number '" + std::string(t) + "'");
    return v;
  };
  expect("prospect-anfis");
  expect("1");
  expect("inputs");
  const auto ni = count();
  expect("rules");
  const auto nr = count();
  Model m = make_model(ni, nr);
  for (std::size_t r = 0; r < nr; ++r) {
    expect("rule");
    expect(std::to_string(r + 1));
    expect("premise");
    for (std::size_t d = 0; d < ni; ++d) {
      const double c = real();
      const double s = real();
      m.mf(r, d) = {c, s};
    }
    expect("consequent");
    for (Eigen::Index c = 0; c < m.consequent.cols(); ++c) m.consequent(static_cast<Eigen::Index>(r), c) = real();
  }
  if (i != toks.size()) throw ParseError("anfis model: trailing data");
  m.validate();
  return m;
}

}  // namespace prospect::anfis
