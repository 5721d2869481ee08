#pragma once

// Multilayer perceptron with sigmoid hidden units and a linear output layer.
//
// Layer l maps activations a[l-1] to a[l] = f(W[l] a[l-1] + b[l]); the bias
// plays the role of the negated threshold. Training is either online
// backpropagation (delta rule) or Levenberg-Marquardt on the per-pattern,
// per-output residuals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prospect/common.hpp"
#include "prospect/raster.hpp"

namespace prospect::mlp {

enum class Activation { sigmoid, linear };

inline const char* activation_name(Activation a) { return a == Activation::sigmoid ? "sigmoid" : "linear"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "linear") return Activation::linear;
  throw ParseError("unknown activation '" + std::string(s) + "'");
}

struct Topology {
  std::vector<std::size_t> layer_sizes;  // inputs first, outputs last
  Activation hidden = Activation::sigmoid;
  Activation output = Activation::linear;

  std::size_t inputs() const { return layer_sizes.front(); }
  std::size_t outputs() const { return layer_sizes.back(); }

  void validate() const {
    if (layer_sizes.size() < 3) throw ConfigError("MLP topology needs an input, at least one hidden and an output layer");
    for (auto n : layer_sizes)
      if (n == 0) throw ConfigError("MLP layer sizes must be positive");
  }
};

struct Layer {
  Eigen::MatrixXd w;  // rows: units of this layer, cols: units of the previous layer
  Eigen::VectorXd b;
};

struct Weights {
  Topology topology;
  std::vector<Layer> layers;  // layers[i] feeds layer i+1 of the topology

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.w.size() + l.b.size());
    return n;
  }

  /// Per layer: W row-major, then b.
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.w.rows(); ++r)
        for (Eigen::Index c = 0; c < l.w.cols(); ++c) out(k++) = l.w(r, c);
      for (Eigen::Index r = 0; r < l.b.size(); ++r) out(k++) = l.b(r);
    }
    return out;
  }

  void unflatten(const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != parameter_count()) throw DimensionError("parameter vector size mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers) {
      for (Eigen::Index r = 0; r < l.w.rows(); ++r)
        for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = v(k++);
      for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = v(k++);
    }
  }

  /// Shape check; works for any depth >= 2 so fixtures can build single-layer nets.
  void check_shapes() const {
    const auto& s = topology.layer_sizes;
    if (s.size() < 2 || layers.size() != s.size() - 1) throw DimensionError("weights do not match topology depth");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (static_cast<std::size_t>(l.w.rows()) != s[i + 1] || static_cast<std::size_t>(l.w.cols()) != s[i] ||
          static_cast<std::size_t>(l.b.size()) != s[i + 1])
        throw DimensionError("layer " + std::to_string(i + 1) + " weight shape mismatch");
      if (!l.w.allFinite() || !l.b.allFinite()) throw DimensionError("layer " + std::to_string(i + 1) + " has non-finite weights");
    }
  }
};

/// Zero weights for any depth >= 2.
inline Weights zero_weights(const Topology& t) {
  Weights w;
  w.topology = t;
  for (std::size_t i = 0; i + 1 < t.layer_sizes.size(); ++i) {
    const auto rows = static_cast<Eigen::Index>(t.layer_sizes[i + 1]);
    const auto cols = static_cast<Eigen::Index>(t.layer_sizes[i]);
    w.layers.push_back({Eigen::MatrixXd::Zero(rows, cols), Eigen::VectorXd::Zero(rows)});
  }
  return w;
}

/// Uniform in [-0.5, 0.5] from the seeded generator.
inline Weights init_weights(const Topology& t, std::uint64_t seed) {
  t.validate();
  Weights w = zero_weights(t);
  Rng rng(seed);
  for (auto& l : w.layers) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = rng.uniform(-0.5, 0.5);
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = rng.uniform(-0.5, 0.5);
  }
  return w;
}

struct Pattern {
  Eigen::VectorXd input;
  Eigen::VectorXd target;
};

struct ForwardResult {
  std::vector<Eigen::VectorXd> activations;  // [0] is the input, back() the output
  const Eigen::VectorXd& output() const { return activations.back(); }
};

namespace detail {

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

inline void activate(Eigen::VectorXd& v, Activation a) {
  if (a == Activation::sigmoid) v = v.unaryExpr([](double u) { return sigmoid(u); });
}

/// f'(u) written in terms of the activation value f(u).
inline Eigen::VectorXd derivative(const Eigen::VectorXd& act, Activation a) {
  if (a == Activation::sigmoid) return act.array() * (1.0 - act.array());
  return Eigen::VectorXd::Ones(act.size());
}

inline Activation layer_activation(const Weights& w, std::size_t layer) {
  return layer + 1 == w.layers.size() ? w.topology.output : w.topology.hidden;
}

}  // namespace detail

inline ForwardResult forward(const Weights& w, const Eigen::VectorXd& x) {
  if (w.layers.empty() || x.size() != w.layers.front().w.cols())
    throw DimensionError("forward: input has " + std::to_string(x.size()) + " features, network expects " +
                         std::to_string(w.layers.empty() ? 0 : w.layers.front().w.cols()));
  ForwardResult fr;
  fr.activations.reserve(w.layers.size() + 1);
  fr.activations.push_back(x);
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    Eigen::VectorXd z = w.layers[i].w * fr.activations.back() + w.layers[i].b;
    detail::activate(z, detail::layer_activation(w, i));
    fr.activations.push_back(std::move(z));
  }
  return fr;
}

inline Eigen::VectorXd predict(const Weights& w, const Eigen::VectorXd& x) { return forward(w, x).output(); }

/// Mean squared error over all outputs of all patterns.
inline double mse(const Weights& w, std::span<const Pattern> patterns) {
  if (patterns.empty()) return 0.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : patterns) {
    const Eigen::VectorXd e = predict(w, p.input) - p.target;
    sum += e.squaredNorm();
    count += static_cast<std::size_t>(e.size());
  }
  return sum / static_cast<double>(count);
}

/// Error signals (deltas) for one pattern: delta[l] for layers 1..L, with
/// delta_out = (t - o) f'_out and delta_hidden = f'(a) * W^T delta_next.
inline std::vector<Eigen::VectorXd> deltas(const Weights& w, const ForwardResult& fr, const Eigen::VectorXd& target) {
  const std::size_t nl = w.layers.size();
  std::vector<Eigen::VectorXd> d(nl);
  const auto& out = fr.output();
  d[nl - 1] = (target - out).cwiseProduct(detail::derivative(out, w.topology.output));
  for (std::size_t i = nl - 1; i-- > 0;) {
    const Eigen::VectorXd back = w.layers[i + 1].w.transpose() * d[i + 1];
    d[i] = back.cwiseProduct(detail::derivative(fr.activations[i + 1], w.topology.hidden));
  }
  return d;
}

/// Gradient of E = 1/2 sum_p ||t_p - o_p||^2, flattened like Weights::flatten.
inline Eigen::VectorXd gradient(const Weights& w, std::span<const Pattern> patterns) {
  w.check_shapes();
  Weights g = zero_weights(w.topology);
  for (const auto& p : patterns) {
    const auto fr = forward(w, p.input);
    const auto d = deltas(w, fr, p.target);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
      g.layers[i].w.noalias() -= d[i] * fr.activations[i].transpose();
      g.layers[i].b -= d[i];
    }
  }
  return g.flatten();
}

struct EpochResult {
  Weights weights;
  double mse = 0.0;  // accumulated over the pass, each pattern scored before its update
};

/// One online pass: for each pattern in order, w += eta * delta * a_prev^T.
inline EpochResult backprop_epoch(Weights w, std::span<const Pattern> patterns, double eta) {
  if (!(eta >= 0.0) || eta > 1.0) throw ConfigError("backprop learning rate must lie in [0, 1]");
  w.check_shapes();
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : patterns) {
    if (p.target.size() != w.layers.back().w.rows()) throw DimensionError("pattern target size mismatch");
    const auto fr = forward(w, p.input);
    sum += (p.target - fr.output()).squaredNorm();
    count += static_cast<std::size_t>(p.target.size());
    const auto d = deltas(w, fr, p.target);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
      w.layers[i].w.noalias() += eta * d[i] * fr.activations[i].transpose();
      w.layers[i].b += eta * d[i];
    }
  }
  return {std::move(w), count ? sum / static_cast<double>(count) : 0.0};
}

enum class Algorithm { backprop, levenberg_marquardt };

struct TrainConfig {
  Algorithm algorithm = Algorithm::levenberg_marquardt;
  double learning_rate = 0.1;  // backprop only
  double lm_lambda0 = 1e-3;
  double lm_lambda_factor = 10.0;
  std::size_t max_epochs = 100;
  double error_goal = 0.005;  // train MSE
  std::uint64_t rng_seed = 42;

  void validate() const {
    if (algorithm == Algorithm::backprop && !(learning_rate > 0.0 && learning_rate <= 1.0))
      throw ConfigError("learning_rate must lie in (0, 1]");
    if (!(lm_lambda0 > 0.0)) throw ConfigError("lm_lambda0 must be > 0");
    if (!(lm_lambda_factor > 1.0)) throw ConfigError("lm_lambda_factor must be > 1");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (!(error_goal > 0.0)) throw ConfigError("error_goal must be > 0");
  }
};

struct HistoryEntry {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
};

struct TrainResult {
  Weights weights;  // weights at the minimum test error
  std::vector<HistoryEntry> history;
  std::size_t best_epoch = 0;
  std::string stop_reason;
};

inline constexpr double kLambdaMax = 1e10;

/// Jacobian of the network outputs w.r.t. all parameters for one pattern
/// (rows: outputs), written into `rows` starting at `row0`.
inline void jacobian_rows(const Weights& w, const ForwardResult& fr, Eigen::MatrixXd& rows, Eigen::Index row0) {
  const std::size_t nl = w.layers.size();
  const auto m = static_cast<Eigen::Index>(fr.output().size());
  // Column offset of each layer's block in the flattened parameter vector.
  std::vector<Eigen::Index> offset(nl);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < nl; ++i) {
    offset[i] = off;
    off += w.layers[i].w.size() + w.layers[i].b.size();
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    // Sensitivity of output k w.r.t. each layer's pre-activation.
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
    s(k) = detail::derivative(fr.output(), w.topology.output)(k);
    for (std::size_t i = nl; i-- > 0;) {
      const auto& a_prev = fr.activations[i];
      const auto& l = w.layers[i];
      Eigen::Index col = offset[i];
      for (Eigen::Index r = 0; r < l.w.rows(); ++r)
        for (Eigen::Index c = 0; c < l.w.cols(); ++c) rows(row0 + k, col++) = s(r) * a_prev(c);
      for (Eigen::Index r = 0; r < l.b.size(); ++r) rows(row0 + k, col++) = s(r);
      if (i > 0) s = (l.w.transpose() * s).cwiseProduct(detail::derivative(fr.activations[i], w.topology.hidden));
    }
  }
}

/// Levenberg-Marquardt: dw = -(J^T J + lambda I)^-1 J^T e with e = o - t.
/// Lambda is divided by the factor on an accepted step and multiplied on a
/// rejected one. Stops at the error goal, max_epochs, or lambda > 1e10.
inline TrainResult train_lm(Weights w, std::span<const Pattern> train, std::span<const Pattern> test,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.algorithm != Algorithm::levenberg_marquardt) throw ConfigError("train_lm requires levenberg_marquardt");
  if (train.empty()) throw InputError("train_lm: empty training set");
  w.check_shapes();

  const auto np = static_cast<Eigen::Index>(w.parameter_count());
  const auto m = w.layers.back().w.rows();
  constexpr Eigen::Index kBlock = 256;  // patterns per Jacobian block

  TrainResult res;
  double train_mse = mse(w, train);
  double test_mse = test.empty() ? train_mse : mse(w, test);
  res.history.push_back({0, train_mse, test_mse});
  res.weights = w;
  double best_test = test_mse;
  double lambda = cfg.lm_lambda0;

  Eigen::MatrixXd jtj(np, np);
  Eigen::VectorXd jte(np);
  Eigen::MatrixXd jb;

  for (std::size_t epoch = 1;; ++epoch) {
    if (train_mse <= cfg.error_goal) {
      res.stop_reason = "error_goal";
      break;
    }
    if (epoch > cfg.max_epochs) {
      res.stop_reason = "max_epochs";
      break;
    }

    jtj.setZero();
    jte.setZero();
    for (std::size_t start = 0; start < train.size(); start += kBlock) {
      const auto count = static_cast<Eigen::Index>(std::min<std::size_t>(kBlock, train.size() - start));
      jb.resize(count * m, np);
      Eigen::VectorXd eb(count * m);
      for (Eigen::Index p = 0; p < count; ++p) {
        const auto& pat = train[start + static_cast<std::size_t>(p)];
        const auto fr = forward(w, pat.input);
        jacobian_rows(w, fr, jb, p * m);
        eb.segment(p * m, m) = fr.output() - pat.target;
      }
      jtj.selfadjointView<Eigen::Lower>().rankUpdate(jb.transpose());
      jte.noalias() += jb.transpose() * eb;
    }

    const Eigen::VectorXd w0 = w.flatten();
    bool accepted = false;
    bool solved = false;
    while (lambda <= kLambdaMax) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += lambda;
      Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower> ldlt(a);
      Eigen::VectorXd step;
      if (ldlt.info() == Eigen::Success) step = ldlt.solve(jte);
      if (step.size() == np && step.allFinite()) {
        solved = true;
        Weights trial = w;
        trial.unflatten(w0 - step);
        const double trial_mse = mse(trial, train);
        if (trial_mse < train_mse) {
          w = std::move(trial);
          train_mse = trial_mse;
          lambda = std::max(lambda / cfg.lm_lambda_factor, 1e-20);
          accepted = true;
          break;
        }
      }
      lambda *= cfg.lm_lambda_factor;
    }
    if (!solved) throw TrainingError("Levenberg-Marquardt: normal equations singular up to lambda 1e10 at epoch " +
                                     std::to_string(epoch));
    if (!accepted) {
      res.stop_reason = "lambda_max";
      break;
    }
    test_mse = test.empty() ? train_mse : mse(w, test);
    res.history.push_back({epoch, train_mse, test_mse});
    if (test_mse < best_test) {
      best_test = test_mse;
      res.weights = w;
      res.best_epoch = epoch;
    }
  }
  return res;
}

/// Repeated online backprop epochs with the same stopping and selection rules as train_lm.
inline TrainResult train_backprop(Weights w, std::span<const Pattern> train, std::span<const Pattern> test,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw InputError("train_backprop: empty training set");
  TrainResult res;
  double train_mse = mse(w, train);
  double best_test = test.empty() ? train_mse : mse(w, test);
  res.history.push_back({0, train_mse, best_test});
  res.weights = w;
  for (std::size_t epoch = 1;; ++epoch) {
    if (train_mse <= cfg.error_goal) {
      res.stop_reason = "error_goal";
      break;
    }
    if (epoch > cfg.max_epochs) {
      res.stop_reason = "max_epochs";
      break;
    }
    auto er = backprop_epoch(std::move(w), train, cfg.learning_rate);
    w = std::move(er.weights);
    train_mse = mse(w, train);
    if (!std::isfinite(train_mse)) throw TrainingError("backprop diverged at epoch " + std::to_string(epoch));
    const double test_mse = test.empty() ? train_mse : mse(w, test);
    res.history.push_back({epoch, train_mse, test_mse});
    if (test_mse < best_test) {
      best_test = test_mse;
      res.weights = w;
      res.best_epoch = epoch;
    }
  }
  return res;
}

inline TrainResult train(Weights w, std::span<const Pattern> train_set, std::span<const Pattern> test,
                         const TrainConfig& cfg) {
  return cfg.algorithm == Algorithm::levenberg_marquardt ? train_lm(std::move(w), train_set, test, cfg)
                                                         : train_backprop(std::move(w), train_set, test, cfg);
}

/// One forward pass per cell valid in every layer of `stack`; other cells are nodata.
inline Grid predict_grid(const Weights& w, std::span<const Grid> stack) {
  if (stack.empty()) throw InputError("predict_grid: empty stack");
  assert_aligned(stack);
  if (static_cast<std::size_t>(w.layers.front().w.cols()) != stack.size())
    throw DimensionError("predict_grid: model expects " + std::to_string(w.layers.front().w.cols()) +
                         " factors, stack has " + std::to_string(stack.size()));
  if (w.layers.back().w.rows() != 1) throw DimensionError("predict_grid: model must have a single output");
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
    if (ok) out[i] = predict(w, x)(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text serialisation

inline std::string serialize(const Weights& w) {
  std::ostringstream os;
  os << "prospect-mlp 1\n";
  os << "layers";
  for (auto n : w.topology.layer_sizes) os << ' ' << n;
  os << "\nhidden_activation " << activation_name(w.topology.hidden) << "\n";
  os << "output_activation " << activation_name(w.topology.output) << "\n";
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const auto& l = w.layers[i];
    os << "layer " << (i + 1) << "\nweights";
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) os << ' ' << format_real(l.w(r, c));
    os << "\nbiases";
    for (Eigen::Index r = 0; r < l.b.size(); ++r) os << ' ' << format_real(l.b(r));
    os << '\n';
  }
  return os.str();
}

inline Weights deserialize(std::string_view text) {
  auto toks = split_ws(text);
  std::size_t i = 0;
  auto next = [&](const char* what) -> std::string_view {
    if (i >= toks.size()) throw ParseError(std::string("mlp model: unexpected end of input, expected ") + what);
    return toks[i++];
  };
  auto expect = [&](std::string_view kw) {
    auto t = next(std::string(kw).c_str());
    if (t != kw) throw ParseError("mlp model: expected '" + std::string(kw) + "', got '" + std::string(t) + "'");
  };
  auto real = [&]() {
    double v;
    auto t = next("number");
    if (!parse_real(t, v)) throw ParseError("mlp model: invalid number '" + std::string(t) + "'");
    return v;
  };
  expect("prospect-mlp");
  expect("1");
  expect("layers");
  Topology t;
  while (i < toks.size() && toks[i] != "hidden_activation") {
    long long n;
    if (!parse_int(toks[i], n) || n <= 0) throw ParseError("mlp model: invalid layer size '" + std::string(toks[i]) + "'");
    t.layer_sizes.push_back(static_cast<std::size_t>(n));
    ++i;
  }
  if (t.layer_sizes.size() < 2) throw ParseError("mlp model: need at least two layer sizes");
  expect("hidden_activation");
  t.hidden = parse_activation(next("activation"));
  expect("output_activation");
  t.output = parse_activation(next("activation"));
  Weights w = zero_weights(t);
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    expect("layer");
    expect(std::to_string(li + 1));
    expect("weights");
    auto& l = w.layers[li];
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = real();
    expect("biases");
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = real();
  }
  if (i != toks.size()) throw ParseError("mlp model: trailing data");
  w.check_shapes();
  return w;
}

}  // namespace prospect::mlp
