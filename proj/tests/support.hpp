#pragma once

// Seeded fixture generators and brute-force oracles shared by the unit tests
// and the acceptance runner. Oracles avoid the library's helpers on purpose.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "prospect/anfis.hpp"
#include "prospect/common.hpp"
#include "prospect/evaluate.hpp"
#include "prospect/geoprocess.hpp"
#include "prospect/mlp.hpp"
#include "prospect/raster.hpp"

namespace testing_support {

using prospect::Grid;
using prospect::GridHeader;
using prospect::Rng;

inline GridHeader header(std::size_t rows, std::size_t cols, double cs = 1.0, double xll = 0.0, double yll = 0.0) {
  GridHeader h;
  h.nrows = rows;
  h.ncols = cols;
  h.cellsize = cs;
  h.xll = xll;
  h.yll = yll;
  return h;
}

/// Random values on a fixed header; `nodata_frac` of the cells are nodata.
inline Grid random_grid(Rng& rng, const GridHeader& h, double nodata_frac = 0.0, double lo = -100.0,
                        double hi = 100.0) {
  Grid g(h);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform01() < nodata_frac ? h.nodata_value : rng.uniform(lo, hi);
  return g;
}

/// Random grid on a random header.
inline Grid random_grid(Rng& rng, std::size_t rows, std::size_t cols, double nodata_frac = 0.0, double lo = -100.0,
                        double hi = 100.0) {
  GridHeader h = header(rows, cols, rng.uniform(0.5, 50.0), rng.uniform(-1e5, 1e5), rng.uniform(-1e5, 1e5));
  Grid g(h);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform01() < nodata_frac ? h.nodata_value : rng.uniform(lo, hi);
  return g;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("prospect_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Raster oracles

inline double cell_x(const GridHeader& h, std::size_t c) { return h.xll + h.cellsize * (static_cast<double>(c) + 0.5); }
inline double cell_y(const GridHeader& h, std::size_t r) {
  return h.yll + h.cellsize * (static_cast<double>(h.nrows) - static_cast<double>(r) - 0.5);
}

/// Literal TRI: visits the eight neighbours by explicit offsets.
inline Grid tri_oracle(const Grid& g) {
  Grid out(g.header());
  const long R = static_cast<long>(g.nrows()), C = static_cast<long>(g.ncols());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c) {
      if (!g.valid(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) continue;
      const double z = g(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      double s = 0.0;
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= R || cc >= C) continue;
          if (!g.valid(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc))) continue;
          const double d = g(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) - z;
          s += d * d;
        }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = std::sqrt(s);
    }
  return out;
}

/// -(z_xx + z_yy) from the textbook central differences.
inline Grid curvature_oracle(const Grid& g) {
  Grid out(g.header());
  const double h = g.header().cellsize;
  for (std::size_t r = 1; r + 1 < g.nrows(); ++r)
    for (std::size_t c = 1; c + 1 < g.ncols(); ++c) {
      const std::size_t rs[] = {r, r - 1, r + 1, r, r};
      const std::size_t cs[] = {c, c, c, c - 1, c + 1};
      bool ok = true;
      for (int k = 0; k < 5; ++k) ok = ok && g.valid(rs[k], cs[k]);
      if (!ok) continue;
      const double lap = (g(r - 1, c) + g(r + 1, c) + g(r, c - 1) + g(r, c + 1) - 4.0 * g(r, c)) / (h * h);
      out(r, c) = -lap;
    }
  return out;
}

/// Point-to-segment distance by projection parameter clamping.
inline double segment_distance_oracle(double px, double py, prospect::geo::Vec2 a, prospect::geo::Vec2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  const double qx = a.x + t * vx - px, qy = a.y + t * vy - py;
  return std::sqrt(qx * qx + qy * qy);
}

inline Grid distance_oracle(const prospect::geo::FeatureSet& fs, const GridHeader& h) {
  Grid out(h);
  for (std::size_t r = 0; r < h.nrows; ++r)
    for (std::size_t c = 0; c < h.ncols; ++c) {
      double best = INFINITY;
      for (const auto& g : fs.geometries) {
        if (g.vertices.size() == 1) {
          best = std::min(best, segment_distance_oracle(cell_x(h, c), cell_y(h, r), g.vertices[0], g.vertices[0]));
          continue;
        }
        for (std::size_t k = 0; k + 1 < g.vertices.size(); ++k)
          best = std::min(best, segment_distance_oracle(cell_x(h, c), cell_y(h, r), g.vertices[k], g.vertices[k + 1]));
      }
      out(r, c) = best;
    }
  return out;
}

/// IDW over all samples, plain weighted sum.
inline Grid idw_oracle(const std::vector<prospect::geo::PointSample>& s, const GridHeader& h, double power) {
  Grid out(h);
  for (std::size_t r = 0; r < h.nrows; ++r)
    for (std::size_t c = 0; c < h.ncols; ++c) {
      long double num = 0.0L, den = 0.0L;
      for (const auto& p : s) {
        const double dx = p.x - cell_x(h, c), dy = p.y - cell_y(h, r);
        const long double w = 1.0L / std::pow(std::sqrt(static_cast<long double>(dx * dx + dy * dy)), power);
        num += w * p.value;
        den += w;
      }
      out(r, c) = static_cast<double>(num / den);
    }
  return out;
}

/// Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Metric oracles

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count_oracle(const std::vector<double>& pred, const std::vector<double>& truth) {
  Counts k;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1.0 && truth[i] == 1.0) k.tp++;
    if (pred[i] == 1.0 && truth[i] == 0.0) k.fp++;
    if (pred[i] == 0.0 && truth[i] == 1.0) k.fn++;
    if (pred[i] == 0.0 && truth[i] == 0.0) k.tn++;
  }
  return k;
}

/// Kappa with the chance term accumulated in integer arithmetic.
inline double kappa_oracle(const Counts& k) {
  const std::uint64_t n = k.tp + k.fp + k.fn + k.tn;
  const std::uint64_t agree = k.tp + k.tn;
  const std::uint64_t chance = (k.tp + k.fp) * (k.tp + k.fn) + (k.fn + k.tn) * (k.fp + k.tn);
  const double po = static_cast<double>(agree) / static_cast<double>(n);
  const double pe = static_cast<double>(chance) / (static_cast<double>(n) * static_cast<double>(n));
  return (po - pe) / (1.0 - pe);
}

inline double rmse_oracle(const std::vector<double>& p, const std::vector<double>& o) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - o[i]) * (p[i] - o[i]);
  return std::sqrt(s / static_cast<double>(p.size()));
}

/// Pearson r from its definition: centred cross products over centred norms.
inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Pearson r via the one-pass sums-of-products formula in extended precision.
inline double pearson_sums(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

// ---------------------------------------------------------------------------
// MLP and ANFIS fixtures

inline prospect::mlp::Weights random_mlp(Rng& rng, std::vector<std::size_t> sizes, double scale = 1.0) {
  prospect::mlp::Topology t;
  t.layer_sizes = std::move(sizes);
  auto w = prospect::mlp::zero_weights(t);
  for (auto& l : w.layers) {
    for (Eigen::Index i = 0; i < l.w.size(); ++i) l.w.data()[i] = rng.uniform(-scale, scale);
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = rng.uniform(-scale, scale);
  }
  return w;
}

inline std::vector<prospect::mlp::Pattern> random_patterns(Rng& rng, std::size_t n, std::size_t in, std::size_t out) {
  std::vector<prospect::mlp::Pattern> p(n);
  for (auto& q : p) {
    q.input.resize(static_cast<Eigen::Index>(in));
    q.target.resize(static_cast<Eigen::Index>(out));
    for (Eigen::Index i = 0; i < q.input.size(); ++i) q.input(i) = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < q.target.size(); ++i) q.target(i) = rng.uniform(-1.0, 1.0);
  }
  return p;
}

/// E = 1/2 sum ||t - o||^2, evaluated by forward passes only.
inline double half_sse(const prospect::mlp::Weights& w, const std::vector<prospect::mlp::Pattern>& p) {
  double s = 0.0;
  for (const auto& q : p) s += 0.5 * (q.target - prospect::mlp::predict(w, q.input)).squaredNorm();
  return s;
}

inline prospect::anfis::Model random_anfis(Rng& rng, std::size_t inputs, std::size_t rules) {
  auto m = prospect::anfis::make_model(inputs, rules);
  for (auto& g : m.premise) g = {rng.uniform(0.0, 1.0), rng.uniform(0.2, 0.8)};
  for (Eigen::Index i = 0; i < m.consequent.size(); ++i) m.consequent.data()[i] = rng.uniform(-2.0, 2.0);
  return m;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(lo, hi);
  return x;
}

/// ANFIS output from the rule formula: products of Gaussians, weighted mean of linear consequents.
inline double anfis_oracle(const prospect::anfis::Model& m, const Eigen::VectorXd& x) {
  long double num = 0, den = 0;
  for (std::size_t r = 0; r < m.n_rules; ++r) {
    long double w = 1;
    for (std::size_t d = 0; d < m.n_inputs; ++d) {
      const auto& g = m.mf(r, d);
      const long double u = (x(static_cast<Eigen::Index>(d)) - g.center) / g.sigma;
      w *= std::exp(-0.5L * u * u);
    }
    long double f = m.consequent(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m.n_inputs));
    for (std::size_t d = 0; d < m.n_inputs; ++d)
      f += m.consequent(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) * x(static_cast<Eigen::Index>(d));
    num += w * f;
    den += w;
  }
  return static_cast<double>(num / den);
}

inline double anfis_mse_oracle(const prospect::anfis::Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double e = anfis_oracle(m, x.row(i).transpose()) - y(i);
    s += e * e;
  }
  return s / static_cast<double>(x.rows());
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace testing_support
