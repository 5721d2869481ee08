#pragma once

// Factor-map construction: point interpolation (IDW, ordinary kriging),
// distance rasterisation of vector features, terrain ruggedness, curvature,
// fuzzy membership normalisation and simple classification.
//
// Every operation is a pure function of its inputs and returns a new Grid.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "prospect/common.hpp"
#include "prospect/raster.hpp"

namespace prospect::geo {

struct PointSample {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

enum class FeatureKind { fault_lines, anticline_axes, closure_centers, anomaly_centers };

/// A polyline (two or more vertices) or a single point.
struct Geometry {
  std::vector<Vec2> vertices;
  bool is_point() const { return vertices.size() == 1; }
};

struct FeatureSet {
  FeatureKind kind = FeatureKind::fault_lines;
  std::vector<Geometry> geometries;

  void validate() const {
    for (std::size_t i = 0; i < geometries.size(); ++i) {
      if (geometries[i].vertices.empty()) throw InputError("geometry " + std::to_string(i) + " has no vertices");
      for (const auto& v : geometries[i].vertices)
        if (!std::isfinite(v.x) || !std::isfinite(v.y))
          throw InputError("geometry " + std::to_string(i) + " has a non-finite vertex");
    }
  }
};

// ---------------------------------------------------------------------------
// Interpolation

/// Inverse-distance weighting over the `max_neighbors` nearest samples (all
/// samples when unset). A cell whose center is within 1e-12 map units of a
/// sample takes that sample's value.
inline Grid idw_interpolate(std::span<const PointSample> samples, const GridHeader& header, double power = 2.0,
                            std::optional<std::size_t> max_neighbors = std::nullopt) {
  if (samples.empty()) throw InputError("idw_interpolate: no samples");
  if (!(power > 0.0)) throw InputError("idw_interpolate: power must be positive");
  if (max_neighbors && *max_neighbors == 0) throw InputError("idw_interpolate: max_neighbors must be positive");
  for (const auto& s : samples)
    if (!std::isfinite(s.value) || !std::isfinite(s.x) || !std::isfinite(s.y))
      throw InputError("idw_interpolate: non-finite sample");

  const std::size_t k = std::min(max_neighbors.value_or(samples.size()), samples.size());
  Grid out(header);
  std::vector<std::pair<double, std::size_t>> dist(samples.size());

  for (std::size_t r = 0; r < header.nrows; ++r) {
    const double cy = header.center_y(r);
    for (std::size_t c = 0; c < header.ncols; ++c) {
      const double cx = header.center_x(c);
      std::optional<double> exact;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = std::hypot(samples[i].x - cx, samples[i].y - cy);
        if (d < 1e-12 && !exact) exact = samples[i].value;
        dist[i] = {d, i};
      }
      if (exact) {
        out(r, c) = *exact;
        continue;
      }
      if (k < dist.size()) std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double w = std::pow(dist[j].first, -power);
        num += w * samples[dist[j].second].value;
        den += w;
      }
      out(r, c) = num / den;
    }
  }
  return out;
}

enum class VariogramModel { spherical, exponential };

struct Variogram {
  VariogramModel model = VariogramModel::spherical;
  double nugget = 0.0;
  double sill = 1.0;
  double range = 1.0;

  void validate() const {
    if (!(nugget >= 0.0)) throw InputError("variogram nugget must be >= 0");
    if (!(sill > nugget)) throw InputError("variogram sill must exceed the nugget");
    if (!(range > 0.0)) throw InputError("variogram range must be positive");
  }

  /// Semivariance at lag h; zero at h == 0.
  double operator()(double h) const {
    if (h <= 0.0) return 0.0;
    const double partial = sill - nugget;
    if (model == VariogramModel::spherical) {
      if (h >= range) return sill;
      const double q = h / range;
      return nugget + partial * (1.5 * q - 0.5 * q * q * q);
    }
    // Practical-range convention: 95% of the partial sill is reached at `range`.
    return nugget + partial * (1.0 - std::exp(-3.0 * h / range));
  }
};

/// Spherical model, zero nugget, sill at the sample variance and range at half
/// the grid extent diagonal.
inline Variogram default_variogram(std::span<const PointSample> samples, const GridHeader& header) {
  Variogram v;
  if (!samples.empty()) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.value;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s.value - mean) * (s.value - mean);
    var /= static_cast<double>(samples.size());
    // A constant field has zero variance; any positive sill gives the same result.
    v.sill = var > 0.0 ? var : 1.0;
  }
  const double w = static_cast<double>(header.ncols) * header.cellsize;
  const double h = static_cast<double>(header.nrows) * header.cellsize;
  v.range = 0.5 * std::hypot(w, h);
  return v;
}

/// Ordinary kriging. The (n+1)x(n+1) system with the unbiasedness row is
/// factorised once and solved per cell.
inline Grid kriging_interpolate(std::span<const PointSample> samples, const GridHeader& header,
                                const Variogram& variogram) {
  variogram.validate();
  if (samples.size() < 2) throw InputError("kriging_interpolate: need at least 2 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());

  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      if (std::hypot(samples[i].x - samples[j].x, samples[i].y - samples[j].y) < 1e-12)
        throw NumericalError("kriging_interpolate: singular system, samples " + std::to_string(i) + " and " +
                             std::to_string(j) + " share location (" + format_real(samples[i].x) + ", " +
                             format_real(samples[i].y) + ")");

  Eigen::MatrixXd k(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& a = samples[static_cast<std::size_t>(i)];
      const auto& b = samples[static_cast<std::size_t>(j)];
      k(i, j) = i == j ? 0.0 : variogram(std::hypot(a.x - b.x, a.y - b.y));
    }
    k(i, n) = 1.0;
    k(n, i) = 1.0;
  }
  k(n, n) = 0.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  if (!lu.isInvertible()) throw NumericalError("kriging_interpolate: kriging matrix is singular");

  Grid out(header);
  Eigen::VectorXd rhs(n + 1);
  Eigen::VectorXd values(n);
  for (Eigen::Index i = 0; i < n; ++i) values(i) = samples[static_cast<std::size_t>(i)].value;

  for (std::size_t r = 0; r < header.nrows; ++r) {
    const double cy = header.center_y(r);
    for (std::size_t c = 0; c < header.ncols; ++c) {
      const double cx = header.center_x(c);
      std::optional<double> exact;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        const double d = std::hypot(s.x - cx, s.y - cy);
        if (d < 1e-12 && !exact) exact = s.value;
        rhs(i) = variogram(d);
      }
      if (exact) {
        out(r, c) = *exact;
        continue;
      }
      rhs(n) = 1.0;
      const Eigen::VectorXd lambda = lu.solve(rhs);
      out(r, c) = lambda.head(n).dot(values);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance rasterisation

inline double squared_distance_to_segment(double px, double py, const Vec2& a, const Vec2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
  const double qx = a.x + t * dx - px;
  const double qy = a.y + t * dy - py;
  return qx * qx + qy * qy;
}

/// Euclidean distance from each cell center to the nearest geometry.
inline Grid distance_transform(const FeatureSet& features, const GridHeader& header) {
  if (features.geometries.empty()) throw InputError("distance_transform: empty feature set");
  features.validate();
  Grid out(header);
  for (std::size_t r = 0; r < header.nrows; ++r) {
    const double py = header.center_y(r);
    for (std::size_t c = 0; c < header.ncols; ++c) {
      const double px = header.center_x(c);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& g : features.geometries) {
        const auto& v = g.vertices;
        if (v.size() == 1) {
          best = std::min(best, squared_distance_to_segment(px, py, v[0], v[0]));
          continue;
        }
        for (std::size_t i = 0; i + 1 < v.size(); ++i)
          best = std::min(best, squared_distance_to_segment(px, py, v[i], v[i + 1]));
      }
      out(r, c) = std::sqrt(best);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Terrain attributes

/// Terrain ruggedness: root of the summed squared differences between a cell
/// and its valid 3x3 neighbours.
inline Grid tri(const Grid& g) {
  Grid out(g.header());
  for (std::size_t r = 0; r < g.nrows(); ++r) {
    for (std::size_t c = 0; c < g.ncols(); ++c) {
      if (!g.valid(r, c)) continue;
      const auto w = focal_window(g, r, c);
      const double center = g(r, c);
      double sum = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if ((i != 1 || j != 1) && w[i][j]) sum += (*w[i][j] - center) * (*w[i][j] - center);
      out(r, c) = std::sqrt(sum);
    }
  }
  return out;
}

/// Negative 4-neighbour Laplacian; positive on convex-up surfaces. Border
/// cells and cells with nodata among the five stencil cells are nodata.
inline Grid curvature(const Grid& g) {
  if (g.nrows() < 3 || g.ncols() < 3) throw DimensionError("curvature: grid must be at least 3x3");
  Grid out(g.header());
  const double h2 = g.header().cellsize * g.header().cellsize;
  for (std::size_t r = 1; r + 1 < g.nrows(); ++r) {
    for (std::size_t c = 1; c + 1 < g.ncols(); ++c) {
      if (!g.valid(r, c) || !g.valid(r - 1, c) || !g.valid(r + 1, c) || !g.valid(r, c - 1) || !g.valid(r, c + 1))
        continue;
      const double z = g(r, c);
      const double zxx = (g(r, c + 1) - 2.0 * z + g(r, c - 1)) / h2;
      const double zyy = (g(r - 1, c) - 2.0 * z + g(r + 1, c)) / h2;
      out(r, c) = -(zxx + zyy);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation and classification

enum class FuzzyShape { linear_increasing, linear_decreasing, small, large };

/// For the linear shapes a/b are the min/max; for small/large a is the
/// midpoint and b the spread.
struct FuzzyParams {
  FuzzyShape shape = FuzzyShape::linear_increasing;
  double a = 0.0;
  double b = 1.0;

  void validate() const {
    if (!std::isfinite(a) || !std::isfinite(b)) throw InputError("fuzzy parameters must be finite");
    if (shape == FuzzyShape::linear_increasing || shape == FuzzyShape::linear_decreasing) {
      if (!(a < b)) throw InputError("fuzzy linear membership requires min < max");
    } else if (!(a > 0.0) || !(b > 0.0)) {
      throw InputError("fuzzy small/large membership requires positive midpoint and spread");
    }
  }
};

inline constexpr double kDefaultFuzzySpread = 5.0;

inline double fuzzy_membership(double x, const FuzzyParams& p) {
  switch (p.shape) {
    case FuzzyShape::linear_increasing:
      return std::clamp((x - p.a) / (p.b - p.a), 0.0, 1.0);
    case FuzzyShape::linear_decreasing:
      return std::clamp((p.b - x) / (p.b - p.a), 0.0, 1.0);
    case FuzzyShape::small:
    case FuzzyShape::large: {
      const double xs = x <= 0.0 ? 1e-12 * p.a : x;
      const double e = p.shape == FuzzyShape::small ? p.b : -p.b;
      return 1.0 / (1.0 + std::pow(xs / p.a, e));
    }
  }
  return 0.0;
}

inline Grid fuzzy_normalize(const Grid& g, const FuzzyParams& params) {
  params.validate();
  return map_valid(g, [&](double x) { return fuzzy_membership(x, params); });
}

inline Grid classify_threshold(const Grid& g, double threshold) {
  return map_valid(g, [&](double x) { return x >= threshold ? 1.0 : 0.0; });
}

inline Grid negate(const Grid& g) {
  return map_valid(g, [](double x) { return -x; });
}

/// Equal-interval quantisation into `classes` bins over the valid range; each
/// cell takes the midpoint of its bin. A constant grid maps to itself.
inline Grid quantize_equal_interval(const Grid& g, int classes = 10) {
  if (classes < 1) throw InputError("quantize_equal_interval: classes must be >= 1");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.valid(i)) {
      lo = std::min(lo, g[i]);
      hi = std::max(hi, g[i]);
    }
  if (!(hi > lo)) return g;
  const double width = (hi - lo) / classes;
  return map_valid(g, [&](double x) {
    const int k = std::min(static_cast<int>((x - lo) / width), classes - 1);
    return lo + (k + 0.5) * width;
  });
}

// ---------------------------------------------------------------------------
// Ingestion

/// Reads "x,y,value" CSV.
inline std::vector<PointSample> parse_point_samples(std::string_view text, const std::string& source = "<memory>") {
  std::vector<PointSample> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::size_t pos = 0; pos < text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> cols;
    for (std::size_t p = 0;;) {
      auto comma = line.find(',', p);
      cols.push_back(trim(line.substr(p, comma == std::string_view::npos ? std::string_view::npos : comma - p)));
      if (comma == std::string_view::npos) break;
      p = comma + 1;
    }
    if (!header_seen) {
      if (cols.size() != 3 || lower(cols[0]) != "x" || lower(cols[1]) != "y" || lower(cols[2]) != "value")
        throw ParseError(source + ": line " + std::to_string(line_no) + ": expected header 'x,y,value'");
      header_seen = true;
      continue;
    }
    PointSample s;
    if (cols.size() != 3 || !parse_real(cols[0], s.x) || !parse_real(cols[1], s.y) || !parse_real(cols[2], s.value))
      throw ParseError(source + ": line " + std::to_string(line_no) + ": expected 'x,y,value' numbers");
    if (!std::isfinite(s.value)) throw InputError(source + ": line " + std::to_string(line_no) + ": non-finite value");
    out.push_back(s);
  }
  if (!header_seen) throw ParseError(source + ": missing header 'x,y,value'");
  return out;
}

inline std::vector<PointSample> read_point_samples(const std::filesystem::path& path) {
  return parse_point_samples(read_file(path), path.string());
}

/// Reads one geometry per line: "LINE x1 y1 x2 y2 ..." or "POINT x y".
inline FeatureSet parse_features(std::string_view text, FeatureKind kind, const std::string& source = "<memory>") {
  FeatureSet fs;
  fs.kind = kind;
  std::size_t line_no = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto toks = split_ws(line);
    auto fail = [&](const std::string& why) {
      return ParseError(source + ": line " + std::to_string(line_no) + ": " + why);
    };
    const std::string tag = lower(toks[0]);
    if (tag != "line" && tag != "point") throw fail("expected LINE or POINT, got '" + std::string(toks[0]) + "'");
    if ((toks.size() - 1) % 2 != 0) throw fail("odd number of coordinates");
    Geometry g;
    for (std::size_t i = 1; i + 1 < toks.size(); i += 2) {
      Vec2 v;
      if (!parse_real(toks[i], v.x) || !parse_real(toks[i + 1], v.y)) throw fail("invalid coordinate");
      g.vertices.push_back(v);
    }
    if (tag == "point" && g.vertices.size() != 1) throw fail("POINT takes exactly one coordinate pair");
    if (tag == "line" && g.vertices.size() < 2) throw fail("LINE needs at least two vertices");
    fs.geometries.push_back(std::move(g));
  }
  fs.validate();
  return fs;
}

inline FeatureSet read_features(const std::filesystem::path& path, FeatureKind kind) {
  return parse_features(read_file(path), kind, path.string());
}

inline std::string format_features(const FeatureSet& fs) {
  std::string out;
  for (const auto& g : fs.geometries) {
    out += g.is_point() ? "POINT" : "LINE";
    for (const auto& v : g.vertices) out += " " + format_real(v.x) + " " + format_real(v.y);
    out += '\n';
  }
  return out;
}

}  // namespace prospect::geo
