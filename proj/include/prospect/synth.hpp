#pragma once

// Synthetic basin: planted elliptical oil fields plus raw inputs for the
// default 17-factor configuration, written in the formats the pipeline reads.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "prospect/common.hpp"
#include "prospect/geochem.hpp"
#include "prospect/geoprocess.hpp"
#include "prospect/raster.hpp"

namespace prospect::synth {

namespace fs = std::filesystem;

struct Field {
  double cx = 0.0, cy = 0.0;  // world coordinates
  double a = 0.0, b = 0.0;    // semi-axes, metres (a >= b)
  double angle = 0.0;         // major axis direction, radians
  double height = 0.0;        // dome amplitude, metres

  /// Squared normalised elliptical radius; <= 1 inside the field.
  double r2(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = dx * std::cos(angle) + dy * std::sin(angle);
    const double v = -dx * std::sin(angle) + dy * std::cos(angle);
    return (u / a) * (u / a) + (v / b) * (v / b);
  }
  bool contains(double x, double y) const { return r2(x, y) <= 1.0; }
  /// Laplacian magnitude of the paraboloid cap H (1 - r^2).
  double dome_curvature() const { return 2.0 * height * (1.0 / (a * a) + 1.0 / (b * b)); }
};

struct Basin {
  GridHeader header;
  std::vector<Field> fields;
  Grid truth;
  Grid structure;  // depth to the reservoir top, metres (positive down)
  geo::FeatureSet anticlines;
  geo::FeatureSet faults;
  geo::FeatureSet gravity_anomalies;
  std::vector<geochem::RockEvalRecord> wells;
  std::vector<geo::PointSample> bouguer;
  std::string config;
};

inline GridHeader default_header() {
  GridHeader h;
  h.ncols = 200;
  h.nrows = 200;
  h.xll = 500000.0;
  h.yll = 3400000.0;
  h.cellsize = 100.0;
  h.nodata_value = kDefaultNodata;
  return h;
}

namespace detail {

inline double proximity(const std::vector<Field>& fields, double x, double y) {
  double p = 0.0;
  for (const auto& f : fields) {
    const double r = std::sqrt(f.r2(x, y));
    p = std::max(p, r <= 1.0 ? 1.0 : std::exp(-(r - 1.0) * (r - 1.0) / 0.35));
  }
  return p;
}

inline bool inside_any(const std::vector<Field>& fields, double x, double y) {
  for (const auto& f : fields)
    if (f.contains(x, y)) return true;
  return false;
}

inline geo::Geometry line_through(double cx, double cy, double angle, double half_length) {
  const double ux = std::cos(angle), uy = std::sin(angle);
  return {{{cx - ux * half_length, cy - uy * half_length}, {cx + ux * half_length, cy + uy * half_length}}};
}

inline std::string format_wells_csv(const std::vector<geochem::RockEvalRecord>& recs) {
  std::string s = "well_id,x,y,S1,S2,S3,TOC,Tmax\n";
  for (const auto& r : recs)
    s += r.well_id + "," + format_real(r.x) + "," + format_real(r.y) + "," + format_real(r.s1) + "," +
         format_real(r.s2) + "," + format_real(r.s3) + "," + format_real(r.toc) + "," + format_real(r.tmax) + "\n";
  return s;
}

inline std::string format_points_csv(const std::vector<geo::PointSample>& pts) {
  std::string s = "x,y,value\n";
  for (const auto& p : pts) s += format_real(p.x) + "," + format_real(p.y) + "," + format_real(p.value) + "\n";
  return s;
}

}  // namespace detail

/// Default 17-factor configuration for a generated basin.
inline std::string default_config(const Basin& b) {
  double min_curv = std::numeric_limits<double>::infinity();
  for (const auto& f : b.fields) min_curv = std::min(min_curv, f.dome_curvature());

  std::string s;
  s += "# Synthetic basin, default 17-factor configuration\n";
  s += "[run]\n";
  s += "target = truth.asc\n";
  s += "output = out\n";
  s += "seed = 42\n";
  s += "fractions = 0.70 0.15 0.15\n";
  s += "threshold = 0.5\n";

  using geochem::Index;
  const Index order[] = {Index::toc, Index::pp, Index::tmax, Index::pi, Index::oi, Index::hi};
  for (Index idx : order) {
    const std::string name = geochem::index_name(idx);
    const std::string shape = idx == Index::oi ? "linear_decreasing" : "linear_increasing";
    s += "\n[factor " + name + "_mean]\nkind = wells\nsource = wells.csv\nindex = " + name +
         "\nstat = mean\nchain = kriging model=spherical | fuzzy " + shape + " auto\n";
    s += "\n[factor " + name + "_max]\nkind = wells\nsource = wells.csv\nindex = " + name +
         "\nstat = max\nchain = idw power=2 | fuzzy " + shape + " auto\n";
  }
  s += "\n[factor gravity]\nkind = features\nsource = gravity_anomalies.txt\nfeature_kind = anomaly_centers\n"
       "chain = distance | fuzzy linear_decreasing auto\n";
  s += "\n[factor anticlines]\nkind = features\nsource = anticlines.txt\nfeature_kind = anticline_axes\n"
       "chain = distance | bin10 | fuzzy small auto\n";
  s += "\n[factor faults]\nkind = features\nsource = faults.txt\nfeature_kind = fault_lines\n"
       "chain = distance | fuzzy linear_decreasing auto\n";
  s += "\n[factor roughness]\nkind = grid\nsource = structure.asc\nchain = tri | fuzzy small auto\n";
  s += "\n[factor curvature]\nkind = grid\nsource = structure.asc\nchain = negate | curvature | fuzzy large " +
       format_real(0.5 * min_curv) + " 5\n";

  s += "\n[model ann_17_10_5]\ntype = mlp\nhidden = 10 5\nalgorithm = levenberg_marquardt\nerror_goal = 0.005\n";
  s += "\n[model ann_17_10]\ntype = mlp\nhidden = 10\nalgorithm = levenberg_marquardt\nerror_goal = 0.005\n";
  s += "\n[model anfis]\ntype = anfis\nradius = 0.5\nepochs = 300\nerror_goal = 0.005\n";
  return s;
}

/// Generates the basin in memory. Throws InputError for grids under 100x100.
inline Basin generate(std::uint64_t seed, GridHeader header = default_header()) {
  header.validate();
  if (header.nrows < 100 || header.ncols < 100)
    throw InputError("synthetic basin needs at least 100x100 cells, got " + std::to_string(header.nrows) + "x" +
                     std::to_string(header.ncols));
  Rng rng(seed);
  Basin b;
  b.header = header;
  const double cs = header.cellsize;
  const double width = static_cast<double>(header.ncols) * cs;
  const double height = static_cast<double>(header.nrows) * cs;
  const double scale = static_cast<double>(std::min(header.nrows, header.ncols)) / 200.0;
  const double pi = 3.14159265358979323846;

  // Fields: non-overlapping ellipses, resampled until coverage is 2-20%.
  for (;;) {
    b.fields.clear();
    const auto n_fields = 3 + static_cast<std::size_t>(rng.below(4));
    for (std::size_t tries = 0; b.fields.size() < n_fields && tries < 1000; ++tries) {
      Field f;
      f.a = rng.uniform(12.0, 26.0) * scale * cs;
      f.b = f.a * rng.uniform(0.4, 0.65);
      f.angle = rng.uniform(0.0, pi);
      const double margin = f.a + 4.0 * cs;
      f.cx = header.xll + rng.uniform(margin, width - margin);
      f.cy = header.yll + rng.uniform(margin, height - margin);
      f.height = rng.uniform(150.0, 300.0);
      bool clear = true;
      for (const auto& g : b.fields)
        clear = clear && std::hypot(f.cx - g.cx, f.cy - g.cy) > f.a + g.a + 6.0 * cs;
      if (clear) b.fields.push_back(f);
    }
    if (b.fields.size() < 3) continue;
    b.truth = Grid(header, 0.0);
    std::size_t inside = 0;
    for (std::size_t r = 0; r < header.nrows; ++r)
      for (std::size_t c = 0; c < header.ncols; ++c)
        if (detail::inside_any(b.fields, header.center_x(c), header.center_y(r))) {
          b.truth(r, c) = 1.0;
          ++inside;
        }
    const double cover = static_cast<double>(inside) / static_cast<double>(header.size());
    if (cover >= 0.02 && cover <= 0.20) break;
  }

  // Anticline axes through every field along its major axis, plus barren ones.
  b.anticlines.kind = geo::FeatureKind::anticline_axes;
  for (const auto& f : b.fields) b.anticlines.geometries.push_back(detail::line_through(f.cx, f.cy, f.angle, 2.5 * f.a));
  const auto n_barren = 1 + rng.below(2);
  for (std::uint64_t i = 0; i < n_barren; ++i) {
    const double x = header.xll + rng.uniform(0.15, 0.85) * width;
    const double y = header.yll + rng.uniform(0.15, 0.85) * height;
    b.anticlines.geometries.push_back(detail::line_through(x, y, rng.uniform(0.0, pi), 0.2 * std::min(width, height)));
  }

  // Faults: some flank fields, the rest random.
  b.faults.kind = geo::FeatureKind::fault_lines;
  for (const auto& f : b.fields) {
    if (rng.uniform01() < 0.5) continue;
    const double side = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    const double off = f.b + rng.uniform(2.0, 6.0) * cs;
    const double x = f.cx - std::sin(f.angle) * off * side;
    const double y = f.cy + std::cos(f.angle) * off * side;
    b.faults.geometries.push_back(detail::line_through(x, y, f.angle + rng.uniform(-0.3, 0.3), 1.5 * f.a));
  }
  const auto n_random_faults = 2 + rng.below(3);
  for (std::uint64_t i = 0; i < n_random_faults; ++i) {
    geo::Geometry g;
    double x = header.xll + rng.uniform01() * width;
    double y = header.yll + rng.uniform01() * height;
    double ang = rng.uniform(0.0, 2.0 * pi);
    g.vertices.push_back({x, y});
    for (int k = 0; k < 3; ++k) {
      ang += rng.uniform(-0.4, 0.4);
      x += std::cos(ang) * 0.15 * width;
      y += std::sin(ang) * 0.15 * height;
      g.vertices.push_back({x, y});
    }
    b.faults.geometries.push_back(g);
  }

  // Structure: depth with a regional dip, paraboloid domes at the fields,
  // low folds along every anticline axis and a gentle undulation.
  b.structure = Grid(header, 0.0);
  const double dip_x = rng.uniform(-0.01, 0.01), dip_y = rng.uniform(-0.01, 0.01);
  const double fold_amp = 30.0, fold_w = 10.0 * cs * scale;
  const double wave = rng.uniform(0.0, 2.0 * pi);
  for (std::size_t r = 0; r < header.nrows; ++r) {
    for (std::size_t c = 0; c < header.ncols; ++c) {
      const double x = header.center_x(c), y = header.center_y(r);
      double depth = 2500.0 + dip_x * (x - header.xll) + dip_y * (y - header.yll);
      depth += 10.0 * std::sin(2.0 * pi * (x - header.xll) / (0.8 * width) + wave) *
               std::cos(2.0 * pi * (y - header.yll) / (0.9 * height));
      for (const auto& f : b.fields) {
        const double q = f.r2(x, y);
        if (q < 1.0) depth -= f.height * (1.0 - q);
      }
      for (const auto& g : b.anticlines.geometries) {
        const double d2 = geo::squared_distance_to_segment(x, y, g.vertices[0], g.vertices[1]);
        depth -= fold_amp * std::exp(-d2 / (2.0 * fold_w * fold_w));
      }
      b.structure(r, c) = depth;
    }
  }

  // Wells: random scatter plus three inside every field.
  struct Site {
    double x, y;
  };
  std::vector<Site> sites;
  for (int i = 0; i < 80; ++i)
    sites.push_back({header.xll + rng.uniform(0.02, 0.98) * width, header.yll + rng.uniform(0.02, 0.98) * height});
  for (const auto& f : b.fields) {
    for (int k = 0; k < 3; ++k) {
      const double rr = 0.75 * std::sqrt(rng.uniform01());
      const double t = rng.uniform(0.0, 2.0 * pi);
      const double u = rr * f.a * std::cos(t), v = rr * f.b * std::sin(t);
      sites.push_back({f.cx + u * std::cos(f.angle) - v * std::sin(f.angle),
                       f.cy + u * std::sin(f.angle) + v * std::cos(f.angle)});
    }
  }
  for (std::size_t i = 0; i < sites.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "W%03zu", i + 1);
    const double p = detail::proximity(b.fields, sites[i].x, sites[i].y);
    const bool in = detail::inside_any(b.fields, sites[i].x, sites[i].y);
    const auto n_rec = 1 + rng.below(3);
    for (std::uint64_t k = 0; k < n_rec; ++k) {
      geochem::RockEvalRecord rec;
      rec.well_id = id;
      rec.x = sites[i].x;
      rec.y = sites[i].y;
      rec.toc = std::max(0.2, 0.8 + 1.6 * p + 0.25 * rng.normal());
      rec.tmax = 428.0 + 14.0 * p + 3.0 * rng.normal();
      rec.s1 = std::max(0.05, 0.4 + 1.4 * p + 0.15 * rng.normal());
      // HI bands are disjoint: wells inside a field always exceed the rest.
      const double hi = in ? rng.uniform(4.6, 6.4) : std::clamp(1.6 + 2.2 * p + 0.3 * rng.normal(), 0.5, 4.2);
      rec.s2 = hi * rec.toc;
      const double oi = std::max(0.1, 1.4 - 0.9 * p + 0.12 * rng.normal());
      rec.s3 = oi * rec.toc;
      b.wells.push_back(rec);
    }
  }

  // Bouguer gravity: regional gradient plus highs over the fields.
  for (int i = 0; i < 300; ++i) {
    const double x = header.xll + rng.uniform01() * width, y = header.yll + rng.uniform01() * height;
    double g = -20.0 + 4.0 * (x - header.xll) / width;
    for (const auto& f : b.fields) g += 6.0 * std::exp(-0.5 * f.r2(x, y));
    b.bouguer.push_back({x, y, g + 0.4 * rng.normal()});
  }
  b.gravity_anomalies.kind = geo::FeatureKind::anomaly_centers;
  for (const auto& f : b.fields)
    b.gravity_anomalies.geometries.push_back(
        {{{f.cx + 0.15 * f.b * rng.normal(), f.cy + 0.15 * f.b * rng.normal()}}});
  b.gravity_anomalies.geometries.push_back(
      {{{header.xll + rng.uniform(0.1, 0.9) * width, header.yll + rng.uniform(0.1, 0.9) * height}}});

  b.config = default_config(b);
  return b;
}

/// Writes truth.asc, structure.asc, wells.csv, bouguer.csv, anticlines.txt,
/// faults.txt, gravity_anomalies.txt and synth.cfg into `dir`.
inline Basin generate_synthetic_basin(std::uint64_t seed, const fs::path& dir, GridHeader header = default_header()) {
  Basin b = generate(seed, header);
  fs::create_directories(dir);
  write_ascii_grid(b.truth, dir / "truth.asc");
  write_ascii_grid(b.structure, dir / "structure.asc");
  write_file_atomic(dir / "wells.csv", detail::format_wells_csv(b.wells));
  write_file_atomic(dir / "bouguer.csv", detail::format_points_csv(b.bouguer));
  write_file_atomic(dir / "anticlines.txt", geo::format_features(b.anticlines));
  write_file_atomic(dir / "faults.txt", geo::format_features(b.faults));
  write_file_atomic(dir / "gravity_anomalies.txt", geo::format_features(b.gravity_anomalies));
  write_file_atomic(dir / "synth.cfg", b.config);
  return b;
}

}  // namespace prospect::synth
