#include <gtest/gtest.h>

#include "prospect/geoprocess.hpp"
#include "support.hpp"

using namespace prospect;
using namespace prospect::geo;
using testing_support::header;

namespace {

std::vector<PointSample> random_samples(Rng& rng, const GridHeader& h, std::size_t n) {
  std::vector<PointSample> s(n);
  const double w = static_cast<double>(h.ncols) * h.cellsize, ht = static_cast<double>(h.nrows) * h.cellsize;
  for (auto& p : s) p = {h.xll + rng.uniform(-0.2, 1.2) * w, h.yll + rng.uniform(-0.2, 1.2) * ht, rng.uniform(-50, 50)};
  return s;
}

FeatureSet random_polylines(Rng& rng, const GridHeader& h, std::size_t n) {
  FeatureSet fs;
  const double w = static_cast<double>(h.ncols) * h.cellsize, ht = static_cast<double>(h.nrows) * h.cellsize;
  for (std::size_t i = 0; i < n; ++i) {
    Geometry g;
    const auto nv = 1 + rng.below(4);
    for (std::uint64_t k = 0; k < nv; ++k) g.vertices.push_back({h.xll + rng.uniform(-0.3, 1.3) * w, h.yll + rng.uniform(-0.3, 1.3) * ht});
    fs.geometries.push_back(g);
  }
  return fs;
}

// Distance to a segment as the smaller of the endpoint distances and, when
// the foot of the perpendicular falls inside, the line distance.
double segment_distance_by_cases(double px, double py, Vec2 a, Vec2 b) {
  const double da = std::hypot(px - a.x, py - a.y), db = std::hypot(px - b.x, py - b.y);
  double d = std::min(da, db);
  const double vx = b.x - a.x, vy = b.y - a.y, len = std::hypot(vx, vy);
  if (len > 0.0) {
    const double along = ((px - a.x) * vx + (py - a.y) * vy) / len;
    if (along >= 0.0 && along <= len) d = std::min(d, std::abs((px - a.x) * vy - (py - a.y) * vx) / len);
  }
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// IDW

TEST(Idw, ExactAtSamplePoint) {
  const auto h = header(3, 3, 10.0);
  std::vector<PointSample> s = {{15.0, 15.0, 42.0}, {0.0, 0.0, -3.0}};
  const auto g = idw_interpolate(s, h);
  EXPECT_EQ(g(1, 1), 42.0);
}

TEST(Idw, EquidistantPairGivesMean) {
  const auto h = header(1, 1, 2.0);
  std::vector<PointSample> s = {{-4.0, 1.0, 10.0}, {6.0, 1.0, 20.0}};
  EXPECT_DOUBLE_EQ(idw_interpolate(s, h)(0, 0), 15.0);
}

TEST(Idw, EmptyAndBadArguments) {
  const auto h = header(2, 2);
  EXPECT_THROW(idw_interpolate({}, h), InputError);
  std::vector<PointSample> s = {{0, 0, 1}};
  EXPECT_THROW(idw_interpolate(s, h, 0.0), InputError);
  EXPECT_THROW(idw_interpolate(s, h, 2.0, std::size_t{0}), InputError);
}

TEST(Idw, MatchesBruteForceAndStaysInRange) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const auto h = header(20, 20, rng.uniform(1, 100), rng.uniform(-1e4, 1e4), rng.uniform(-1e4, 1e4));
    const auto s = random_samples(rng, h, 1 + rng.below(15));
    const double power = rng.uniform(0.5, 4.0);
    const auto g = idw_interpolate(s, h, power);
    const auto o = testing_support::idw_oracle(s, h, power);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : s) {
      lo = std::min(lo, p.value);
      hi = std::max(hi, p.value);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(g[i], o[i], 1e-9);
      EXPECT_GE(g[i], lo - 1e-9);
      EXPECT_LE(g[i], hi + 1e-9);
    }
  }
}

TEST(Idw, NearestNeighbourLimit) {
  const auto h = header(1, 1);
  std::vector<PointSample> s = {{0.5, 1.5, 1.0}, {0.5, 3.5, 100.0}, {0.5, -0.5, 3.0}};
  // Cell center (0.5, 0.5): samples 0 and 2 at distance 1, sample 1 at 3.
  EXPECT_DOUBLE_EQ(idw_interpolate(s, h, 2.0, std::size_t{2})(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(idw_interpolate(s, h, 2.0, std::size_t{1})(0, 0), 1.0);
}

// ---------------------------------------------------------------------------
// Kriging

TEST(Kriging, ExactAtSampleWithZeroNugget) {
  const auto h = header(4, 4, 10.0);
  std::vector<PointSample> s = {{15, 15, 3.0}, {35, 5, -1.0}, {5, 35, 8.0}};
  Variogram v{VariogramModel::spherical, 0.0, 10.0, 50.0};
  const auto g = kriging_interpolate(s, h, v);
  EXPECT_EQ(g(2, 1), 3.0);
}

TEST(Kriging, ConstantSamplesGiveConstantField) {
  Rng rng(4);
  const auto h = header(8, 8, 5.0);
  auto s = random_samples(rng, h, 6);
  for (auto& p : s) p.value = 7.25;
  for (auto model : {VariogramModel::spherical, VariogramModel::exponential}) {
    const auto g = kriging_interpolate(s, h, {model, 0.5, 3.0, 20.0});
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 7.25, 1e-9);
  }
}

TEST(Kriging, FourSamplesMatchHandBuiltSystem) {
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto h = header(5, 5, 10.0);
    const auto s = random_samples(rng, h, 4);
    const Variogram v{t % 2 ? VariogramModel::exponential : VariogramModel::spherical, rng.uniform(0, 1),
                      rng.uniform(2, 5), rng.uniform(20, 80)};
    const auto g = kriging_interpolate(s, h, v);
    auto gamma = [&](double d) {
      if (d == 0.0) return 0.0;
      if (v.model == VariogramModel::spherical)
        return d >= v.range ? v.sill : v.nugget + (v.sill - v.nugget) * (1.5 * d / v.range - 0.5 * std::pow(d / v.range, 3));
      return v.nugget + (v.sill - v.nugget) * (1.0 - std::exp(-3.0 * d / v.range));
    };
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 5; ++c) {
        std::vector<std::vector<double>> a(5, std::vector<double>(5, 1.0));
        std::vector<double> b(5, 1.0);
        a[4][4] = 0.0;
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) a[i][j] = gamma(std::hypot(s[i].x - s[j].x, s[i].y - s[j].y));
          b[i] = gamma(std::hypot(s[i].x - testing_support::cell_x(h, c), s[i].y - testing_support::cell_y(h, r)));
        }
        const auto lambda = testing_support::gauss_solve(a, b);
        double z = 0.0;
        for (int i = 0; i < 4; ++i) z += lambda[i] * s[i].value;
        EXPECT_NEAR(g(r, c), z, 1e-9);
      }
  }
}

TEST(Kriging, DuplicateLocationsNamed) {
  const auto h = header(2, 2);
  std::vector<PointSample> s = {{0, 0, 1}, {1, 1, 2}, {1, 1, 3}};
  try {
    kriging_interpolate(s, h, {VariogramModel::spherical, 0, 1, 5});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("samples 1 and 2"), std::string::npos) << e.what();
  }
}

TEST(Kriging, VariogramValidation) {
  const auto h = header(2, 2);
  std::vector<PointSample> s = {{0, 0, 1}, {1, 1, 2}};
  EXPECT_THROW(kriging_interpolate(s, h, {VariogramModel::spherical, 2, 1, 5}), InputError);
  EXPECT_THROW(kriging_interpolate(s, h, {VariogramModel::spherical, 0, 1, 0}), InputError);
  EXPECT_THROW(kriging_interpolate(std::vector<PointSample>{{0, 0, 1}}, h, {}), InputError);
  Variogram v{VariogramModel::spherical, 0.2, 1.0, 10.0};
  EXPECT_EQ(v(0.0), 0.0);
  EXPECT_EQ(v(10.0), 1.0);
  EXPECT_EQ(v(25.0), 1.0);
}

// ---------------------------------------------------------------------------
// Distance

TEST(Distance, ZeroOnFeature) {
  const auto h = header(3, 3);
  FeatureSet fs{FeatureKind::fault_lines, {{{{0.5, 0.5}, {2.5, 0.5}}}}};
  const auto g = distance_transform(fs, h);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(g(2, c), 0.0);
  EXPECT_EQ(g(0, 1), 2.0);
}

TEST(Distance, ThreeFourFive) {
  const auto h = header(10, 10);
  FeatureSet fs{FeatureKind::closure_centers, {{{{2.5, 7.5}}}}};  // cell (2, 2)
  const auto g = distance_transform(fs, h);
  EXPECT_EQ(g(2, 2), 0.0);
  EXPECT_EQ(g(6, 5), 5.0);  // 3 right, 4 down
}

TEST(Distance, EmptyFeatureSet) {
  EXPECT_THROW(distance_transform(FeatureSet{}, header(2, 2)), InputError);
  FeatureSet bad{FeatureKind::fault_lines, {Geometry{}}};
  EXPECT_THROW(distance_transform(bad, header(2, 2)), InputError);
}

TEST(Distance, RandomPolylinesMatchOracles) {
  Rng rng(33);
  for (int t = 0; t < 20; ++t) {
    const auto h = header(20, 20, rng.uniform(0.5, 20), rng.uniform(-100, 100), rng.uniform(-100, 100));
    const auto fs = random_polylines(rng, h, 1 + rng.below(4));
    const auto g = distance_transform(fs, h);
    const auto o = testing_support::distance_oracle(fs, h);
    for (std::size_t r = 0; r < 20; ++r)
      for (std::size_t c = 0; c < 20; ++c) {
        EXPECT_EQ(g(r, c), o(r, c));
        double by_cases = INFINITY;
        for (const auto& geom : fs.geometries) {
          const auto& v = geom.vertices;
          if (v.size() == 1) by_cases = std::min(by_cases, segment_distance_by_cases(h.center_x(c), h.center_y(r), v[0], v[0]));
          for (std::size_t k = 0; k + 1 < v.size(); ++k)
            by_cases = std::min(by_cases, segment_distance_by_cases(h.center_x(c), h.center_y(r), v[k], v[k + 1]));
        }
        EXPECT_NEAR(g(r, c), by_cases, 1e-9 * std::max(1.0, by_cases));
      }
  }
}

// ---------------------------------------------------------------------------
// TRI and curvature

TEST(Tri, ConstantIsZero) {
  const auto g = tri(Grid(header(5, 6), 3.0));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], 0.0);
}

TEST(Tri, CenterWithUnitNeighbours) {
  Grid g(header(3, 3), 1.0);
  g(1, 1) = 0.0;
  EXPECT_DOUBLE_EQ(tri(g)(1, 1), std::sqrt(8.0));
  EXPECT_NEAR(tri(g)(1, 1), 2.8284271, 1e-7);
}

TEST(Tri, RandomGridsMatchOracleExactly) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto g = testing_support::random_grid(rng, 20, 20, 0.1);
    EXPECT_TRUE(tri(g) == testing_support::tri_oracle(g)) << "instance " << t;
  }
}

TEST(Curvature, PlaneIsFlat) {
  auto h = header(6, 7);
  Grid g(h);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 7; ++c) g(r, c) = 2.0 * h.center_x(c) + 3.0 * h.center_y(r);
  const auto k = curvature(g);
  for (std::size_t r = 1; r < 5; ++r)
    for (std::size_t c = 1; c < 6; ++c) EXPECT_EQ(k(r, c), 0.0);
  EXPECT_FALSE(k.valid(0, 0));
  EXPECT_FALSE(k.valid(5, 3));
}

TEST(Curvature, QuadraticsAreExact) {
  auto h = header(7, 7);
  Grid xx(h), bowl(h);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 7; ++c) {
      const double x = h.center_x(c), y = h.center_y(r);
      xx(r, c) = x * x;
      bowl(r, c) = -(x * x + y * y);
    }
  const auto k1 = curvature(xx), k2 = curvature(bowl);
  for (std::size_t r = 1; r < 6; ++r)
    for (std::size_t c = 1; c < 6; ++c) {
      EXPECT_EQ(k1(r, c), -2.0);
      EXPECT_EQ(k2(r, c), 4.0);
    }
}

TEST(Curvature, TooSmallAndNodata) {
  EXPECT_THROW(curvature(Grid(header(2, 5), 0.0)), DimensionError);
  Grid g(header(4, 4), 1.0);
  g(1, 2) = g.nodata();
  const auto k = curvature(g);
  EXPECT_FALSE(k.valid(1, 1));
  EXPECT_FALSE(k.valid(2, 2));
  EXPECT_TRUE(k.valid(2, 1));
}

TEST(Curvature, RandomGridsMatchOracle) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto g = testing_support::random_grid(rng, 20, 20, 0.05);
    const auto k = curvature(g), o = testing_support::curvature_oracle(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ASSERT_EQ(k.valid(i), o.valid(i));
      if (k.valid(i)) EXPECT_NEAR(k[i], o[i], 1e-9 * std::max(1.0, std::abs(o[i])));
    }
  }
}

// ---------------------------------------------------------------------------
// Fuzzy membership and classification

TEST(Fuzzy, LinearEndpoints) {
  FuzzyParams dec{FuzzyShape::linear_decreasing, 2.0, 6.0};
  EXPECT_EQ(fuzzy_membership(2.0, dec), 1.0);
  EXPECT_EQ(fuzzy_membership(6.0, dec), 0.0);
  EXPECT_EQ(fuzzy_membership(4.0, dec), 0.5);
  FuzzyParams inc{FuzzyShape::linear_increasing, 2.0, 6.0};
  EXPECT_EQ(fuzzy_membership(2.0, inc), 0.0);
  EXPECT_EQ(fuzzy_membership(7.0, inc), 1.0);
}

TEST(Fuzzy, SmallAtMidpointIsHalf) {
  for (double spread : {0.5, 1.0, 5.0, 17.0}) EXPECT_EQ(fuzzy_membership(3.0, {FuzzyShape::small, 3.0, spread}), 0.5);
}

TEST(Fuzzy, LargeHandValue) {
  EXPECT_DOUBLE_EQ(fuzzy_membership(10.0, {FuzzyShape::large, 5.0, 2.0}), 0.8);
  EXPECT_DOUBLE_EQ(fuzzy_membership(10.0, {FuzzyShape::small, 5.0, 2.0}), 0.2);
}

TEST(Fuzzy, NonPositiveInputsClamp) {
  EXPECT_NEAR(fuzzy_membership(0.0, {FuzzyShape::small, 5.0, 2.0}), 1.0, 1e-15);
  EXPECT_NEAR(fuzzy_membership(-3.0, {FuzzyShape::large, 5.0, 2.0}), 0.0, 1e-15);
}

TEST(Fuzzy, InvalidParams) {
  Grid g(header(2, 2), 1.0);
  EXPECT_THROW(fuzzy_normalize(g, {FuzzyShape::linear_increasing, 3.0, 3.0}), InputError);
  EXPECT_THROW(fuzzy_normalize(g, {FuzzyShape::small, 0.0, 2.0}), InputError);
  EXPECT_THROW(fuzzy_normalize(g, {FuzzyShape::large, 1.0, -1.0}), InputError);
}

TEST(Fuzzy, OutputInUnitIntervalAndNodataKept) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto g = testing_support::random_grid(rng, 10, 10, 0.2, -10, 10);
    const FuzzyShape shapes[] = {FuzzyShape::linear_increasing, FuzzyShape::linear_decreasing, FuzzyShape::small,
                                 FuzzyShape::large};
    const FuzzyParams p{shapes[t % 4], rng.uniform(0.1, 3), rng.uniform(3.5, 8)};
    const auto f = fuzzy_normalize(g, p);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_EQ(f.valid(i), g.valid(i));
      if (f.valid(i)) {
        EXPECT_GE(f[i], 0.0);
        EXPECT_LE(f[i], 1.0);
      }
    }
  }
}

TEST(Classify, ThresholdRules) {
  Grid g(header(1, 4), std::vector<double>{0.1, 0.2, 0.3, 0.4});
  const auto below = classify_threshold(g, 0.9);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(below[i], 0.0);
  const auto tie = classify_threshold(g, 0.3);
  EXPECT_EQ(tie[2], 1.0);
  EXPECT_EQ(tie[1], 0.0);
}

TEST(Classify, RandomMatchesPerCellComparison) {
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto g = testing_support::random_grid(rng, 15, 15, 0.1);
    const double th = rng.uniform(-50, 50);
    const auto c = classify_threshold(g, th);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.valid(i)) EXPECT_FALSE(c.valid(i));
      else EXPECT_EQ(c[i], g[i] >= th ? 1.0 : 0.0);
    }
  }
}

TEST(Quantize, TenEqualBinsAtMidpoints) {
  Grid g(header(1, 5), std::vector<double>{0.0, 0.05, 0.5, 0.99, 1.0});
  const auto q = quantize_equal_interval(g, 10);
  EXPECT_DOUBLE_EQ(q[0], 0.05);
  EXPECT_DOUBLE_EQ(q[1], 0.05);
  EXPECT_DOUBLE_EQ(q[2], 0.55);
  EXPECT_DOUBLE_EQ(q[3], 0.95);
  EXPECT_DOUBLE_EQ(q[4], 0.95);
  Grid flat(header(2, 2), 4.0);
  EXPECT_TRUE(quantize_equal_interval(flat) == flat);
}

TEST(Negate, FlipsValidCells) {
  Grid g(header(1, 3), std::vector<double>{1.0, kDefaultNodata, -2.0});
  const auto n = negate(g);
  EXPECT_EQ(n[0], -1.0);
  EXPECT_FALSE(n.valid(1));
  EXPECT_EQ(n[2], 2.0);
}

// ---------------------------------------------------------------------------
// Ingestion

TEST(Ingest, PointSamplesCsv) {
  const auto s = parse_point_samples("x,y,value\n1,2,3\n# comment\n\n4.5, 5 , -6\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].x, 4.5);
  EXPECT_EQ(s[1].value, -6.0);
  EXPECT_THROW(parse_point_samples("a,b,c\n1,2,3\n"), ParseError);
  EXPECT_THROW(parse_point_samples("x,y,value\n1,2\n"), ParseError);
}

TEST(Ingest, FeaturesRoundTrip) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    auto fs = random_polylines(rng, header(10, 10, 3.0), 1 + rng.below(5));
    fs.kind = FeatureKind::anticline_axes;
    const auto back = parse_features(format_features(fs), FeatureKind::anticline_axes);
    ASSERT_EQ(back.geometries.size(), fs.geometries.size());
    for (std::size_t i = 0; i < fs.geometries.size(); ++i)
      for (std::size_t k = 0; k < fs.geometries[i].vertices.size(); ++k) {
        EXPECT_EQ(back.geometries[i].vertices[k].x, fs.geometries[i].vertices[k].x);
        EXPECT_EQ(back.geometries[i].vertices[k].y, fs.geometries[i].vertices[k].y);
      }
  }
  EXPECT_THROW(parse_features("LINE 1 2\n", FeatureKind::fault_lines), ParseError);
  EXPECT_THROW(parse_features("POINT 1 2 3 4\n", FeatureKind::fault_lines), ParseError);
  EXPECT_THROW(parse_features("CIRCLE 1 2\n", FeatureKind::fault_lines), ParseError);
}
