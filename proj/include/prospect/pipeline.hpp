#pragma once

// Config-driven prospectivity run: factor chains -> sample matrix -> split ->
// model training -> potential maps, metrics and a run manifest.
//
// Config format (one key = value per line, '#' comments):
//
//   [run]
//   target = truth.asc            # binary oil-field grid; defines the geometry
//   output = out
//   seed = 42
//   fractions = 0.70 0.15 0.15
//   threshold = 0.5
//
//   [factor faults]
//   kind = features               # grid | points | features | wells
//   source = faults.txt
//   chain = distance | fuzzy linear_decreasing auto
//
//   [factor hi_max]
//   kind = wells
//   source = wells.csv
//   index = hi                    # oi | pi | pp | hi | tmax | toc
//   stat = max                    # mean | max
//   chain = idw power=2 | fuzzy linear_increasing auto
//
//   [model ann]
//   type = mlp
//   hidden = 10 5
//
//   [model anfis]
//   type = anfis
//   radius = 0.5
//
// Chain steps: idw [power=P] [neighbors=K|all]; kriging [model=spherical|
// exponential] [nugget=N] [sill=S|auto] [range=R|auto]; distance; tri;
// curvature; classify T; bin10; negate; fuzzy SHAPE (auto | A [B]).
// Relative paths resolve against the config file's directory.

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "prospect/anfis.hpp"
#include "prospect/common.hpp"
#include "prospect/evaluate.hpp"
#include "prospect/geochem.hpp"
#include "prospect/geoprocess.hpp"
#include "prospect/mlp.hpp"
#include "prospect/raster.hpp"
#include "prospect/render.hpp"

namespace prospect::pipeline {

namespace fs = std::filesystem;

struct PostconditionError : DataError { using DataError::DataError; };

/// Wraps an error with the pipeline stage it came from, keeping the exit-code class.
struct StageError : std::runtime_error {
  enum class Kind { config, data, training } kind;
  std::string stage;
  StageError(Kind k, std::string st, const std::string& msg)
      : std::runtime_error("stage '" + st + "': " + msg), kind(k), stage(std::move(st)) {}
};

enum class SourceKind { grid, points, features, wells };

struct Step {
  std::string name;
  std::vector<std::string> args;               // positional
  std::map<std::string, std::string> options;  // key=value
  std::string text;                            // as written
};

struct FactorConfig {
  std::string name;
  SourceKind kind = SourceKind::grid;
  fs::path source;
  geochem::Index index = geochem::Index::hi;
  bool use_max = false;
  geo::FeatureKind feature_kind = geo::FeatureKind::fault_lines;
  std::vector<Step> chain;
};

struct MlpModelConfig {
  std::vector<std::size_t> hidden;
  mlp::TrainConfig train;
  bool seed_set = false;
};

struct AnfisModelConfig {
  anfis::ClusterConfig cluster;
  anfis::HybridConfig train;
};

struct ModelConfig {
  std::string name;
  std::variant<MlpModelConfig, AnfisModelConfig> spec;
};

struct PipelineConfig {
  fs::path base_dir = ".";
  fs::path target;
  fs::path output = "out";
  std::uint64_t seed = 42;
  eval::Fractions fractions;
  double threshold = eval::kDefaultThreshold;
  std::vector<FactorConfig> factors;
  std::vector<ModelConfig> models;
  std::string text;  // original config text, echoed into the manifest

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline double to_real(const std::string& s, const std::string& where) {
  double v;
  if (!parse_real(s, v) || !std::isfinite(v)) throw ConfigError(where + ": expected a number, got '" + s + "'");
  return v;
}

inline long long to_int(const std::string& s, const std::string& where) {
  long long v;
  if (!parse_int(s, v)) throw ConfigError(where + ": expected an integer, got '" + s + "'");
  return v;
}

inline Step parse_step(std::string_view text, const std::string& where) {
  auto toks = split_ws(text);
  if (toks.empty()) throw ConfigError(where + ": empty chain step");
  Step s;
  s.text = std::string(trim(text));
  s.name = lower(toks[0]);
  for (std::size_t i = 1; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq == std::string_view::npos)
      s.args.emplace_back(toks[i]);
    else
      s.options[lower(toks[i].substr(0, eq))] = std::string(toks[i].substr(eq + 1));
  }
  static const std::vector<std::string> known = {"idw",    "kriging", "distance", "tri",  "curvature",
                                                 "classify", "bin10", "negate",   "fuzzy"};
  if (std::find(known.begin(), known.end(), s.name) == known.end())
    throw ConfigError(where + ": unknown chain step '" + s.name + "'");
  return s;
}

inline geo::FeatureKind parse_feature_kind(const std::string& s, const std::string& where) {
  if (s == "fault_lines") return geo::FeatureKind::fault_lines;
  if (s == "anticline_axes") return geo::FeatureKind::anticline_axes;
  if (s == "closure_centers") return geo::FeatureKind::closure_centers;
  if (s == "anomaly_centers") return geo::FeatureKind::anomaly_centers;
  throw ConfigError(where + ": unknown feature kind '" + s + "'");
}

}  // namespace detail

inline PipelineConfig parse_config(std::string_view text, const fs::path& base_dir = ".") {
  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  cfg.text = std::string(text);

  enum class Section { none, run, factor, model } section = Section::none;
  std::map<std::string, std::string> kv;
  std::string section_name;
  std::size_t section_line = 0;
  std::vector<std::string> seen_names;

  auto where = [&](const std::string& key) {
    return "config line " + std::to_string(section_line) + " [" + section_name + "] " + key;
  };
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto v = it->second;
    kv.erase(it);
    return v;
  };

  auto flush = [&] {
    if (section == Section::run) {
      if (auto v = take("target")) cfg.target = *v;
      if (auto v = take("output")) cfg.output = *v;
      if (auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(detail::to_int(*v, where("seed")));
      if (auto v = take("threshold")) cfg.threshold = detail::to_real(*v, where("threshold"));
      if (auto v = take("fractions")) {
        auto t = split_ws(*v);
        if (t.size() != 3) throw ConfigError(where("fractions") + ": expected three numbers");
        cfg.fractions = {detail::to_real(std::string(t[0]), where("fractions")),
                         detail::to_real(std::string(t[1]), where("fractions")),
                         detail::to_real(std::string(t[2]), where("fractions"))};
      }
    } else if (section == Section::factor) {
      FactorConfig f;
      f.name = section_name;
      const auto kind = take("kind").value_or("grid");
      if (kind == "grid") f.kind = SourceKind::grid;
      else if (kind == "points") f.kind = SourceKind::points;
      else if (kind == "features") f.kind = SourceKind::features;
      else if (kind == "wells") f.kind = SourceKind::wells;
      else throw ConfigError(where("kind") + ": unknown source kind '" + kind + "'");
      auto src = take("source");
      if (!src) throw ConfigError(where("source") + ": missing");
      f.source = *src;
      if (f.kind == SourceKind::wells) {
        auto idx = take("index");
        if (!idx) throw ConfigError(where("index") + ": wells factors need an index");
        f.index = geochem::parse_index(*idx);
        const auto stat = take("stat").value_or("mean");
        if (stat != "mean" && stat != "max") throw ConfigError(where("stat") + ": expected mean or max");
        f.use_max = stat == "max";
      }
      if (auto v = take("feature_kind")) f.feature_kind = detail::parse_feature_kind(*v, where("feature_kind"));
      auto chain = take("chain");
      if (!chain) throw ConfigError(where("chain") + ": missing");
      for (std::size_t p = 0; p <= chain->size();) {
        auto bar = chain->find('|', p);
        if (bar == std::string::npos) bar = chain->size();
        f.chain.push_back(detail::parse_step(std::string_view(*chain).substr(p, bar - p), where("chain")));
        p = bar + 1;
      }
      bool has_fuzzy = false;
      for (const auto& s : f.chain) has_fuzzy = has_fuzzy || s.name == "fuzzy";
      if (!has_fuzzy) throw ConfigError(where("chain") + ": chain must include a fuzzy normalisation step");
      cfg.factors.push_back(std::move(f));
    } else if (section == Section::model) {
      ModelConfig m;
      m.name = section_name;
      const auto type = take("type").value_or("");
      if (type == "mlp") {
        MlpModelConfig mc;
        auto hidden = take("hidden");
        if (!hidden) throw ConfigError(where("hidden") + ": mlp models need hidden layer sizes");
        for (auto t : split_ws(*hidden)) {
          const auto n = detail::to_int(std::string(t), where("hidden"));
          if (n <= 0) throw ConfigError(where("hidden") + ": layer sizes must be positive");
          mc.hidden.push_back(static_cast<std::size_t>(n));
        }
        if (mc.hidden.empty()) throw ConfigError(where("hidden") + ": at least one hidden layer");
        if (auto v = take("algorithm")) {
          if (*v == "levenberg_marquardt") mc.train.algorithm = mlp::Algorithm::levenberg_marquardt;
          else if (*v == "backprop") mc.train.algorithm = mlp::Algorithm::backprop;
          else throw ConfigError(where("algorithm") + ": expected levenberg_marquardt or backprop");
        }
        if (auto v = take("learning_rate")) mc.train.learning_rate = detail::to_real(*v, where("learning_rate"));
        if (auto v = take("lambda0")) mc.train.lm_lambda0 = detail::to_real(*v, where("lambda0"));
        if (auto v = take("lambda_factor")) mc.train.lm_lambda_factor = detail::to_real(*v, where("lambda_factor"));
        if (auto v = take("max_epochs")) mc.train.max_epochs = static_cast<std::size_t>(detail::to_int(*v, where("max_epochs")));
        if (auto v = take("error_goal")) mc.train.error_goal = detail::to_real(*v, where("error_goal"));
        if (auto v = take("seed")) {
          mc.train.rng_seed = static_cast<std::uint64_t>(detail::to_int(*v, where("seed")));
          mc.seed_set = true;
        }
        try {
          mc.train.validate();
        } catch (const ConfigError& e) {
          throw ConfigError("model '" + m.name + "': " + e.what());
        }
        m.spec = mc;
      } else if (type == "anfis") {
        AnfisModelConfig ac;
        if (auto v = take("radius")) ac.cluster.radius = detail::to_real(*v, where("radius"));
        if (auto v = take("squash")) ac.cluster.squash = detail::to_real(*v, where("squash"));
        if (auto v = take("accept_ratio")) ac.cluster.accept_ratio = detail::to_real(*v, where("accept_ratio"));
        if (auto v = take("reject_ratio")) ac.cluster.reject_ratio = detail::to_real(*v, where("reject_ratio"));
        if (auto v = take("epochs")) ac.train.epochs = static_cast<std::size_t>(detail::to_int(*v, where("epochs")));
        if (auto v = take("learning_rate")) ac.train.learning_rate = detail::to_real(*v, where("learning_rate"));
        if (auto v = take("error_goal")) ac.train.error_goal = detail::to_real(*v, where("error_goal"));
        if (auto v = take("decay")) ac.train.decay = detail::to_real(*v, where("decay"));
        try {
          ac.cluster.validate();
          ac.train.validate();
        } catch (const ConfigError& e) {
          throw ConfigError("model '" + m.name + "': " + e.what());
        }
        m.spec = ac;
      } else {
        throw ConfigError(where("type") + ": expected mlp or anfis");
      }
      cfg.models.push_back(std::move(m));
    }
    if (!kv.empty()) throw ConfigError(where(kv.begin()->first) + ": unknown key");
  };

  std::size_t line_no = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      flush();
      kv.clear();
      auto toks = split_ws(line.substr(1, line.size() - 2));
      section_line = line_no;
      if (toks.size() == 1 && toks[0] == "run") {
        section = Section::run;
        section_name = "run";
      } else if (toks.size() == 2 && (toks[0] == "factor" || toks[0] == "model")) {
        section = toks[0] == "factor" ? Section::factor : Section::model;
        section_name = std::string(toks[1]);
        if (std::find(seen_names.begin(), seen_names.end(), section_name) != seen_names.end())
          throw ConfigError("config line " + std::to_string(line_no) + ": duplicate section name '" + section_name + "'");
        seen_names.push_back(section_name);
      } else {
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown section '" + std::string(line) + "'");
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos || section == Section::none)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value' inside a section");
    kv[lower(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  flush();

  if (cfg.target.empty()) throw ConfigError("config: [run] target is required");
  if (cfg.factors.empty()) throw ConfigError("config: at least one [factor] section is required");
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Factor stack

struct FactorLog {
  std::string name;
  std::vector<std::string> steps;  // resolved parameters
  double min = 0.0;
  double max = 0.0;
};

struct FactorStack {
  std::vector<Grid> grids;
  std::vector<std::string> names;
  std::vector<FactorLog> log;
  Grid target;
};

namespace detail {

using Value = std::variant<Grid, std::vector<geo::PointSample>, geo::FeatureSet>;

inline const char* value_kind(const Value& v) {
  if (std::holds_alternative<Grid>(v)) return "a grid";
  if (std::holds_alternative<geo::FeatureSet>(v)) return "vector features";
  return "point samples";
}

inline std::pair<double, double> valid_range(const Grid& g) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.valid(i)) {
      lo = std::min(lo, g[i]);
      hi = std::max(hi, g[i]);
    }
  return {lo, hi};
}

inline geo::FuzzyParams resolve_fuzzy(const Step& s, const Grid& g, const std::string& where) {
  if (s.args.empty()) throw ConfigError(where + ": fuzzy needs a shape");
  geo::FuzzyParams p;
  const auto& shape = s.args[0];
  if (shape == "linear_increasing") p.shape = geo::FuzzyShape::linear_increasing;
  else if (shape == "linear_decreasing") p.shape = geo::FuzzyShape::linear_decreasing;
  else if (shape == "small") p.shape = geo::FuzzyShape::small;
  else if (shape == "large") p.shape = geo::FuzzyShape::large;
  else throw ConfigError(where + ": unknown fuzzy shape '" + shape + "'");
  const bool linear = p.shape == geo::FuzzyShape::linear_increasing || p.shape == geo::FuzzyShape::linear_decreasing;

  if (s.args.size() < 2 || s.args[1] == "auto") {
    // Observed range for linear shapes; mean as midpoint for small/large.
    auto [lo, hi] = valid_range(g);
    if (!(hi >= lo)) throw DataError(where + ": no valid cells to derive fuzzy parameters from");
    if (linear) {
      p.a = lo;
      p.b = hi > lo ? hi : lo + 1.0;
    } else {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (g.valid(i)) {
          sum += g[i];
          ++n;
        }
      p.a = sum / static_cast<double>(n);
      p.b = s.args.size() >= 3 ? to_real(s.args[2], where) : geo::kDefaultFuzzySpread;
      if (!(p.a > 0.0)) throw DataError(where + ": automatic midpoint is not positive (" + format_real(p.a) + ")");
    }
  } else {
    p.a = to_real(s.args[1], where);
    if (s.args.size() >= 3) p.b = to_real(s.args[2], where);
    else if (!linear) p.b = geo::kDefaultFuzzySpread;
    else throw ConfigError(where + ": linear fuzzy needs min and max");
  }
  try {
    p.validate();
  } catch (const InputError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

inline const char* shape_name(geo::FuzzyShape s) {
  switch (s) {
    case geo::FuzzyShape::linear_increasing: return "linear_increasing";
    case geo::FuzzyShape::linear_decreasing: return "linear_decreasing";
    case geo::FuzzyShape::small: return "small";
    case geo::FuzzyShape::large: return "large";
  }
  return "?";
}

}  // namespace detail

/// Runs one factor's chain left to right against the target geometry.
inline Grid run_chain(const FactorConfig& f, const PipelineConfig& cfg, const GridHeader& header, FactorLog& log) {
  using detail::Value;
  const fs::path src = cfg.resolve(f.source);
  Value v;
  switch (f.kind) {
    case SourceKind::grid: v = read_ascii_grid(src); break;
    case SourceKind::points: v = geo::read_point_samples(src); break;
    case SourceKind::features: v = geo::read_features(src, f.feature_kind); break;
    case SourceKind::wells: {
      std::vector<geo::PointSample> pts;
      for (const auto& w : geochem::summarize_wells(geochem::read_rock_eval_csv(src))) {
        const auto& mm = w[f.index];
        pts.push_back({w.x, w.y, f.use_max ? mm.max : mm.mean});
      }
      v = std::move(pts);
      break;
    }
  }

  for (std::size_t si = 0; si < f.chain.size(); ++si) {
    const Step& s = f.chain[si];
    const std::string where = "factor '" + f.name + "' step " + std::to_string(si + 1) + " '" + s.name + "'";
    auto need = [&](auto* tag, const char* what) {
      using T = std::remove_pointer_t<decltype(tag)>;
      if (!std::holds_alternative<T>(v))
        throw ConfigError(where + ": expects " + what + ", got " + detail::value_kind(v));
      return &std::get<T>(v);
    };
    std::string resolved = s.name;

    if (s.name == "idw") {
      auto* pts = need(static_cast<std::vector<geo::PointSample>*>(nullptr), "point samples");
      const double power = s.options.count("power") ? detail::to_real(s.options.at("power"), where) : 2.0;
      std::optional<std::size_t> k;
      if (s.options.count("neighbors") && s.options.at("neighbors") != "all")
        k = static_cast<std::size_t>(detail::to_int(s.options.at("neighbors"), where));
      resolved += " power=" + format_real(power) + " neighbors=" + (k ? std::to_string(*k) : "all");
      v = geo::idw_interpolate(*pts, header, power, k);
    } else if (s.name == "kriging") {
      auto* pts = need(static_cast<std::vector<geo::PointSample>*>(nullptr), "point samples");
      geo::Variogram vg = geo::default_variogram(*pts, header);
      if (s.options.count("model")) {
        const auto& m = s.options.at("model");
        if (m == "spherical") vg.model = geo::VariogramModel::spherical;
        else if (m == "exponential") vg.model = geo::VariogramModel::exponential;
        else throw ConfigError(where + ": unknown variogram model '" + m + "'");
      }
      if (s.options.count("nugget")) vg.nugget = detail::to_real(s.options.at("nugget"), where);
      if (s.options.count("sill") && s.options.at("sill") != "auto") vg.sill = detail::to_real(s.options.at("sill"), where);
      if (s.options.count("range") && s.options.at("range") != "auto")
        vg.range = detail::to_real(s.options.at("range"), where);
      resolved += std::string(" model=") + (vg.model == geo::VariogramModel::spherical ? "spherical" : "exponential") +
                  " nugget=" + format_real(vg.nugget) + " sill=" + format_real(vg.sill) +
                  " range=" + format_real(vg.range);
      v = geo::kriging_interpolate(*pts, header, vg);
    } else if (s.name == "distance") {
      auto* feats = need(static_cast<geo::FeatureSet*>(nullptr), "vector features");
      v = geo::distance_transform(*feats, header);
    } else {
      auto* g = need(static_cast<Grid*>(nullptr), "a grid");
      if (s.name == "tri") {
        v = geo::tri(*g);
      } else if (s.name == "curvature") {
        v = geo::curvature(*g);
      } else if (s.name == "negate") {
        v = geo::negate(*g);
      } else if (s.name == "bin10") {
        v = geo::quantize_equal_interval(*g, 10);
      } else if (s.name == "classify") {
        if (s.args.empty()) throw ConfigError(where + ": classify needs a threshold");
        const double t = detail::to_real(s.args[0], where);
        resolved += " " + format_real(t);
        v = geo::classify_threshold(*g, t);
      } else if (s.name == "fuzzy") {
        const auto p = detail::resolve_fuzzy(s, *g, where);
        resolved += std::string(" ") + detail::shape_name(p.shape) + " a=" + format_real(p.a) + " b=" + format_real(p.b);
        v = geo::fuzzy_normalize(*g, p);
      }
    }
    log.steps.push_back(resolved);
  }

  if (!std::holds_alternative<Grid>(v))
    throw ConfigError("factor '" + f.name + "': chain does not end in a grid");
  Grid out = std::move(std::get<Grid>(v));
  auto [lo, hi] = detail::valid_range(out);
  if (out.count_valid() > 0 && (lo < 0.0 || hi > 1.0))
    throw PostconditionError("factor '" + f.name + "': output range [" + format_real(lo) + ", " + format_real(hi) +
                             "] is not within [0, 1]");
  log.min = lo;
  log.max = hi;
  return out;
}

inline FactorStack build_factor_stack(const PipelineConfig& cfg) {
  FactorStack st;
  st.target = read_ascii_grid(cfg.resolve(cfg.target));
  GridHeader header = st.target.header();
  header.nodata_value = kDefaultNodata;
  for (const auto& f : cfg.factors) {
    FactorLog log;
    log.name = f.name;
    st.grids.push_back(run_chain(f, cfg, header, log));
    st.names.push_back(f.name);
    st.log.push_back(std::move(log));
  }
  std::vector<const Grid*> all;
  for (const auto& g : st.grids) all.push_back(&g);
  all.push_back(&st.target);
  assert_aligned(std::span<const Grid* const>(all));
  return st;
}

// ---------------------------------------------------------------------------
// Full run

struct ModelOutcome {
  std::string name;
  std::string type;
  eval::Metrics metrics;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  std::string stop_reason;
  std::size_t parameters = 0;
  double seconds = 0.0;
};

struct RunManifest {
  std::string text;  // byte content of manifest.txt
  std::vector<ModelOutcome> models;
  std::string best_model;
  std::size_t samples = 0;
  bool ok = true;
};

namespace detail {

class ManifestWriter {
 public:
  void section(const std::string& name) { out_ << "\n[" << name << "]\n"; }
  template <class T>
  void kv(const std::string& k, const T& v) {
    out_ << k << " = " << v << "\n";
  }
  void kv(const std::string& k, double v) { out_ << k << " = " << format_real(v) << "\n"; }
  void raw(const std::string& s) { out_ << s; }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline std::string checksum_file(const fs::path& p) { return hex64(fnv1a(read_file(p))); }

template <class History>
std::string format_history(const History& h) {
  std::string s = "epoch,train_mse,test_mse\n";
  for (const auto& e : h) s += std::to_string(e.epoch) + "," + format_real(e.train_mse) + "," + format_real(e.test_mse) + "\n";
  return s;
}

}  // namespace detail

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> output;
  std::optional<double> threshold;
  std::ostream* log = nullptr;  // progress and comparison table
};

inline PipelineConfig apply_options(PipelineConfig cfg, const RunOptions& opt) {
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.threshold) cfg.threshold = *opt.threshold;
  if (opt.output) cfg.output = *opt.output;
  return cfg;
}

inline fs::path output_dir(const PipelineConfig& cfg, const RunOptions& opt) {
  return opt.output ? *opt.output : cfg.resolve(cfg.output);
}

/// Builds only the factor stack and writes factors/<name>.asc.
inline FactorStack build(const PipelineConfig& cfg_in, const RunOptions& opt = {}) {
  const auto cfg = apply_options(cfg_in, opt);
  const fs::path out = output_dir(cfg_in, opt);
  fs::create_directories(out / "factors");
  auto st = build_factor_stack(cfg);
  for (std::size_t i = 0; i < st.grids.size(); ++i) {
    write_ascii_grid(st.grids[i], out / "factors" / (st.names[i] + ".asc"));
    render_map(st.grids[i], out / "factors" / (st.names[i] + ".pgm"));
  }
  return st;
}

/// Full run. Writes under the output directory:
///   factors/<f>.asc, models/<m>.model, models/<m>_history.csv,
///   maps/<m>_potential.{asc,pgm}, maps/<m>_binary.{asc,pgm},
///   metrics/<m>.txt, comparison.txt, manifest.txt, timings.txt
/// manifest.txt holds no wall-clock data so identical inputs give identical
/// bytes; timings go to timings.txt.
inline RunManifest run(const PipelineConfig& cfg_in, const RunOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto cfg = apply_options(cfg_in, opt);
  if (cfg.models.empty()) throw StageError(StageError::Kind::config, "config", "at least one [model] section is required");
  const fs::path out = output_dir(cfg_in, opt);
  std::ostream* log = opt.log;

  RunManifest result;
  detail::ManifestWriter mw;
  std::ostringstream timings;
  mw.raw("prospect-manifest 1\n");
  mw.kv("version", std::string(kVersion));
  mw.kv("seed", cfg.seed);
  mw.kv("threshold", cfg.threshold);
  mw.raw("fractions = " + format_real(cfg.fractions.train) + " " + format_real(cfg.fractions.test) + " " +
         format_real(cfg.fractions.validation) + "\n");
  mw.section("config");
  {
    std::istringstream is(cfg.text);
    std::string line;
    while (std::getline(is, line)) mw.raw("| " + line + "\n");
  }

  std::string stage = "setup";
  auto finish_partial = [&](const std::string& msg) {
    mw.section("status");
    mw.kv("status", std::string("failed"));
    mw.kv("failed_stage", stage);
    mw.kv("error", msg);
    try {
      fs::create_directories(out);
      write_file_atomic(out / "manifest.txt", mw.str());
    } catch (...) {
    }
  };

  try {
    fs::create_directories(out / "factors");
    fs::create_directories(out / "models");
    fs::create_directories(out / "maps");
    fs::create_directories(out / "metrics");

    stage = "build_stack";
    auto t0 = clock::now();
    if (log) *log << "building factor stack (" << cfg.factors.size() << " factors)\n";
    auto st = build_factor_stack(cfg);
    mw.section("factors");
    for (std::size_t i = 0; i < st.grids.size(); ++i) {
      const auto path = out / "factors" / (st.names[i] + ".asc");
      write_ascii_grid(st.grids[i], path);
      const auto& fl = st.log[i];
      std::string steps;
      for (const auto& s : fl.steps) steps += (steps.empty() ? "" : " | ") + s;
      mw.kv("factor." + fl.name + ".chain", steps);
      mw.raw("factor." + fl.name + ".range = " + format_real(fl.min) + " " + format_real(fl.max) + "\n");
      mw.kv("factor." + fl.name + ".checksum", detail::checksum_file(path));
    }
    timings << "build_stack_seconds=" << std::chrono::duration<double>(clock::now() - t0).count() << "\n";

    stage = "samples";
    const auto sm = eval::build_samples(st.grids, st.target, st.names);
    const auto sp = eval::split(sm, cfg.fractions, cfg.seed);
    result.samples = sm.size();
    mw.section("samples");
    mw.kv("cells", sm.size());
    mw.kv("train", sp.train_idx.size());
    mw.kv("test", sp.test_idx.size());
    mw.kv("validation", sp.val_idx.size());

    auto gather = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
      x.resize(static_cast<Eigen::Index>(idx.size()), sm.rows.cols());
      y.resize(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = sm.rows.row(static_cast<Eigen::Index>(idx[k]));
        y(static_cast<Eigen::Index>(k)) = sm.targets(static_cast<Eigen::Index>(idx[k]));
      }
    };
    Eigen::MatrixXd xtr, xte, xva;
    Eigen::VectorXd ytr, yte, yva;
    gather(sp.train_idx, xtr, ytr);
    gather(sp.test_idx, xte, yte);
    gather(sp.val_idx, xva, yva);
    auto patterns = [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
      std::vector<mlp::Pattern> p(static_cast<std::size_t>(x.rows()));
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        p[static_cast<std::size_t>(i)] = {x.row(i).transpose(), Eigen::VectorXd::Constant(1, y(i))};
      return p;
    };

    for (const auto& mc : cfg.models) {
      stage = "train:" + mc.name;
      if (log) *log << "training " << mc.name << "\n";
      const auto tm = clock::now();
      ModelOutcome mo;
      mo.name = mc.name;
      Grid potential;
      std::vector<double> val_pred(static_cast<std::size_t>(xva.rows()));
      mw.section("model " + mc.name);

      if (const auto* m = std::get_if<MlpModelConfig>(&mc.spec)) {
        mo.type = "mlp";
        mlp::Topology topo;
        topo.layer_sizes.push_back(st.grids.size());
        for (auto h : m->hidden) topo.layer_sizes.push_back(h);
        topo.layer_sizes.push_back(1);
        auto tc = m->train;
        if (!m->seed_set) tc.rng_seed = cfg.seed;
        const auto ptr = patterns(xtr, ytr);
        const auto pte = patterns(xte, yte);
        auto tr = mlp::train(mlp::init_weights(topo, tc.rng_seed), ptr, pte, tc);
        mo.epochs_run = tr.history.back().epoch;
        mo.best_epoch = tr.best_epoch;
        mo.stop_reason = tr.stop_reason;
        mo.parameters = tr.weights.parameter_count();
        std::string layers;
        for (auto n : topo.layer_sizes) layers += (layers.empty() ? "" : "-") + std::to_string(n);
        mw.kv("type", std::string("mlp"));
        mw.kv("layers", layers);
        mw.kv("algorithm", std::string(tc.algorithm == mlp::Algorithm::levenberg_marquardt ? "levenberg_marquardt" : "backprop"));
        mw.kv("rng_seed", tc.rng_seed);
        mw.kv("error_goal", tc.error_goal);
        mw.kv("max_epochs", tc.max_epochs);
        mw.kv("final_train_mse", tr.history.back().train_mse);
        mw.kv("best_test_mse", tr.history[tr.best_epoch].test_mse);
        write_file_atomic(out / "models" / (mc.name + ".model"), mlp::serialize(tr.weights));
        write_file_atomic(out / "models" / (mc.name + "_history.csv"), detail::format_history(tr.history));
        stage = "predict:" + mc.name;
        potential = mlp::predict_grid(tr.weights, st.grids);
        for (Eigen::Index i = 0; i < xva.rows(); ++i)
          val_pred[static_cast<std::size_t>(i)] = mlp::predict(tr.weights, xva.row(i).transpose())(0);
      } else {
        const auto& a = std::get<AnfisModelConfig>(mc.spec);
        mo.type = "anfis";
        const auto centers = anfis::subtractive_cluster(xtr, a.cluster);
        auto model = anfis::init_from_clusters(centers, xtr, a.cluster);
        auto tr = anfis::train_hybrid(std::move(model), xtr, ytr, xte, yte, a.train);
        mo.epochs_run = tr.history.back().epoch;
        mo.best_epoch = tr.best_epoch;
        mo.stop_reason = tr.stop_reason;
        mo.parameters = tr.model.premise.size() * 2 + static_cast<std::size_t>(tr.model.consequent.size());
        mw.kv("type", std::string("anfis"));
        mw.kv("radius", a.cluster.radius);
        mw.kv("rules", tr.model.n_rules);
        mw.kv("epochs", a.train.epochs);
        mw.kv("error_goal", a.train.error_goal);
        mw.kv("rank_deficient_lse", std::string(tr.rank_deficient ? "yes" : "no"));
        mw.kv("final_train_mse", tr.history.back().train_mse);
        mw.kv("best_test_mse", tr.history[tr.best_epoch].test_mse);
        write_file_atomic(out / "models" / (mc.name + ".model"), anfis::serialize(tr.model));
        write_file_atomic(out / "models" / (mc.name + "_history.csv"), detail::format_history(tr.history));
        stage = "predict:" + mc.name;
        potential = anfis::predict_grid(tr.model, st.grids);
        const Eigen::VectorXd vp = anfis::predict_rows(tr.model, xva);
        for (Eigen::Index i = 0; i < vp.size(); ++i) val_pred[static_cast<std::size_t>(i)] = vp(i);
      }
      mw.kv("parameters", mo.parameters);
      mw.kv("epochs_run", mo.epochs_run);
      mw.kv("best_epoch", mo.best_epoch);
      mw.kv("stop_reason", mo.stop_reason);

      stage = "evaluate:" + mc.name;
      const std::vector<double> truth(yva.data(), yva.data() + yva.size());
      mo.metrics = eval::evaluate(val_pred, truth, cfg.threshold, cfg.seed);
      const Grid binary = eval::binarize(potential, cfg.threshold);
      assert_aligned({&potential, &st.target});
      const auto pot_path = out / "maps" / (mc.name + "_potential.asc");
      const auto bin_path = out / "maps" / (mc.name + "_binary.asc");
      write_ascii_grid(potential, pot_path);
      write_ascii_grid(binary, bin_path);
      render_map(potential, out / "maps" / (mc.name + "_potential.pgm"));
      render_map(binary, out / "maps" / (mc.name + "_binary.pgm"));
      write_file_atomic(out / "metrics" / (mc.name + ".txt"), eval::format_metrics(mo.metrics));
      mw.kv("r", mo.metrics.r);
      mw.kv("rmse", mo.metrics.rmse);
      mw.kv("kappa", mo.metrics.kappa);
      mw.raw("confusion = " + std::to_string(mo.metrics.cm.tp) + " " + std::to_string(mo.metrics.cm.fp) + " " +
             std::to_string(mo.metrics.cm.fn) + " " + std::to_string(mo.metrics.cm.tn) + "\n");
      mw.kv("model_checksum", detail::checksum_file(out / "models" / (mc.name + ".model")));
      mw.kv("potential_checksum", detail::checksum_file(pot_path));
      mw.kv("binary_checksum", detail::checksum_file(bin_path));
      mo.seconds = std::chrono::duration<double>(clock::now() - tm).count();
      timings << "model." << mc.name << "_seconds=" << mo.seconds << "\n";
      result.models.push_back(mo);
    }

    stage = "report";
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.models.size(); ++i)
      if (result.models[i].metrics.kappa > result.models[best].metrics.kappa) best = i;
    result.best_model = result.models[best].name;

    std::ostringstream table;
    table << std::left << std::setw(20) << "model" << std::setw(12) << "RMS" << std::setw(12) << "R" << "Kappa\n";
    for (const auto& m : result.models)
      table << std::left << std::setw(20) << m.name << std::setw(12) << std::setprecision(4) << std::fixed
            << m.metrics.rmse << std::setw(12) << m.metrics.r << m.metrics.kappa << "\n";
    table << "best model: " << result.best_model << "\n";
    write_file_atomic(out / "comparison.txt", table.str());
    if (log) *log << table.str();

    mw.section("comparison");
    mw.kv("best_model", result.best_model);
    mw.section("status");
    mw.kv("status", std::string("ok"));
    result.text = mw.str();
    write_file_atomic(out / "manifest.txt", result.text);
    write_file_atomic(out / "timings.txt", timings.str());
  } catch (const ConfigError& e) {
    finish_partial(e.what());
    throw StageError(StageError::Kind::config, stage, e.what());
  } catch (const TrainingError& e) {
    finish_partial(e.what());
    throw StageError(StageError::Kind::training, stage, e.what());
  } catch (const Error& e) {
    finish_partial(e.what());
    throw StageError(StageError::Kind::data, stage, e.what());
  } catch (const fs::filesystem_error& e) {
    finish_partial(e.what());
    throw StageError(StageError::Kind::data, stage, e.what());
  }
  return result;
}

}  // namespace prospect::pipeline
