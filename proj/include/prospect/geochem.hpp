#pragma once

// Rock-Eval source-rock indices and per-well aggregation.
//
// Interpretation guidance for the production index: samples at the onset of
// oil generation typically show PI around 0.05-0.1, rising to 0.3-0.4 at the
// end of the oil window.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "prospect/common.hpp"

namespace prospect::geochem {

struct RockEvalRecord {
  std::string well_id;
  double x = 0.0;
  double y = 0.0;
  double s1 = 0.0;    // mg HC / g rock
  double s2 = 0.0;    // mg HC / g rock
  double s3 = 0.0;    // mg CO2 / g rock
  double toc = 1.0;   // weight %
  double tmax = 0.0;  // deg C

  void validate() const {
    if (!(s1 >= 0.0) || !(s2 >= 0.0) || !(s3 >= 0.0))
      throw DomainError("well '" + well_id + "': S1, S2, S3 must be >= 0");
    if (!(toc > 0.0)) throw DomainError("well '" + well_id + "': TOC must be > 0");
    if (!std::isfinite(tmax) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(s1) ||
        !std::isfinite(s2) || !std::isfinite(s3) || !std::isfinite(toc))
      throw DomainError("well '" + well_id + "': non-finite field");
  }
};

/// Oxygen index, mg CO2 / g TOC.
inline double oxygen_index(const RockEvalRecord& r) {
  if (!(r.toc > 0.0)) throw DomainError("oxygen_index: TOC must be > 0");
  return r.s3 / r.toc;
}

/// Production index S1 / (S1 + S2), in [0, 1].
inline double production_index(const RockEvalRecord& r) {
  const double pp = r.s1 + r.s2;
  if (!(pp > 0.0)) throw DomainError("production_index: S1 + S2 must be > 0");
  return r.s1 / pp;
}

/// Production potential S1 + S2, mg HC / g rock.
inline double production_potential(const RockEvalRecord& r) { return r.s1 + r.s2; }

/// Hydrogen index, mg HC / g TOC.
inline double hydrogen_index(const RockEvalRecord& r) {
  if (!(r.toc > 0.0)) throw DomainError("hydrogen_index: TOC must be > 0");
  return r.s2 / r.toc;
}

enum class Index { oi, pi, pp, hi, tmax, toc };
inline constexpr std::array kAllIndices = {Index::oi, Index::pi, Index::pp, Index::hi, Index::tmax, Index::toc};

inline const char* index_name(Index i) {
  switch (i) {
    case Index::oi: return "oi";
    case Index::pi: return "pi";
    case Index::pp: return "pp";
    case Index::hi: return "hi";
    case Index::tmax: return "tmax";
    case Index::toc: return "toc";
  }
  return "?";
}

inline Index parse_index(const std::string& name) {
  const auto n = lower(name);
  for (auto i : kAllIndices)
    if (n == index_name(i)) return i;
  throw ConfigError("unknown geochemical index '" + name + "'");
}

inline double evaluate_index(const RockEvalRecord& r, Index i) {
  switch (i) {
    case Index::oi: return oxygen_index(r);
    case Index::pi: return production_index(r);
    case Index::pp: return production_potential(r);
    case Index::hi: return hydrogen_index(r);
    case Index::tmax: return r.tmax;
    case Index::toc: return r.toc;
  }
  return 0.0;
}

struct MeanMax {
  double mean = 0.0;
  double max = 0.0;
};

struct WellIndexSummary {
  std::string well_id;
  double x = 0.0;
  double y = 0.0;
  std::array<MeanMax, kAllIndices.size()> stats{};

  const MeanMax& operator[](Index i) const { return stats[static_cast<std::size_t>(i)]; }
  MeanMax& operator[](Index i) { return stats[static_cast<std::size_t>(i)]; }
};

/// Per well: each index is computed per record, then averaged and maximised.
/// Output is ordered by well_id.
inline std::vector<WellIndexSummary> summarize_wells(const std::vector<RockEvalRecord>& records) {
  std::map<std::string, std::vector<const RockEvalRecord*>> by_well;
  for (const auto& r : records) {
    r.validate();
    by_well[r.well_id].push_back(&r);
  }
  std::vector<WellIndexSummary> out;
  out.reserve(by_well.size());
  for (auto& [id, recs] : by_well) {
    WellIndexSummary s;
    s.well_id = id;
    s.x = recs.front()->x;
    s.y = recs.front()->y;
    for (const auto* r : recs)
      if (r->x != s.x || r->y != s.y) throw InputError("well '" + id + "' has records at different coordinates");
    // Summation in a canonical order keeps the result independent of input order.
    for (auto idx : kAllIndices) {
      std::vector<double> vals;
      vals.reserve(recs.size());
      for (const auto* r : recs) vals.push_back(evaluate_index(*r, idx));
      std::sort(vals.begin(), vals.end());
      double sum = 0.0;
      for (double v : vals) sum += v;
      s[idx] = {sum / static_cast<double>(vals.size()), vals.back()};
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Reads CSV with header "well_id,x,y,S1,S2,S3,TOC,Tmax".
inline std::vector<RockEvalRecord> parse_rock_eval_csv(std::string_view text, const std::string& source = "<memory>") {
  static constexpr std::array<const char*, 8> kHeader = {"well_id", "x", "y", "s1", "s2", "s3", "toc", "tmax"};
  std::vector<RockEvalRecord> out;
  bool header_seen = false;
  std::size_t line_no = 0;
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
    auto fail = [&](const std::string& why) {
      return ParseError(source + ": line " + std::to_string(line_no) + ": " + why);
    };
    if (!header_seen) {
      if (cols.size() != kHeader.size()) throw fail("expected header 'well_id,x,y,S1,S2,S3,TOC,Tmax'");
      for (std::size_t i = 0; i < kHeader.size(); ++i)
        if (lower(cols[i]) != kHeader[i]) throw fail("expected header 'well_id,x,y,S1,S2,S3,TOC,Tmax'");
      header_seen = true;
      continue;
    }
    if (cols.size() != kHeader.size()) throw fail("expected 8 columns");
    RockEvalRecord r;
    r.well_id = std::string(cols[0]);
    if (r.well_id.empty()) throw fail("empty well_id");
    double* fields[] = {&r.x, &r.y, &r.s1, &r.s2, &r.s3, &r.toc, &r.tmax};
    for (std::size_t i = 0; i < 7; ++i)
      if (!parse_real(cols[i + 1], *fields[i])) throw fail("invalid number '" + std::string(cols[i + 1]) + "'");
    try {
      r.validate();
    } catch (const DomainError& e) {
      throw DomainError(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError(source + ": missing header");
  return out;
}

inline std::vector<RockEvalRecord> read_rock_eval_csv(const std::filesystem::path& path) {
  return parse_rock_eval_csv(read_file(path), path.string());
}

}  // namespace prospect::geochem
