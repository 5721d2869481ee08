#pragma once

// Georeferenced single-band raster and ESRI ASCII grid I/O.
//
// Storage convention: values are row-major with row 0 at the TOP (north) edge
// of the map, matching the text order of an ESRI ASCII grid. Cell (r, c) has
// its center at
//   x = xll + (c + 0.5) * cellsize
//   y = yll + (nrows - r - 0.5) * cellsize

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "prospect/common.hpp"

namespace prospect {

inline constexpr double kDefaultNodata = -9999.0;

struct GridHeader {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double xll = 0.0;
  double yll = 0.0;
  double cellsize = 1.0;
  double nodata_value = kDefaultNodata;

  std::size_t size() const { return ncols * nrows; }
  double center_x(std::size_t col) const { return xll + (static_cast<double>(col) + 0.5) * cellsize; }
  double center_y(std::size_t row) const {
    return yll + (static_cast<double>(nrows - row) - 0.5) * cellsize;
  }

  void validate() const {
    if (ncols == 0 || nrows == 0) throw DimensionError("grid dimensions must be positive");
    if (!(cellsize > 0.0) || !std::isfinite(cellsize)) throw DimensionError("cellsize must be positive");
    if (!std::isfinite(xll) || !std::isfinite(yll)) throw DimensionError("grid origin must be finite");
  }
};

class Grid {
 public:
  Grid() = default;

  /// Grid filled with `fill` (nodata by default).
  explicit Grid(const GridHeader& header) : Grid(header, header.nodata_value) {}
  Grid(const GridHeader& header, double fill) : header_(header), values_(header.size(), fill) {
    header_.validate();
  }
  Grid(const GridHeader& header, std::vector<double> values) : header_(header), values_(std::move(values)) {
    header_.validate();
    if (values_.size() != header_.size())
      throw DimensionError("grid expects " + std::to_string(header_.size()) + " values, got " +
                           std::to_string(values_.size()));
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i]) && !is_nodata(values_[i]))
        throw InputError("non-finite value at cell index " + std::to_string(i));
  }

  const GridHeader& header() const { return header_; }
  std::size_t ncols() const { return header_.ncols; }
  std::size_t nrows() const { return header_.nrows; }
  std::size_t size() const { return values_.size(); }
  double nodata() const { return header_.nodata_value; }

  double operator()(std::size_t row, std::size_t col) const { return values_[row * header_.ncols + col]; }
  double& operator()(std::size_t row, std::size_t col) { return values_[row * header_.ncols + col]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool is_nodata(double v) const { return same_bits(v, header_.nodata_value); }
  bool valid(std::size_t i) const { return !is_nodata(values_[i]); }
  bool valid(std::size_t row, std::size_t col) const { return valid(row * header_.ncols + col); }

  std::size_t count_valid() const {
    std::size_t n = 0;
    for (double v : values_) n += is_nodata(v) ? 0 : 1;
    return n;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    const auto& ha = a.header_;
    const auto& hb = b.header_;
    if (ha.ncols != hb.ncols || ha.nrows != hb.nrows || ha.xll != hb.xll || ha.yll != hb.yll ||
        ha.cellsize != hb.cellsize || !same_bits(ha.nodata_value, hb.nodata_value))
      return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i)
      if (!same_bits(a.values_[i], b.values_[i])) return false;
    return true;
  }

 private:
  GridHeader header_;
  std::vector<double> values_;
};

/// Applies `fn` to every valid cell; nodata cells stay nodata.
template <class Fn>
Grid map_valid(const Grid& in, Fn&& fn) {
  Grid out(in.header());
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in.valid(i)) out[i] = fn(in[i]);
  return out;
}

namespace detail {

inline std::optional<double> try_number(std::string_view tok) {
  double v;
  if (parse_real(tok, v)) return v;
  return std::nullopt;
}

}  // namespace detail

/// Parses ESRI ASCII grid text. `source` only labels error messages.
inline Grid parse_ascii_grid(std::string_view text, const std::string& source = "<memory>") {
  // Split into lines, keeping 1-based numbers for messages.
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }

  std::optional<long long> ncols, nrows;
  std::optional<double> x, y, cellsize, nodata;
  bool x_center = false, y_center = false;

  auto fail = [&](std::size_t line, const std::string& why) -> ParseError {
    return ParseError(source + ": line " + std::to_string(line + 1) + ": " + why);
  };

  std::size_t li = 0;
  for (; li < lines.size(); ++li) {
    auto toks = split_ws(lines[li]);
    if (toks.empty()) continue;
    if (detail::try_number(toks[0])) break;  // first data row
    if (toks.size() != 2) throw fail(li, "expected '<keyword> <value>' header line");
    const std::string key = lower(toks[0]);
    if (key == "ncols" || key == "nrows") {
      long long v;
      if (!parse_int(toks[1], v) || v <= 0) throw fail(li, "invalid " + key + " '" + std::string(toks[1]) + "'");
      (key == "ncols" ? ncols : nrows) = v;
      continue;
    }
    double v;
    if (!parse_real(toks[1], v)) throw fail(li, "invalid number '" + std::string(toks[1]) + "'");
    if (key == "xllcorner" || key == "xllcenter") {
      x = v;
      x_center = key == "xllcenter";
    } else if (key == "yllcorner" || key == "yllcenter") {
      y = v;
      y_center = key == "yllcenter";
    } else if (key == "cellsize") {
      cellsize = v;
    } else if (key == "nodata_value") {
      nodata = v;
    } else {
      throw fail(li, "unknown header keyword '" + std::string(toks[0]) + "'");
    }
  }
  if (!ncols || !nrows || !x || !y || !cellsize)
    throw ParseError(source + ": incomplete header (need ncols, nrows, xllcorner, yllcorner, cellsize)");
  if (!(*cellsize > 0.0)) throw ParseError(source + ": cellsize must be positive");

  GridHeader h;
  h.ncols = static_cast<std::size_t>(*ncols);
  h.nrows = static_cast<std::size_t>(*nrows);
  h.cellsize = *cellsize;
  h.xll = x_center ? *x - *cellsize / 2.0 : *x;
  h.yll = y_center ? *y - *cellsize / 2.0 : *y;
  h.nodata_value = nodata.value_or(kDefaultNodata);

  std::vector<double> values;
  values.reserve(h.size());
  for (; li < lines.size(); ++li) {
    for (auto tok : split_ws(lines[li])) {
      double v;
      if (!parse_real(tok, v)) throw fail(li, "invalid cell value '" + std::string(tok) + "'");
      if (!std::isfinite(v) && !same_bits(v, h.nodata_value)) throw fail(li, "non-finite cell value");
      values.push_back(v);
    }
  }
  if (values.size() != h.size())
    throw DimensionError(source + ": header declares " + std::to_string(h.nrows) + "x" + std::to_string(h.ncols) +
                         " = " + std::to_string(h.size()) + " cells but " + std::to_string(values.size()) +
                         " values were read");
  return Grid(h, std::move(values));
}

inline Grid read_ascii_grid(const std::filesystem::path& path) {
  return parse_ascii_grid(read_file(path), path.string());
}

inline std::string format_ascii_grid(const Grid& g) {
  const auto& h = g.header();
  std::string out;
  out.reserve(64 + g.size() * 8);
  out += "ncols " + std::to_string(h.ncols) + "\n";
  out += "nrows " + std::to_string(h.nrows) + "\n";
  out += "xllcorner " + format_real(h.xll) + "\n";
  out += "yllcorner " + format_real(h.yll) + "\n";
  out += "cellsize " + format_real(h.cellsize) + "\n";
  out += "NODATA_value " + format_real(h.nodata_value) + "\n";
  const std::string nodata_tok = format_real(h.nodata_value);
  for (std::size_t r = 0; r < h.nrows; ++r) {
    for (std::size_t c = 0; c < h.ncols; ++c) {
      if (c) out += ' ';
      const double v = g(r, c);
      out += g.is_nodata(v) ? nodata_tok : format_real(v);
    }
    out += '\n';
  }
  return out;
}

inline void write_ascii_grid(const Grid& g, const std::filesystem::path& path) {
  write_file_atomic(path, format_ascii_grid(g));
}

/// Throws AlignmentError unless every grid shares the geometry of grids[0].
inline void assert_aligned(std::span<const Grid* const> grids) {
  if (grids.empty()) throw InputError("assert_aligned: empty grid list");
  constexpr double tol = 1e-9;
  const auto& ref = grids[0]->header();
  for (std::size_t i = 1; i < grids.size(); ++i) {
    const auto& h = grids[i]->header();
    auto mismatch = [&](const char* field) {
      return AlignmentError(std::string("grid ") + std::to_string(i) + " differs from grid 0 in " + field);
    };
    if (h.ncols != ref.ncols) throw mismatch("ncols");
    if (h.nrows != ref.nrows) throw mismatch("nrows");
    if (std::abs(h.xll - ref.xll) > tol) throw mismatch("xll");
    if (std::abs(h.yll - ref.yll) > tol) throw mismatch("yll");
    if (std::abs(h.cellsize - ref.cellsize) > tol) throw mismatch("cellsize");
  }
}

inline void assert_aligned(std::span<const Grid> grids) {
  std::vector<const Grid*> ptrs;
  for (const auto& g : grids) ptrs.push_back(&g);
  assert_aligned(std::span<const Grid* const>(ptrs));
}

inline void assert_aligned(std::initializer_list<const Grid*> grids) {
  assert_aligned(std::span<const Grid* const>(grids.begin(), grids.size()));
}

/// 3x3 neighbourhood; index [dr + 1][dc + 1]. Off-grid cells are empty.
using Window3 = std::array<std::array<std::optional<double>, 3>, 3>;

inline Window3 focal_window(const Grid& g, std::size_t row, std::size_t col) {
  if (row >= g.nrows() || col >= g.ncols())
    throw IndexError("focal_window: cell (" + std::to_string(row) + "," + std::to_string(col) + ") outside " +
                     std::to_string(g.nrows()) + "x" + std::to_string(g.ncols()) + " grid");
  Window3 w{};
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const auto r = static_cast<long long>(row) + dr;
      const auto c = static_cast<long long>(col) + dc;
      if (r < 0 || c < 0 || r >= static_cast<long long>(g.nrows()) || c >= static_cast<long long>(g.ncols()))
        continue;
      const double v = g(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      if (!g.is_nodata(v)) w[dr + 1][dc + 1] = v;
    }
  }
  return w;
}

}  // namespace prospect
