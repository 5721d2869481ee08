#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "prospect/common.hpp"
#include "prospect/raster.hpp"

namespace prospect {

/// Binary PGM (P5, maxval 255). Valid cells are scaled linearly from
/// [min, max] to [0, 255]; nodata is 0. A constant grid renders as 255.
inline std::string format_pgm(const Grid& g) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.valid(i)) {
      lo = std::min(lo, g[i]);
      hi = std::max(hi, g[i]);
    }
  std::string out = "P5\n" + std::to_string(g.ncols()) + " " + std::to_string(g.nrows()) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + g.size(), '\0');
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.valid(i)) continue;
    const double t = hi > lo ? (g[i] - lo) / (hi - lo) : 1.0;
    out[header + i] = static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0)));
  }
  return out;
}

inline void render_map(const Grid& g, const std::filesystem::path& path) { write_file_atomic(path, format_pgm(g)); }

}  // namespace prospect
