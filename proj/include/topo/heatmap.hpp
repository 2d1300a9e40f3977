#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace topo::viz {

enum class Colormap {
  Diverging,   // symmetric about zero, blue-white-red
  Sequential,  // low-to-high, dark-to-bright
};

struct HeatmapRange {
  double lo = -2.0;
  double hi = 2.0;
};

/// Symmetric ±limit range, e.g. ±2 or ±10 for selectivity maps.
inline HeatmapRange symmetric_range(double limit) { return {-limit, limit}; }
/// Data min/max (a degenerate range is widened by 1 on each side).
HeatmapRange data_range(const Eigen::Ref<const Eigen::MatrixXd>& grid);

/// Clamps to the range and quantizes to 0..255 with round-half-up.
std::vector<std::uint8_t> quantize(const Eigen::Ref<const Eigen::MatrixXd>& grid,
                                   HeatmapRange range);

std::array<std::uint8_t, 3> color_of(std::uint8_t level, Colormap map);

/// Binary PGM (P5), one pixel per cell, row-major.
std::string render_pgm(const Eigen::Ref<const Eigen::MatrixXd>& grid, HeatmapRange range);

/// SVG with one rect per cell.
std::string render_svg(const Eigen::Ref<const Eigen::MatrixXd>& grid, HeatmapRange range,
                       Colormap map, int cell_px = 12);

/// Reshapes a length-s² vector to an s x s grid (row-major unit order).
Eigen::MatrixXd to_grid(const Eigen::Ref<const Eigen::VectorXd>& values);

}  // namespace topo::viz
