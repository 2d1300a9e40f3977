#include "topo/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "topo/error.hpp"
#include "topo/grid.hpp"

namespace topo::viz {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& grid) {
  if (!grid.allFinite()) throw Error(ErrorCode::NonFiniteValue, "heatmap grid has NaN/Inf");
}

std::array<std::uint8_t, 3> lerp(std::array<double, 3> a, std::array<double, 3> b, double t) {
  std::array<std::uint8_t, 3> out{};
  for (int i = 0; i < 3; ++i) out[i] = std::uint8_t(std::lround(a[i] + (b[i] - a[i]) * t));
  return out;
}

}  // namespace

HeatmapRange data_range(const Eigen::Ref<const Eigen::MatrixXd>& grid) {
  require_finite(grid);
  double lo = grid.minCoeff();
  double hi = grid.maxCoeff();
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  return {lo, hi};
}

std::vector<std::uint8_t> quantize(const Eigen::Ref<const Eigen::MatrixXd>& grid,
                                   HeatmapRange range) {
  require_finite(grid);
  if (!(range.hi > range.lo)) throw Error(ErrorCode::InvalidArgument, "heatmap range is empty");
  std::vector<std::uint8_t> out;
  out.reserve(std::size_t(grid.size()));
  for (Eigen::Index r = 0; r < grid.rows(); ++r)
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      const double v = std::clamp(grid(r, c), range.lo, range.hi);
      const double u = (v - range.lo) / (range.hi - range.lo);
      out.push_back(std::uint8_t(std::floor(u * 255.0 + 0.5)));
    }
  return out;
}

std::array<std::uint8_t, 3> color_of(std::uint8_t level, Colormap map) {
  const double u = double(level) / 255.0;
  if (map == Colormap::Diverging) {
    if (u <= 0.5) return lerp({33, 102, 172}, {247, 247, 247}, u / 0.5);
    return lerp({247, 247, 247}, {178, 24, 43}, (u - 0.5) / 0.5);
  }
  // Five-stop viridis approximation.
  static constexpr std::array<std::array<double, 3>, 5> stops{
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  const double x = u * 4.0;
  const auto i = std::min<std::size_t>(3, std::size_t(x));
  return lerp(stops[i], stops[i + 1], x - double(i));
}

std::string render_pgm(const Eigen::Ref<const Eigen::MatrixXd>& grid, HeatmapRange range) {
  const auto levels = quantize(grid, range);
  std::string out = "P5\n" + std::to_string(grid.cols()) + " " + std::to_string(grid.rows()) +
                    "\n255\n";
  out.append(levels.begin(), levels.end());
  return out;
}

std::string render_svg(const Eigen::Ref<const Eigen::MatrixXd>& grid, HeatmapRange range,
                       Colormap map, int cell_px) {
  const auto levels = quantize(grid, range);
  const long w = long(grid.cols()) * cell_px;
  const long h = long(grid.rows()) * cell_px;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
                    "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) +
                    " " + std::to_string(h) + "\" shape-rendering=\"crispEdges\">\n";
  std::size_t k = 0;
  char buf[160];
  for (Eigen::Index r = 0; r < grid.rows(); ++r)
    for (Eigen::Index c = 0; c < grid.cols(); ++c, ++k) {
      const auto rgb = color_of(levels[k], map);
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%ld\" y=\"%ld\" width=\"%d\" height=\"%d\" fill=\"#%02x%02x%02x\"/>\n",
                    long(c) * cell_px, long(r) * cell_px, cell_px, cell_px, rgb[0], rgb[1], rgb[2]);
      out += buf;
    }
  out += "</svg>\n";
  return out;
}

Eigen::MatrixXd to_grid(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const GridLayout g(std::size_t(values.size()));
  const auto s = Eigen::Index(g.side());
  Eigen::MatrixXd out(s, s);
  for (Eigen::Index i = 0; i < values.size(); ++i) out(i / s, i % s) = values(i);
  return out;
}

}  // namespace topo::viz
