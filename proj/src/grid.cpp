#include "topo/grid.hpp"

#include <algorithm>
#include <string>

namespace topo {

GridLayout::GridLayout(std::size_t d) : side_(0) {
  if (d == 0) throw Error(ErrorCode::NonSquareDimension, "d must be positive");
  auto s = static_cast<std::size_t>(std::llround(std::sqrt(double(d))));
  while (s * s > d) --s;
  while ((s + 1) * (s + 1) <= d) ++s;
  if (s * s != d)
    throw Error(ErrorCode::NonSquareDimension, std::to_string(d) + " is not a perfect square");
  side_ = s;
}

std::vector<std::pair<std::size_t, std::size_t>> GridLayout::coords() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(coord(i));
  return out;
}

GridLayout make_grid(std::size_t d) { return GridLayout(d); }

ReceptiveField receptive_field(const GridLayout& grid, std::size_t center, double radius) {
  if (center >= grid.size()) throw Error(ErrorCode::InvalidArgument, "center outside grid");
  if (!(radius >= 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be nonnegative");
  ReceptiveField rf{center, radius, {}};
  for (std::size_t j = 0; j < grid.size(); ++j)
    if (grid.distance(center, j) <= radius + 1e-9) rf.members.push_back(j);
  return rf;
}

double radius_for_fraction(const GridLayout& grid, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::FractionOutOfRange,
                "receptive-field fraction must lie in (0, 1], got " + std::to_string(fraction));
  const std::size_t d = grid.size();
  const auto wanted = std::max<long long>(1, std::llround(fraction * double(d)));
  std::vector<double> dist(d);
  for (std::size_t j = 0; j < d; ++j) dist[j] = grid.distance(grid.center(), j);
  std::sort(dist.begin(), dist.end());
  return dist[std::min<std::size_t>(d, wanted) - 1];
}

}  // namespace topo
