#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "topo/error.hpp"

namespace topo {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Square lattice of d = side² units in row-major order. Unit i sits at
/// (i / side, i % side). The grid is bounded: there is no wraparound.
class GridLayout {
 public:
  explicit GridLayout(std::size_t d);

  std::size_t side() const noexcept { return side_; }
  std::size_t size() const noexcept { return side_ * side_; }
  std::size_t center() const noexcept { return (side_ / 2) * side_ + side_ / 2; }

  std::pair<std::size_t, std::size_t> coord(std::size_t unit) const {
    return {unit / side_, unit % side_};
  }
  std::vector<std::pair<std::size_t, std::size_t>> coords() const;

  double distance(std::size_t a, std::size_t b) const {
    const double dr = double(a / side_) - double(b / side_);
    const double dc = double(a % side_) - double(b % side_);
    return std::sqrt(dr * dr + dc * dc);
  }

 private:
  std::size_t side_;
};

/// Throws NonSquareDimension when d has no integer square root.
GridLayout make_grid(std::size_t d);

/// Receptive field: all units within `radius` (inclusive) of `center`.
struct ReceptiveField {
  std::size_t center;
  double radius;
  std::vector<std::size_t> members;
};

ReceptiveField receptive_field(const GridLayout& grid, std::size_t center, double radius);

/// Smallest radius whose disk around the central unit holds at least
/// round(fraction * d) units (never fewer than one). The radius is measured at
/// the center and reused for every unit.
double radius_for_fraction(const GridLayout& grid, double fraction);

template <typename Scalar = double>
Mat<Scalar> distance_matrix(const GridLayout& grid) {
  const auto d = static_cast<Eigen::Index>(grid.size());
  Mat<Scalar> D(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) D(i, j) = Scalar(grid.distance(i, j));
  return D;
}

/// Binary mask with entry (q, k) = 1 iff dist(q, k) <= radius.
template <typename Scalar = double>
Mat<Scalar> radius_mask(const GridLayout& grid, double radius) {
  const auto d = static_cast<Eigen::Index>(grid.size());
  Mat<Scalar> M = Mat<Scalar>::Zero(d, d);
  // Small slack so lattice distances that equal the radius analytically are kept.
  const double cutoff = radius + 1e-9;
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index q = 0; q < d; ++q)
      if (grid.distance(q, k) <= cutoff) M(q, k) = Scalar(1);
  return M;
}

/// Spatial-querying pool: column k marks the queries pooled for key k.
template <typename Scalar = double>
Mat<Scalar> pooling_matrix(const GridLayout& grid, double r_sq) {
  return radius_mask<Scalar>(grid, radius_for_fraction(grid, r_sq));
}

/// Connectivity mask for the locally connected output projection.
template <typename Scalar = double>
Mat<Scalar> local_mask(const GridLayout& grid, double r_sr) {
  return radius_mask<Scalar>(grid, radius_for_fraction(grid, r_sr));
}

}  // namespace topo
