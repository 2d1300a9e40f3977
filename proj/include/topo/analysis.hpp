#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "topo/error.hpp"

namespace topo {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatRef = Eigen::Ref<const MatrixXd>;
using VecRef = Eigen::Ref<const VectorXd>;

/// n sentences x d units of token-averaged activations.
struct ActivationMatrix {
  MatrixXd values;
  std::string sublayer;
  int layer = 0;

  Eigen::Index sentences() const { return values.rows(); }
  Eigen::Index units() const { return values.cols(); }
};

// ---------------------------------------------------------------------------
// Selectivity

struct SelectivityMap {
  VectorXd s;  // sign(t) * -log10(p); +2 means condition A preferred at p = 0.01
  VectorXd t;
  VectorXd p;
  std::vector<bool> degenerate;  // both groups constant: s = 0
  std::string condition_a = "A";
  std::string condition_b = "B";

  std::size_t degenerate_count() const;
};

/// Per-unit Welch two-tailed t-test of rows of `a` against rows of `b`.
/// p-values are floored at 1e-300 before the log.
SelectivityMap selectivity(const MatRef& a, const MatRef& b);

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
  MatrixXd weights;  // d x k, orthonormal columns
  MatrixXd scores;   // n x k
  VectorXd explained_variance_ratio;
  VectorXd singular_values;
  Eigen::RowVectorXd mean;
  std::vector<std::string> warnings;

  /// Projects new rows with the fitted mean and weights.
  MatrixXd transform(const MatRef& x) const;
};

/// Column-centered SVD. Each weight column is signed so its largest-magnitude
/// entry is positive. k beyond the numerical rank is truncated with a warning.
PcaResult pca(const MatRef& x, Eigen::Index k);

// ---------------------------------------------------------------------------
// Topography

struct TopoStat {
  double value = 0.0;
  std::size_t pairs = 0;
  std::size_t excluded_units = 0;  // constant-activity units
};

/// Spearman correlation between -R(i,j) and D(i,j) over pairs i < j with
/// D(i,j) < d_max (all pairs when absent). R is the Pearson correlation of unit
/// activity across rows of x. Throws TooFewPairs below 10 usable pairs.
TopoStat topo_stat(const MatRef& x, const MatRef& distances,
                   std::optional<double> d_max = std::nullopt);

struct TopoStatResult {
  std::vector<double> scales;        // maximum distances
  std::vector<double> t_gd;          // NaN where the scale is degenerate
  std::vector<bool> valid;
  std::vector<std::size_t> pairs;
  double mean = 0.0;                 // over valid scales; NaN when none is valid
  std::size_t excluded_units = 0;

  std::size_t valid_count() const;
};

constexpr std::size_t kTopoScales = 9;
constexpr double kTopoLowerPercentile = 10.0;

/// Nine maximum distances linearly spaced from the 10th percentile of nonzero
/// pairwise distances up to the largest distance.
std::vector<double> topo_scales(const MatRef& distances, std::size_t count = kTopoScales);

TopoStatResult topo_stat_profile(const MatRef& x, const MatRef& distances);

enum class TopoSummary {
  ProfileMean,  // mean of t_{g,d} over the nine scales
  Global,       // single statistic over all pairs
};

struct PermutationNull {
  double observed = 0.0;
  std::vector<double> null;
  double percentile = 0.0;  // % of null strictly below observed
  double threshold95 = 0.0;
  double threshold99 = 0.0;
  bool significant = false;  // observed > 95th percentile
  TopoSummary summary = TopoSummary::ProfileMean;
};

/// Shuffles the unit-to-position assignment n_perm times. Permutation k draws
/// from its own generator seeded by (seed, k), so the result does not depend
/// on `threads`.
PermutationNull permutation_null(const MatRef& x, const MatRef& distances, std::size_t n_perm,
                                 std::uint64_t seed,
                                 TopoSummary summary = TopoSummary::ProfileMean,
                                 std::size_t threads = 1);

/// Applies a unit permutation to a distance matrix: out(i,j) = D(perm[i], perm[j]).
MatrixXd permute_distances(const MatRef& distances, const std::vector<Eigen::Index>& perm);

// ---------------------------------------------------------------------------
// Decoding

struct DecodeResult {
  double accuracy = 0.0;
  Eigen::Index components = 0;
  std::size_t iterations = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<std::string> warnings;
};

/// Shuffled train/test split of [0, n); the first floor(fraction * n) indices
/// train.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n, double fraction, std::uint64_t seed);

/// PCA fitted on the training rows, then logistic regression on the component
/// scores by full-batch gradient descent.
DecodeResult decode(const MatRef& x, const std::vector<int>& labels,
                    Eigen::Index n_components = 50, double split = 0.8, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// PLS-SVD alignment

struct AlignmentResult {
  VectorXd correlations;  // held-out score correlation per component
  MatrixXd weights_x;     // p x k left singular vectors (dropped columns are zero rows)
  MatrixXd weights_y;     // q x k right singular vectors
  VectorXd singular_values;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
  std::vector<Eigen::Index> dropped_x;  // zero-variance columns in the training split
  std::vector<Eigen::Index> dropped_y;
  std::vector<std::string> warnings;
};

AlignmentResult pls_svd_align(const MatRef& x, const MatRef& y, Eigen::Index n_components = 10,
                              double split = 0.8, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Ridge encoding

/// Leave-one-out squared errors of ridge regression with an unpenalized
/// intercept, from the hat-matrix identity e_i / (1 - H_ii).
VectorXd ridge_loo_residuals(const MatRef& x, const VecRef& y, double lambda);

struct RidgeFit {
  VectorXd weights;
  double intercept = 0.0;
};

RidgeFit ridge_fit(const MatRef& x, const VecRef& y, double lambda);

struct RidgeResult {
  RidgeFit fit;
  double best_lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<double> loo_mse;
  double held_out_correlation = 0.0;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

RidgeResult ridge_encode(const MatRef& x, const VecRef& y, const std::vector<double>& lambdas,
                         double split = 0.8, std::uint64_t seed = 0);

}  // namespace topo
