#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace topo::stats {

using Eigen::VectorXd;
using VecRef = Eigen::Ref<const VectorXd>;

/// 1-based ranks; ties share their average rank.
VectorXd average_ranks(const VecRef& x);

/// Pearson correlation. NaN when either input has zero variance.
double pearson(const VecRef& x, const VecRef& y);

/// Spearman rank correlation (Pearson on average ranks).
double spearman(const VecRef& x, const VecRef& y);

inline double pearson(std::span<const double> x, std::span<const double> y) {
  return pearson(Eigen::Map<const VectorXd>(x.data(), Eigen::Index(x.size())),
                 Eigen::Map<const VectorXd>(y.data(), Eigen::Index(y.size())));
}
inline double spearman(std::span<const double> x, std::span<const double> y) {
  return spearman(Eigen::Map<const VectorXd>(x.data(), Eigen::Index(x.size())),
                  Eigen::Map<const VectorXd>(y.data(), Eigen::Index(y.size())));
}

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t CDF with `df` degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);

/// Two-tailed p-value of a t statistic.
double student_t_two_tailed_p(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool degenerate = false;  // both groups have zero variance
};

/// Unequal-variance two-sample t-test of a against b.
WelchResult welch_t_test(const VecRef& a, const VecRef& b);

/// Linear-interpolation percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

/// Percentage of `null` entries strictly below `observed`.
double percentile_of(std::span<const double> null, double observed);

}  // namespace topo::stats
