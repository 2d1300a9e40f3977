#pragma once

// Deliberately naive reference implementations used to cross-check the
// library: loops over raw arrays, no shared code with src/.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace oracle {

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

inline std::vector<double> column(const Eigen::MatrixXd& x, Eigen::Index c) {
  std::vector<double> v(std::size_t(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) v[std::size_t(r)] = x(r, c);
  return v;
}

/// Spearman(-corr(i, j), D(i, j)) over pairs i < j with D < d_max (d_max <= 0: all pairs).
inline double topo_stat(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d, double d_max) {
  std::vector<double> neg_r, dist;
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    for (Eigen::Index j = i + 1; j < x.cols(); ++j) {
      if (d_max > 0 && !(d(i, j) < d_max)) continue;
      neg_r.push_back(-pearson(column(x, i), column(x, j)));
      dist.push_back(d(i, j));
    }
  return spearman(neg_r, dist);
}

/// Leave-one-out residuals by literally refitting ridge (unpenalized intercept) n times.
inline Eigen::VectorXd ridge_loo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd a(n - 1, p + 1);
    Eigen::VectorXd b(n - 1);
    for (Eigen::Index r = 0, k = 0; r < n; ++r) {
      if (r == i) continue;
      a(k, 0) = 1.0;
      a.row(k).tail(p) = x.row(r);
      b(k++) = y(r);
    }
    Eigen::MatrixXd pen = Eigen::MatrixXd::Identity(p + 1, p + 1) * lambda;
    pen(0, 0) = 0.0;
    const Eigen::VectorXd w = (a.transpose() * a + pen).ldlt().solve(a.transpose() * b);
    out(i) = y(i) - (w(0) + x.row(i).dot(w.tail(p)));
  }
  return out;
}

}  // namespace oracle
