#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "topo/analysis.hpp"
#include "topo/grid.hpp"

using namespace topo;

namespace {

MatrixXd randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Rows whose sample correlation matrix equals `corr` up to rounding.
MatrixXd with_correlation(const MatrixXd& corr, Eigen::Index n, std::mt19937_64& rng) {
  MatrixXd z = randn(n, corr.rows(), rng);
  z = z.rowwise() - z.colwise().mean();
  Eigen::HouseholderQR<MatrixXd> qr(z);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, corr.rows());
  const MatrixXd l = corr.llt().matrixL();
  return q * l.transpose();
}

// Spatially smooth responses on a grid: each unit mixes nearby latent sources.
MatrixXd smooth_responses(const GridLayout& g, Eigen::Index n, double width, std::mt19937_64& rng) {
  const MatrixXd src = randn(n, Eigen::Index(g.size()), rng);
  const auto D = distance_matrix<double>(g);
  const MatrixXd kernel = (-(D.array().square()) / (2 * width * width)).exp();
  return src * kernel;
}

}  // namespace

TEST_CASE("selectivity examples") {
  std::mt19937_64 rng(3);
  const MatrixXd a = randn(20, 9, rng);
  const auto same = selectivity(a, a);
  CHECK(same.s.isZero(0.0));
  CHECK(same.t.isZero(0.0));

  std::normal_distribution<double> noise(0.0, 0.1);
  MatrixXd pa(38, 3), pb(38, 3);
  for (Eigen::Index i = 0; i < 38; ++i)
    for (Eigen::Index u = 0; u < 3; ++u) {
      pa(i, u) = 5.0 + (u == 1 ? 1.0 : 0.0) + noise(rng);
      pb(i, u) = 5.0 + noise(rng);
    }
  const auto m = selectivity(pa, pb);
  CHECK(m.s(1) > 10.0);

  const auto ab = selectivity(pa, pb), ba = selectivity(pb, pa);
  for (Eigen::Index u = 0; u < 3; ++u) CHECK(ab.s(u) == -ba.s(u));

  MatrixXd ca = MatrixXd::Constant(4, 2, 1.0), cb = MatrixXd::Constant(5, 2, 1.0);
  ca(0, 1) = 2.0;
  const auto deg = selectivity(ca, cb);
  CHECK(deg.degenerate[0]);
  CHECK(deg.s(0) == 0.0);
  CHECK_FALSE(deg.degenerate[1]);
  CHECK(deg.degenerate_count() == 1);
  CHECK_THROWS_AS(selectivity(randn(4, 3, rng), randn(4, 2, rng)), Error);
}

TEST_CASE("s = 2 exactly at p = 0.01 with positive t") {
  // s is a pure transform of the test; check the sign and magnitude conventions directly.
  std::mt19937_64 rng(5);
  const MatrixXd a = randn(30, 40, rng), b = randn(30, 40, rng);
  const auto m = selectivity(a, b);
  for (Eigen::Index u = 0; u < 40; ++u) {
    CHECK(m.s(u) == doctest::Approx((m.t(u) > 0 ? 1 : -1) * -std::log10(m.p(u))).epsilon(1e-15));
    CHECK((std::abs(m.s(u)) >= 2.0) == (m.p(u) <= 0.01));
  }
}

TEST_CASE("pca examples and invariants") {
  std::mt19937_64 rng(1);
  Eigen::VectorXd v(6);
  v << 1, -2, 0.5, 3, 0, -1;
  const Eigen::VectorXd coef = randn(40, 1, rng).col(0);
  const MatrixXd rank1 = (coef * v.transpose()).rowwise() + Eigen::RowVectorXd::Constant(6, 2.0);
  const auto r1 = pca(rank1, 1);
  CHECK(std::abs(std::abs(r1.weights.col(0).dot(v.normalized())) - 1.0) < 1e-12);
  CHECK(r1.explained_variance_ratio(0) == doctest::Approx(1.0));
  CHECK(r1.weights(3, 0) > 0.0);  // largest-|.| entry made positive

  const auto rk = pca(rank1, 3);
  CHECK(rk.weights.cols() == 1);
  CHECK(rk.warnings.size() == 1);

  const MatrixXd x = randn(50, 16, rng);
  const auto p = pca(x, 16);
  const MatrixXd gram = p.scores.transpose() * p.scores;
  CHECK((gram - MatrixXd(gram.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((p.weights.transpose() * p.weights - MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-10);
  const MatrixXd centered = x.rowwise() - x.colwise().mean();
  CHECK((p.scores * p.weights.transpose() - centered).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(p.explained_variance_ratio.sum() <= 1.0 + 1e-12);
  for (Eigen::Index c = 1; c < 16; ++c) CHECK(p.singular_values(c) <= p.singular_values(c - 1));
  CHECK_THROWS_AS(pca(MatrixXd::Constant(5, 3, 1.0), 1), Error);
}

TEST_CASE("topo_stat is exactly 1 when correlation decays with distance") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  const Eigen::Index d = 12;
  MatrixXd pts(d, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
  MatrixXd D(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) D(i, j) = (pts.row(i) - pts.row(j)).norm();
  const MatrixXd corr = (-D.array()).exp();
  const MatrixXd x = with_correlation(corr, 60, rng);
  CHECK(topo_stat(x, D).value == doctest::Approx(1.0).epsilon(1e-12));

  // On a lattice the tied distances are broken only by rounding noise.
  const auto g = make_grid(16);
  const MatrixXd Dg = distance_matrix<double>(g);
  const MatrixXd xg = with_correlation((-Dg.array()).exp(), 60, rng);
  CHECK(topo_stat(xg, Dg).value > 0.9);
}

TEST_CASE("topo_stat matches the brute-force oracle") {
  std::mt19937_64 rng(4);
  for (std::size_t d : {16u, 25u}) {
    const auto g = make_grid(d);
    const MatrixXd D = distance_matrix<double>(g);
    for (int rep = 0; rep < 5; ++rep) {
      const MatrixXd x = smooth_responses(g, 30, 1.0 + rep * 0.3, rng) + 0.5 * randn(30, Eigen::Index(d), rng);
      CHECK(std::abs(topo_stat(x, D).value - oracle::topo_stat(x, D, 0)) < 1e-12);
      for (double dm : {2.5, 3.2}) CHECK(std::abs(topo_stat(x, D, dm).value - oracle::topo_stat(x, D, dm)) < 1e-12);
    }
  }
}

TEST_CASE("topo_stat invariances and errors") {
  std::mt19937_64 rng(6);
  const auto g = make_grid(25);
  const MatrixXd D = distance_matrix<double>(g);
  const MatrixXd x = smooth_responses(g, 40, 1.2, rng) + 0.3 * randn(40, 25, rng);
  const double base = topo_stat(x, D).value;

  std::uniform_real_distribution<double> pos(0.5, 3.0), shift(-5, 5);
  MatrixXd scaled = x;
  for (Eigen::Index u = 0; u < 25; ++u) scaled.col(u) = scaled.col(u).array() * pos(rng) + shift(rng);
  CHECK(topo_stat(scaled, D).value == doctest::Approx(base).epsilon(1e-10));

  std::vector<Eigen::Index> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixXd xp(40, 25);
  for (Eigen::Index u = 0; u < 25; ++u) xp.col(u) = x.col(perm[std::size_t(u)]);
  CHECK(topo_stat(xp, permute_distances(D, perm)).value == doctest::Approx(base).epsilon(1e-12));

  MatrixXd withconst = x;
  withconst.col(3).setConstant(2.0);
  CHECK(topo_stat(withconst, D).excluded_units == 1);

  CHECK_THROWS_AS(topo_stat(x, D, 1.0), Error);  // no pairs strictly below 1
  CHECK_THROWS_AS(topo_stat(x.leftCols(9), D), Error);
}

TEST_CASE("topo scales and profile") {
  const auto g = make_grid(64);
  const MatrixXd D = distance_matrix<double>(g);
  const auto scales = topo_scales(D);
  REQUIRE(scales.size() == 9);
  std::vector<double> nz;
  for (Eigen::Index i = 0; i < 64; ++i)
    for (Eigen::Index j = i + 1; j < 64; ++j) nz.push_back(D(i, j));
  std::sort(nz.begin(), nz.end());
  const double pos = 0.1 * double(nz.size() - 1);
  const double p10 = nz[std::size_t(pos)] + (pos - std::floor(pos)) * (nz[std::size_t(pos) + 1] - nz[std::size_t(pos)]);
  CHECK(scales.front() == doctest::Approx(p10));
  CHECK(scales.back() == doctest::Approx(nz.back()));
  for (std::size_t i = 1; i < 9; ++i)
    CHECK(scales[i] - scales[i - 1] == doctest::Approx((scales.back() - scales.front()) / 8));

  std::mt19937_64 rng(9);
  const MatrixXd x = smooth_responses(g, 50, 1.0, rng);
  const auto prof = topo_stat_profile(x, D);
  CHECK(prof.t_gd.size() == 9);
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    if (!prof.valid[i]) continue;
    CHECK(prof.t_gd[i] >= -1.0);
    CHECK(prof.t_gd[i] <= 1.0);
    CHECK(prof.t_gd[i] == doctest::Approx(oracle::topo_stat(x, D, prof.scales[i])).epsilon(1e-12));
    sum += prof.t_gd[i];
    ++n;
  }
  CHECK(prof.mean == doctest::Approx(sum / double(n)));
  CHECK(prof.mean > 0.3);

  const auto flat = topo_stat_profile(MatrixXd::Constant(10, 64, 1.0), D);
  CHECK(flat.valid_count() == 0);
  CHECK(std::isnan(flat.mean));
}

TEST_CASE("permutation null") {
  std::mt19937_64 rng(10);
  const auto g = make_grid(36);
  const MatrixXd D = distance_matrix<double>(g);
  const MatrixXd smooth = smooth_responses(g, 60, 1.0, rng);
  const auto res = permutation_null(smooth, D, 100, 7);
  CHECK(res.null.size() == 100);
  CHECK(res.significant);
  CHECK(res.observed == doctest::Approx(topo_stat_profile(smooth, D).mean).epsilon(1e-15));

  std::vector<Eigen::Index> ident(36);
  std::iota(ident.begin(), ident.end(), 0);
  CHECK(permute_distances(D, ident) == D);

  // Null centred near zero: observed from random data lies inside +-2 sd.
  const MatrixXd noise = randn(60, 36, rng);
  const auto r = permutation_null(noise, D, 100, 3, TopoSummary::Global);
  double m = 0, s = 0;
  for (double v : r.null) m += v / 100.0;
  for (double v : r.null) s += (v - m) * (v - m) / 99.0;
  CHECK(std::abs(m) < 2.0 * std::sqrt(s) + 1e-12);
  CHECK(std::abs(r.observed - m) < 3.0 * std::sqrt(s));

  const auto again = permutation_null(smooth, D, 100, 7, TopoSummary::ProfileMean, 3);
  CHECK(again.null == res.null);
  CHECK_THROWS_AS(permutation_null(smooth, D, 19, 7), Error);
}

TEST_CASE("decode") {
  std::mt19937_64 rng(11);
  const Eigen::Index n = 200;
  MatrixXd x = randn(n, 30, rng);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    labels[std::size_t(i)] = int(i % 2);
    x(i, 0) += labels[std::size_t(i)] ? 4.0 : -4.0;
  }
  const auto sep = decode(x, labels, 20, 0.8, 1);
  CHECK(sep.accuracy == 1.0);
  CHECK(sep.train_size == 160);
  CHECK(sep.test_size == 40);

  std::vector<int> shuffled = labels;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const MatrixXd pure = randn(n, 30, rng);
  const auto chance = decode(pure, shuffled, 20, 0.8, 2);
  CHECK(std::abs(chance.accuracy - 0.5) <= 0.2);

  const auto trunc = decode(x.leftCols(5), labels, 50, 0.8, 1);
  CHECK(trunc.components == 5);
  CHECK_FALSE(trunc.warnings.empty());

  std::vector<int> one(std::size_t(n), 1);
  CHECK_THROWS_AS(decode(x, one, 10, 0.8, 1), Error);
  CHECK_THROWS_AS(decode(x.topRows(8), std::vector<int>(8, 0), 2, 0.8, 1), Error);
}

TEST_CASE("split indices") {
  const auto [tr, te] = split_indices(10, 0.8, 4);
  CHECK(tr.size() == 8);
  CHECK(te.size() == 2);
  std::vector<Eigen::Index> all(tr);
  all.insert(all.end(), te.begin(), te.end());
  std::sort(all.begin(), all.end());
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(all[std::size_t(i)] == i);
  CHECK(split_indices(10, 0.8, 4) == split_indices(10, 0.8, 4));
}

TEST_CASE("PLS-SVD alignment") {
  std::mt19937_64 rng(12);
  const MatrixXd x = randn(500, 20, rng) * randn(20, 20, rng);
  const auto self = pls_svd_align(x, x, 10, 0.8, 3);
  for (Eigen::Index c = 0; c < 10; ++c) CHECK(self.correlations(c) >= 0.99);
  CHECK((self.weights_x.transpose() * self.weights_x - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-10);

  const auto again = pls_svd_align(x, x, 10, 0.8, 3);
  CHECK(again.correlations == self.correlations);
  CHECK(again.weights_y == self.weights_y);

  MatrixXd withconst = x;
  withconst.col(4).setConstant(1.0);
  const auto dropped = pls_svd_align(withconst, x, 5, 0.8, 3);
  REQUIRE(dropped.dropped_x.size() == 1);
  CHECK(dropped.dropped_x[0] == 4);
  CHECK(dropped.weights_x.row(4).isZero(0.0));
  CHECK_FALSE(dropped.warnings.empty());

  CHECK_THROWS_AS(pls_svd_align(x, x.topRows(100), 5, 0.8, 3), Error);
}

TEST_CASE("ridge LOO matches literal refits") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 5; ++rep) {
    const MatrixXd x = randn(30, 5, rng);
    const Eigen::VectorXd y = x * randn(5, 1, rng).col(0) + randn(30, 1, rng).col(0) + Eigen::VectorXd::Constant(30, 3.0);
    for (double lam : {0.01, 1.0, 50.0}) {
      const Eigen::VectorXd fast = ridge_loo_residuals(x, y, lam);
      const Eigen::VectorXd slow = oracle::ridge_loo(x, y, lam);
      CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("ridge encode") {
  std::mt19937_64 rng(14);
  const MatrixXd x = randn(500, 10, rng);
  const Eigen::VectorXd w = randn(10, 1, rng).col(0);
  const Eigen::VectorXd y = x * w;
  const auto exact = ridge_encode(x, y, {1e-6, 1e-3, 1.0}, 0.8, 1);
  CHECK(exact.held_out_correlation > 0.999);
  CHECK(exact.best_lambda == 1e-6);
  const auto fit = ridge_fit(x, y, 1e-8);
  CHECK((fit.weights - w).cwiseAbs().maxCoeff() < 1e-6);

  const Eigen::VectorXd noise = randn(500, 1, rng).col(0);
  const auto null = ridge_encode(x, noise, {0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0}, 0.8, 1);
  CHECK(std::abs(null.held_out_correlation) < 0.2);
  CHECK(null.loo_mse.size() == 6);
  CHECK_THROWS_AS(ridge_loo_residuals(x, y, 0.0), Error);
}
