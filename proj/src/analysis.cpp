#include "topo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "topo/parallel.hpp"
#include "topo/stats.hpp"

namespace topo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MatrixXd take_rows(const MatRef& x, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(Eigen::Index(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = x.row(rows[i]);
  return out;
}

VectorXd take_rows(const VecRef& y, const std::vector<Eigen::Index>& rows) {
  VectorXd out(Eigen::Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(Eigen::Index(i)) = y(rows[i]);
  return out;
}

bool is_constant(double sum_sq_dev, double mean, Eigen::Index n) {
  const double tol = 1e-12 * std::max(1.0, std::abs(mean));
  return sum_sq_dev <= tol * tol * double(n);
}

// Makes the largest-magnitude entry of each column positive; applies the same
// flip to `partner` when given.
void fix_signs(MatrixXd& w, MatrixXd* partner = nullptr) {
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    Eigen::Index arg = 0;
    w.col(c).cwiseAbs().maxCoeff(&arg);
    if (w(arg, c) < 0) {
      w.col(c) *= -1.0;
      if (partner) partner->col(c) *= -1.0;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Selectivity

std::size_t SelectivityMap::degenerate_count() const {
  return std::size_t(std::count(degenerate.begin(), degenerate.end(), true));
}

SelectivityMap selectivity(const MatRef& a, const MatRef& b) {
  if (a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, "selectivity: conditions have different unit counts");
  if (a.rows() < 2 || b.rows() < 2)
    throw Error(ErrorCode::InvalidArgument, "selectivity: each condition needs >= 2 rows");
  const Eigen::Index d = a.cols();
  SelectivityMap m;
  m.s.resize(d);
  m.t.resize(d);
  m.p.resize(d);
  m.degenerate.assign(std::size_t(d), false);
  for (Eigen::Index u = 0; u < d; ++u) {
    const auto r = stats::welch_t_test(a.col(u), b.col(u));
    m.degenerate[std::size_t(u)] = r.degenerate;
    m.t(u) = r.t;
    m.p(u) = r.p;
    if (r.degenerate || r.t == 0.0) {
      m.s(u) = 0.0;
    } else {
      const double p = std::max(r.p, 1e-300);
      m.s(u) = (r.t > 0 ? 1.0 : -1.0) * -std::log10(p);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// PCA

MatrixXd PcaResult::transform(const MatRef& x) const {
  return (x.rowwise() - mean) * weights;
}

PcaResult pca(const MatRef& x, Eigen::Index k) {
  if (x.rows() < 2) throw Error(ErrorCode::InvalidArgument, "pca: need at least 2 rows");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "pca: k must be >= 1");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "pca: input has NaN/Inf");
  PcaResult r;
  r.mean = x.colwise().mean();
  const MatrixXd centered = x.rowwise() - r.mean;
  Eigen::BDCSVD<MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  const double tol = sv.size() ? sv(0) * double(std::max(x.rows(), x.cols())) *
                                     std::numeric_limits<double>::epsilon()
                               : 0.0;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  Eigen::Index use = std::min({k, x.rows() - 1, x.cols(), rank});
  if (use < k)
    r.warnings.push_back(std::string(to_string(ErrorCode::RankDeficient)) + ": requested " +
                         std::to_string(k) + " components, data supports " + std::to_string(use));
  if (use == 0) throw Error(ErrorCode::RankDeficient, "pca: data has no variance");
  r.weights = svd.matrixV().leftCols(use);
  fix_signs(r.weights);
  r.scores = centered * r.weights;
  r.singular_values = sv.head(use);
  const double total = sv.squaredNorm();
  r.explained_variance_ratio = sv.head(use).array().square() / total;
  return r;
}

// ---------------------------------------------------------------------------
// Topography

namespace {

struct UnitCorrelations {
  MatrixXd corr;
  std::vector<Eigen::Index> units;  // non-constant units
  std::size_t excluded = 0;
};

UnitCorrelations unit_correlations(const MatRef& x) {
  if (x.rows() < 2) throw Error(ErrorCode::InvalidArgument, "topo_stat: need at least 2 rows");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "topo_stat: input has NaN/Inf");
  UnitCorrelations uc;
  const Eigen::RowVectorXd mu = x.colwise().mean();
  MatrixXd z = x.rowwise() - mu;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index u = 0; u < x.cols(); ++u) {
    const double ss = z.col(u).squaredNorm();
    if (is_constant(ss, mu(u), x.rows())) {
      ++uc.excluded;
      continue;
    }
    keep.push_back(u);
  }
  MatrixXd zk(x.rows(), Eigen::Index(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    zk.col(Eigen::Index(i)) = z.col(keep[i]);
    zk.col(Eigen::Index(i)).normalize();
  }
  uc.corr = (zk.transpose() * zk).cwiseMax(-1.0).cwiseMin(1.0);
  uc.units = std::move(keep);
  return uc;
}

// Flattened upper triangle over the kept units.
struct PairTable {
  std::vector<Eigen::Index> a, b;  // indices into the full unit range
  VectorXd neg_r;
};

PairTable make_pairs(const UnitCorrelations& uc) {
  PairTable t;
  const std::size_t m = uc.units.size();
  const std::size_t n = m * (m - 1) / 2;
  t.a.reserve(n);
  t.b.reserve(n);
  t.neg_r.resize(Eigen::Index(n));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      t.a.push_back(uc.units[i]);
      t.b.push_back(uc.units[j]);
      t.neg_r(k++) = -uc.corr(Eigen::Index(i), Eigen::Index(j));
    }
  return t;
}

struct ScaleValue {
  double value = kNaN;
  std::size_t pairs = 0;
};

// t_{g,d} for one threshold; `dist(k)` is the distance of pair k.
ScaleValue stat_below(const PairTable& t, const VectorXd& dist, std::optional<double> d_max) {
  std::vector<double> nr, dv;
  nr.reserve(t.a.size());
  dv.reserve(t.a.size());
  for (Eigen::Index k = 0; k < dist.size(); ++k)
    if (!d_max || dist(k) < *d_max) {
      nr.push_back(t.neg_r(k));
      dv.push_back(dist(k));
    }
  ScaleValue s;
  s.pairs = nr.size();
  if (s.pairs < 10) return s;
  s.value = stats::spearman(std::span<const double>(nr), std::span<const double>(dv));
  return s;
}

VectorXd pair_distances(const PairTable& t, const MatRef& d) {
  VectorXd out(Eigen::Index(t.a.size()));
  for (std::size_t k = 0; k < t.a.size(); ++k) out(Eigen::Index(k)) = d(t.a[k], t.b[k]);
  return out;
}

void check_distances(const MatRef& x, const MatRef& d) {
  if (d.rows() != d.cols() || d.rows() != x.cols())
    throw Error(ErrorCode::ShapeMismatch, "distance matrix does not match unit count");
}

double profile_mean(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values)
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  return n ? sum / double(n) : kNaN;
}

std::vector<double> profile_values(const PairTable& t, const VectorXd& dist,
                                   const std::vector<double>& scales,
                                   std::vector<std::size_t>* pairs = nullptr) {
  std::vector<double> out;
  for (double s : scales) {
    const auto v = stat_below(t, dist, s);
    out.push_back(v.value);
    if (pairs) pairs->push_back(v.pairs);
  }
  return out;
}

}  // namespace

TopoStat topo_stat(const MatRef& x, const MatRef& distances, std::optional<double> d_max) {
  check_distances(x, distances);
  const auto uc = unit_correlations(x);
  const auto table = make_pairs(uc);
  const auto v = stat_below(table, pair_distances(table, distances), d_max);
  if (v.pairs < 10)
    throw Error(ErrorCode::TooFewPairs, std::to_string(v.pairs) + " usable unit pairs");
  return {v.value, v.pairs, uc.excluded};
}

std::vector<double> topo_scales(const MatRef& distances, std::size_t count) {
  std::vector<double> nz;
  for (Eigen::Index i = 0; i < distances.rows(); ++i)
    for (Eigen::Index j = i + 1; j < distances.cols(); ++j)
      if (distances(i, j) > 0) nz.push_back(distances(i, j));
  if (nz.empty()) throw Error(ErrorCode::TooFewPairs, "no nonzero distances");
  const double hi = *std::max_element(nz.begin(), nz.end());
  const double lo = stats::percentile(std::move(nz), kTopoLowerPercentile);
  std::vector<double> scales(count);
  for (std::size_t i = 0; i < count; ++i)
    scales[i] = count == 1 ? hi : lo + (hi - lo) * double(i) / double(count - 1);
  return scales;
}

std::size_t TopoStatResult::valid_count() const {
  return std::size_t(std::count(valid.begin(), valid.end(), true));
}

TopoStatResult topo_stat_profile(const MatRef& x, const MatRef& distances) {
  check_distances(x, distances);
  TopoStatResult r;
  r.scales = topo_scales(distances);
  const auto uc = unit_correlations(x);
  r.excluded_units = uc.excluded;
  const auto table = make_pairs(uc);
  r.t_gd = profile_values(table, pair_distances(table, distances), r.scales, &r.pairs);
  for (double v : r.t_gd) r.valid.push_back(!std::isnan(v));
  r.mean = profile_mean(r.t_gd);
  return r;
}

MatrixXd permute_distances(const MatRef& distances, const std::vector<Eigen::Index>& perm) {
  const Eigen::Index n = distances.rows();
  if (Eigen::Index(perm.size()) != n)
    throw Error(ErrorCode::ShapeMismatch, "permutation length differs from unit count");
  MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = distances(perm[std::size_t(i)], perm[std::size_t(j)]);
  return out;
}

PermutationNull permutation_null(const MatRef& x, const MatRef& distances, std::size_t n_perm,
                                 std::uint64_t seed, TopoSummary summary, std::size_t threads) {
  check_distances(x, distances);
  if (n_perm < 20) throw Error(ErrorCode::InvalidArgument, "permutation_null: n_perm must be >= 20");
  const auto uc = unit_correlations(x);
  const auto table = make_pairs(uc);
  const std::vector<double> scales =
      summary == TopoSummary::ProfileMean ? topo_scales(distances) : std::vector<double>{};

  auto statistic = [&](const VectorXd& dist) {
    if (summary == TopoSummary::Global) return stat_below(table, dist, std::nullopt).value;
    return profile_mean(profile_values(table, dist, scales));
  };

  PermutationNull r;
  r.summary = summary;
  r.observed = statistic(pair_distances(table, distances));
  if (std::isnan(r.observed))
    throw Error(ErrorCode::TooFewPairs, "observed topography statistic is undefined");

  const Eigen::Index n = distances.rows();
  r.null.assign(n_perm, kNaN);
  parallel_for(n_perm, threads, [&](std::size_t k) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(k),
                      std::uint32_t(k >> 32)};
    std::mt19937_64 rng(seq);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index(0));
    std::shuffle(perm.begin(), perm.end(), rng);
    VectorXd dist(Eigen::Index(table.a.size()));
    for (std::size_t p = 0; p < table.a.size(); ++p)
      dist(Eigen::Index(p)) = distances(perm[std::size_t(table.a[p])], perm[std::size_t(table.b[p])]);
    r.null[k] = statistic(dist);
  });

  std::vector<double> finite;
  for (double v : r.null)
    if (!std::isnan(v)) finite.push_back(v);
  if (finite.empty()) throw Error(ErrorCode::TooFewPairs, "every permuted statistic is undefined");
  r.percentile = stats::percentile_of(finite, r.observed);
  r.threshold95 = stats::percentile(finite, 95.0);
  r.threshold99 = stats::percentile(finite, 99.0);
  r.significant = r.observed > r.threshold95;
  return r;
}

// ---------------------------------------------------------------------------
// Decoding

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(Eigen::Index n,
                                                                              double fraction,
                                                                              std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "split fraction must lie in (0, 1)");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = std::size_t(std::floor(fraction * double(n)));
  std::vector<Eigen::Index> train(idx.begin(), idx.begin() + std::ptrdiff_t(n_train));
  std::vector<Eigen::Index> test(idx.begin() + std::ptrdiff_t(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

DecodeResult decode(const MatRef& x, const std::vector<int>& labels, Eigen::Index n_components,
                    double split, std::uint64_t seed) {
  if (Eigen::Index(labels.size()) != x.rows())
    throw Error(ErrorCode::ShapeMismatch, "decode: one label per row required");
  if (x.rows() < 10) throw Error(ErrorCode::InvalidArgument, "decode: need at least 10 rows");
  for (int l : labels)
    if (l != 0 && l != 1) throw Error(ErrorCode::InvalidArgument, "decode: labels must be 0/1");

  const auto [train, test] = split_indices(x.rows(), split, seed);
  const MatrixXd xtr = take_rows(x, train);
  const MatrixXd xte = take_rows(x, test);
  VectorXd ytr(Eigen::Index(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) ytr(Eigen::Index(i)) = labels[std::size_t(train[i])];
  if (ytr.minCoeff() == ytr.maxCoeff())
    throw Error(ErrorCode::SingleClassSplit, "training split holds a single class");

  DecodeResult r;
  const PcaResult p = pca(xtr, n_components);
  r.warnings = p.warnings;
  r.components = p.weights.cols();
  r.train_size = train.size();
  r.test_size = test.size();

  // Scores are standardized with training statistics so one step size suits
  // every component.
  MatrixXd str = p.scores;
  MatrixXd ste = p.transform(xte);
  const Eigen::RowVectorXd sd =
      (str.array().square().colwise().sum() / double(str.rows())).sqrt().max(1e-12);
  str = str.array().rowwise() / sd.array();
  ste = ste.array().rowwise() / sd.array();

  const Eigen::Index k = str.cols();
  MatrixXd z(str.rows(), k + 1);
  z << str, VectorXd::Ones(str.rows());
  const double n = double(z.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(z.transpose() * z / n, Eigen::EigenvaluesOnly);
  const double lr = 4.0 / std::max(eig.eigenvalues().maxCoeff(), 1e-12);

  VectorXd w = VectorXd::Zero(k + 1);
  constexpr std::size_t kMaxIter = 10000;
  std::size_t it = 0;
  for (; it < kMaxIter; ++it) {
    const VectorXd sig = (1.0 / (1.0 + (-(z * w).array()).exp())).matrix();
    const VectorXd grad = z.transpose() * (sig - ytr) / n;
    if (grad.norm() < 1e-6) break;
    w -= lr * grad;
  }
  r.iterations = it;

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double logit = ste.row(Eigen::Index(i)).dot(w.head(k)) + w(k);
    correct += int(logit > 0.0) == labels[std::size_t(test[i])];
  }
  r.accuracy = test.empty() ? 0.0 : double(correct) / double(test.size());
  return r;
}

// ---------------------------------------------------------------------------
// PLS-SVD

namespace {

struct Standardized {
  MatrixXd train, test;
  std::vector<Eigen::Index> kept, dropped;
};

Standardized zscore_split(const MatRef& x, const std::vector<Eigen::Index>& train,
                          const std::vector<Eigen::Index>& test) {
  const MatrixXd xtr = take_rows(x, train);
  const MatrixXd xte = take_rows(x, test);
  const Eigen::RowVectorXd mu = xtr.colwise().mean();
  Standardized s;
  std::vector<double> sds;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double ss = (xtr.col(c).array() - mu(c)).square().sum();
    if (is_constant(ss, mu(c), xtr.rows())) {
      s.dropped.push_back(c);
    } else {
      s.kept.push_back(c);
      sds.push_back(std::sqrt(ss / double(xtr.rows())));
    }
  }
  s.train.resize(xtr.rows(), Eigen::Index(s.kept.size()));
  s.test.resize(xte.rows(), Eigen::Index(s.kept.size()));
  for (std::size_t i = 0; i < s.kept.size(); ++i) {
    const Eigen::Index c = s.kept[i];
    s.train.col(Eigen::Index(i)) = (xtr.col(c).array() - mu(c)) / sds[i];
    s.test.col(Eigen::Index(i)) = (xte.col(c).array() - mu(c)) / sds[i];
  }
  return s;
}

}  // namespace

AlignmentResult pls_svd_align(const MatRef& x, const MatRef& y, Eigen::Index n_components,
                              double split, std::uint64_t seed) {
  if (x.rows() != y.rows())
    throw Error(ErrorCode::ShapeMismatch, "pls_svd_align: X and Y differ in row count");
  if (n_components < 1) throw Error(ErrorCode::InvalidArgument, "n_components must be >= 1");
  if (!x.allFinite() || !y.allFinite())
    throw Error(ErrorCode::NonFiniteInput, "pls_svd_align: input has NaN/Inf");
  AlignmentResult r;
  std::tie(r.train_rows, r.test_rows) = split_indices(x.rows(), split, seed);
  if (Eigen::Index(r.train_rows.size()) < n_components)
    throw Error(ErrorCode::InvalidArgument, "training split smaller than n_components");
  if (r.test_rows.size() < 3)
    throw Error(ErrorCode::InvalidArgument, "held-out split needs at least 3 rows");

  const auto sx = zscore_split(x, r.train_rows, r.test_rows);
  const auto sy = zscore_split(y, r.train_rows, r.test_rows);
  r.dropped_x = sx.dropped;
  r.dropped_y = sy.dropped;
  if (!sx.dropped.empty())
    r.warnings.push_back(std::string(to_string(ErrorCode::ZeroVarianceColumn)) + ": dropped " +
                         std::to_string(sx.dropped.size()) + " X columns");
  if (!sy.dropped.empty())
    r.warnings.push_back(std::string(to_string(ErrorCode::ZeroVarianceColumn)) + ": dropped " +
                         std::to_string(sy.dropped.size()) + " Y columns");
  if (sx.kept.empty() || sy.kept.empty())
    throw Error(ErrorCode::ZeroVarianceColumn, "no columns with variance remain");

  const MatrixXd cross = sx.train.transpose() * sy.train;
  Eigen::BDCSVD<MatrixXd> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index k = std::min<Eigen::Index>(n_components, svd.singularValues().size());
  if (k < n_components)
    r.warnings.push_back("requested " + std::to_string(n_components) + " components, " +
                         std::to_string(k) + " available");
  MatrixXd u = svd.matrixU().leftCols(k);
  MatrixXd v = svd.matrixV().leftCols(k);
  fix_signs(u, &v);
  r.singular_values = svd.singularValues().head(k);

  const MatrixXd xs = sx.test * u;
  const MatrixXd ys = sy.test * v;
  r.correlations.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) r.correlations(c) = stats::pearson(xs.col(c), ys.col(c));

  r.weights_x = MatrixXd::Zero(x.cols(), k);
  r.weights_y = MatrixXd::Zero(y.cols(), k);
  for (std::size_t i = 0; i < sx.kept.size(); ++i) r.weights_x.row(sx.kept[i]) = u.row(Eigen::Index(i));
  for (std::size_t i = 0; i < sy.kept.size(); ++i) r.weights_y.row(sy.kept[i]) = v.row(Eigen::Index(i));
  return r;
}

// ---------------------------------------------------------------------------
// Ridge

namespace {

struct CenteredSvd {
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
  MatrixXd u;
  VectorXd s;
  MatrixXd v;
  VectorXd yc;
};

CenteredSvd centered_svd(const MatRef& x, const VecRef& y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::ShapeMismatch, "ridge: X and y differ in rows");
  CenteredSvd c;
  c.x_mean = x.colwise().mean();
  c.y_mean = y.mean();
  const MatrixXd xc = x.rowwise() - c.x_mean;
  c.yc = y.array() - c.y_mean;
  Eigen::BDCSVD<MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  c.u = svd.matrixU();
  c.s = svd.singularValues();
  c.v = svd.matrixV();
  return c;
}

}  // namespace

VectorXd ridge_loo_residuals(const MatRef& x, const VecRef& y, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge: lambda must be positive");
  if (x.rows() < 3) throw Error(ErrorCode::InvalidArgument, "ridge: need at least 3 rows");
  const auto c = centered_svd(x, y);
  const VectorXd shrink = c.s.array().square() / (c.s.array().square() + lambda);
  const VectorXd fitted = c.u * (shrink.asDiagonal() * (c.u.transpose() * c.yc));
  const VectorXd leverage =
      (c.u.array().square().matrix() * shrink).array() + 1.0 / double(x.rows());
  return (c.yc - fitted).array() / (1.0 - leverage.array());
}

RidgeFit ridge_fit(const MatRef& x, const VecRef& y, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge: lambda must be positive");
  const auto c = centered_svd(x, y);
  const VectorXd gain = c.s.array() / (c.s.array().square() + lambda);
  RidgeFit f;
  f.weights = c.v * (gain.asDiagonal() * (c.u.transpose() * c.yc));
  f.intercept = c.y_mean - c.x_mean.dot(f.weights);
  return f;
}

RidgeResult ridge_encode(const MatRef& x, const VecRef& y, const std::vector<double>& lambdas,
                         double split, std::uint64_t seed) {
  if (x.rows() != y.size()) throw Error(ErrorCode::ShapeMismatch, "ridge: X and y differ in rows");
  if (x.rows() < 10) throw Error(ErrorCode::InvalidArgument, "ridge_encode: need at least 10 rows");
  if (lambdas.empty()) throw Error(ErrorCode::InvalidArgument, "ridge_encode: empty lambda grid");
  RidgeResult r;
  r.lambdas = lambdas;
  std::tie(r.train_rows, r.test_rows) = split_indices(x.rows(), split, seed);
  const MatrixXd xtr = take_rows(x, r.train_rows);
  const VectorXd ytr = take_rows(y, r.train_rows);
  double best = std::numeric_limits<double>::infinity();
  for (double lam : lambdas) {
    const double mse = ridge_loo_residuals(xtr, ytr, lam).squaredNorm() / double(xtr.rows());
    r.loo_mse.push_back(mse);
    if (mse < best) {
      best = mse;
      r.best_lambda = lam;
    }
  }
  r.fit = ridge_fit(xtr, ytr, r.best_lambda);
  const MatrixXd xte = take_rows(x, r.test_rows);
  const VectorXd yte = take_rows(y, r.test_rows);
  const VectorXd pred = (xte * r.fit.weights).array() + r.fit.intercept;
  r.held_out_correlation = stats::pearson(pred, yte);
  return r;
}

}  // namespace topo
