#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck_cases.hpp"
#include "topo/autodiff.hpp"

using namespace topo::ad;
using topo::Error;
using topo::ErrorCode;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Tensor sum_squares(Tape& t, const Tensor& x) { return sum_all(t, mul(t, x, x)); }

// A fixed random "probe" makes every output coordinate matter to the loss.
Tensor probe(Tape& t, const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum_all(t, mul(t, y, Tensor::constant(randn(y.rows(), y.cols(), rng))));
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("forward examples") {
  Tape t;
  Tensor z = Tensor::constant(Matrix::Zero(1, 3));
  const Matrix s = softmax_rows(t, z).value();
  for (Index j = 0; j < 3; ++j) CHECK(s(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  std::mt19937_64 rng(1);
  const Matrix A = randn(3, 4, rng);
  CHECK(matmul(t, Tensor::constant(Matrix::Identity(3, 3)), Tensor::constant(A)).value() == A);

  const int label[] = {1};
  CHECK(cross_entropy(t, Tensor::constant(Matrix::Zero(1, 2)), label).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("backward examples") {
  {
    Tape t;
    Tensor x = Tensor::parameter(Matrix::Constant(1, 3, 0.7));
    t.backward(sum_all(t, x));
    CHECK(x.grad() == Matrix::Ones(1, 3));
  }
  {
    Tape t;
    Matrix v(1, 2);
    v << 1, 2;
    Tensor x = Tensor::parameter(v);
    t.backward(sum_squares(t, x));
    CHECK(x.grad()(0, 0) == 2.0);
    CHECK(x.grad()(0, 1) == 4.0);
  }
  {
    Tape t;
    Tensor x = Tensor::parameter(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(x), Error);
  }
}

TEST_CASE("shape and finiteness errors") {
  Tape t;
  Tensor a = Tensor::parameter(Matrix::Ones(2, 3));
  Tensor b = Tensor::parameter(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(matmul(t, a, b), Error);
  CHECK_THROWS_AS(add(t, a, Tensor::constant(Matrix::Ones(3, 2))), Error);
  Matrix bad = Matrix::Ones(2, 3);
  bad(0, 0) = std::nan("");
  try {
    add(t, a, Tensor::constant(bad));
    FAIL("expected NonFiniteInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteInput);
  }
  const std::int64_t ids[] = {0, 5};
  CHECK_THROWS_AS(gather_rows(t, Tensor::parameter(Matrix::Ones(3, 2)), ids), Error);
}

TEST_CASE("gradient checks for every op over ten seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (const auto& [name, err] : gradcheck::op_errors(seed)) {
      CAPTURE(seed);
      CAPTURE(name);
      CHECK(err < kTol);
    }
}

TEST_CASE("gradient_check trivial cases") {
  std::mt19937_64 rng(3);
  const Matrix x = randn(2, 3, rng);
  // Identity graph: f(x) = sum(x) has exact central differences.
  CHECK(gradient_check([](Tape& t, const Tensor& v) { return sum_all(t, v); }, x) == doctest::Approx(0.0).epsilon(1e-9));
  Tensor zero = Tensor::constant(Matrix::Zero(2, 3));
  Tensor w = Tensor::parameter(x);
  CHECK(gradient_check([&](Tape& t) { return sum_all(t, masked_weight(t, w, zero)); }, w) == 0.0);
  CHECK(w.grad().isZero(0.0));
}

TEST_CASE("softmax rows sum to one and layer norm standardizes") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Tape t;
    Tensor x = Tensor::constant(randn(6, 9, rng, 5.0));
    const Matrix s = softmax_rows(t, x).value();
    CHECK((s.array() >= 0.0).all());
    for (Index r = 0; r < 6; ++r) CHECK(std::abs(s.row(r).sum() - 1.0) <= 1e-12);
    const Matrix y = layer_norm(t, x).value();
    for (Index r = 0; r < 6; ++r) {
      const double mu = y.row(r).mean();
      const double var = (y.row(r).array() - mu).square().mean();
      CHECK(std::abs(mu) < 1e-10);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("backward is bitwise deterministic") {
  std::mt19937_64 rng(9);
  const Matrix a0 = randn(5, 5, rng), b0 = randn(5, 5, rng);
  Matrix first;
  for (int run = 0; run < 2; ++run) {
    Tensor a = Tensor::parameter(a0);
    Tape t;
    Tensor y = softmax_rows(t, matmul(t, a, Tensor::constant(b0)));
    t.backward(probe(t, gelu(t, layer_norm(t, y)), 4));
    if (run == 0)
      first = a.grad();
    else
      CHECK(a.grad() == first);
  }
}

TEST_CASE("gradients accumulate across uses of a leaf") {
  Tape t;
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 3.0));
  t.backward(add(t, mul(t, x, x), x));
  CHECK(x.grad()(0, 0) == 7.0);
}

TEST_CASE("adam step examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Matrix p = Matrix::Constant(2, 2, 0.5), g = Matrix::Zero(2, 2);
    AdamState st;
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    adam_step(ps, gs, st);
    CHECK(p == Matrix::Constant(2, 2, 0.5));
  }
  SUBCASE("first bias-corrected step of the large recipe") {
    Matrix p = Matrix::Constant(1, 1, 1.0), g = Matrix::Constant(1, 1, 1.0);
    AdamState st;
    st.config = {0.001, 0.9, 0.98, 1e-12, 0.0, 0.0};
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    adam_step(ps, gs, st);
    CHECK(p(0, 0) - 1.0 == doctest::Approx(-0.001).epsilon(1e-9));
    CHECK(st.t == 1);
  }
  SUBCASE("global-norm clipping scales gradients before the moments") {
    Matrix p = Matrix::Zero(1, 4), g = Matrix::Constant(1, 4, 1.0);  // norm 2
    AdamState st;
    st.config.clip_value = 0.5;
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    adam_step(ps, gs, st);
    CHECK(st.m[0](0, 0) == doctest::Approx(0.1 * 0.25));
    CHECK(st.v[0](0, 0) == doctest::Approx(0.001 * 0.0625));
  }
  SUBCASE("decoupled weight decay") {
    Matrix p = Matrix::Constant(1, 1, 2.0), g = Matrix::Zero(1, 1);
    AdamState st;
    st.config.weight_decay = 0.01;
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    adam_step(ps, gs, st);
    CHECK(p(0, 0) == doctest::Approx(2.0 - 1e-3 * 0.01 * 2.0));
  }
  SUBCASE("tensor overload minimizes a quadratic") {
    Tensor x = Tensor::parameter(Matrix::Constant(1, 3, 4.0));
    AdamState st;
    st.config.lr = 0.05;
    for (int i = 0; i < 2000; ++i) {
      x.zero_grad();
      Tape t;
      t.backward(sum_squares(t, x));
      const Tensor ps[] = {x};
      adam_step(ps, st);
    }
    CHECK(x.value().cwiseAbs().maxCoeff() < 1e-2);
  }
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(2);
  Tape t;
  Tensor x = Tensor::parameter(Matrix::Ones(50, 50));
  CHECK(dropout(t, x, 0.0, rng).value() == x.value());
  const Matrix y = dropout(t, x, 0.5, rng).value();
  CHECK(((y.array() == 0.0) || (y.array() == 2.0)).all());
  CHECK(std::abs(y.mean() - 1.0) < 0.1);
}
