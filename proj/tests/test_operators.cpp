#include "gsgs/error.hpp"
#include "gsgs/operators.hpp"
#include "gsgs/rng.hpp"
#include "gsgs/superres.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace gsgs;

namespace {

Vector iota(Index n) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  return x;
}

double adjoint_gap(const LinearOperator& op, Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vector u = standard_normal_vector(rng, op.in_dim());
    const Vector v = standard_normal_vector(rng, op.out_dim());
    const double gap = std::abs(op.apply(u).dot(v) - u.dot(op.adjoint_apply(v)));
    worst = std::max(worst, gap / (u.norm() * v.norm() + 1.0));
  }
  return worst;
}

// y[r, c] = sum s(i, j) x[r - i + ar, c - j + ac], periodic.
Vector direct(GridShape g, const Eigen::MatrixXd& s, PixelOffset a, const Vector& x) {
  Vector y = Vector::Zero(g.size());
  for (Index r = 0; r < g.rows; ++r) {
    for (Index c = 0; c < g.cols; ++c) {
      for (Index i = 0; i < s.rows(); ++i) {
        for (Index j = 0; j < s.cols(); ++j) {
          const Index rr = ((r - i + a.row) % g.rows + g.rows) % g.rows;
          const Index cc = ((c - j + a.col) % g.cols + g.cols) % g.cols;
          y[r * g.cols + c] += s(i, j) * x[rr * g.cols + cc];
        }
      }
    }
  }
  return y;
}

}  // namespace

TEST(Circulant, IdentityKernelLeavesInputUnchanged) {
  Rng rng(1);
  const auto op = make_circulant({4, 4}, Eigen::MatrixXd::Ones(1, 1), {0, 0});
  const Vector x = standard_normal_vector(rng, 16);
  EXPECT_LE((op->apply(x) - x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Circulant, MeanFilterPreservesConstants) {
  const auto op = make_circulant({8, 8}, Eigen::MatrixXd::Constant(3, 3, 1.0 / 9.0), {1, 1});
  const Vector c = Vector::Constant(64, 7.25);
  EXPECT_LE((op->apply(c) - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Circulant, LaplacianAnnihilatesConstants) {
  Eigen::MatrixXd lap(3, 3);
  lap << 0, -1, 0, -1, 4, -1, 0, -1, 0;
  const auto op = make_circulant({6, 6}, lap, {1, 1});
  EXPECT_LE(op->apply(Vector::Constant(36, -3.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Circulant, DeltaReturnsShiftedKernel) {
  Eigen::MatrixXd s(2, 3);
  s << 1, 2, 3, 4, 5, 6;
  const auto op = make_circulant({5, 6}, s, {1, 2});
  Vector delta = Vector::Zero(30);
  delta[0] = 1.0;
  const Vector y = op->apply(delta);
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 3; ++j) {
      const Index r = ((i - 1) % 5 + 5) % 5;
      const Index c = ((j - 2) % 6 + 6) % 6;
      EXPECT_NEAR(y[r * 6 + c], s(i, j), 1e-12);
    }
  }
  EXPECT_NEAR(y.sum(), s.sum(), 1e-12);
}

TEST(Circulant, MatchesDirectConvolutionOnSmallGrids) {
  Rng rng(2);
  struct Case {
    GridShape g;
    Index kr, kc;
    PixelOffset a;
  };
  for (const Case& c : {Case{{16, 16}, 5, 5, {2, 2}}, Case{{7, 9}, 3, 2, {0, 1}},
                        Case{{1, 16}, 1, 4, {0, 3}}, Case{{16, 1}, 3, 1, {1, 0}},
                        Case{{2, 2}, 2, 2, {1, 1}}, Case{{15, 16}, 4, 4, {3, 0}}}) {
    Eigen::MatrixXd s(c.kr, c.kc);
    for (Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
    const auto op = make_circulant(c.g, s, c.a);
    const Vector x = standard_normal_vector(rng, c.g.size());
    const Vector ref = direct(c.g, s, c.a, x);
    EXPECT_LE((op->apply(x) - ref).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()))
        << c.g.rows << "x" << c.g.cols;
  }
}

TEST(Circulant, AdjointIsCorrelation) {
  Rng rng(3);
  Eigen::MatrixXd s(3, 2);
  s << 1, -2, 0.5, 3, -1, 2;
  const auto op = make_circulant({6, 5}, s, {1, 0});
  EXPECT_LE(adjoint_gap(*op, rng), 1e-10);
}

TEST(Circulant, NormalHasSquaredMagnitudeSpectrum) {
  Rng rng(4);
  const auto h = make_uniform_blur({12, 10}, 5);
  const auto n = h->normal();
  const Spectrum expected = h->kernel_spectrum().abs2().cast<std::complex<double>>();
  EXPECT_LE((n->kernel_spectrum() - expected).abs().maxCoeff(), 1e-12);
  EXPECT_GE(n->kernel_spectrum().real().minCoeff(), 0.0);
  EXPECT_EQ(n->kernel_spectrum().imag().abs().maxCoeff(), 0.0);
  const Vector x = standard_normal_vector(rng, 120);
  EXPECT_LE((n->apply(x) - h->adjoint_apply(h->apply(x))).norm(), 1e-12 * x.norm());
}

TEST(Circulant, SpectrumLayoutIsHalfPlane) {
  const auto op = make_circulant({6, 7}, Eigen::MatrixXd::Ones(2, 2), {0, 0});
  EXPECT_EQ(op->kernel_spectrum().rows(), 6);
  EXPECT_EQ(op->kernel_spectrum().cols(), 7 / 2 + 1);
  EXPECT_NEAR(op->kernel_spectrum()(0, 0).real(), 4.0, 1e-14);
}

TEST(Circulant, StencilLargerThanGridIsDimensionError) {
  EXPECT_THROW(make_circulant({3, 3}, Eigen::MatrixXd::Ones(4, 1), {0, 0}), DimensionError);
  EXPECT_THROW(make_circulant({3, 3}, Eigen::MatrixXd::Ones(1, 4), {0, 0}), DimensionError);
}

TEST(Circulant, AnchorOutsideStencilIsConfigError) {
  EXPECT_THROW(make_circulant({4, 4}, Eigen::MatrixXd::Ones(2, 2), {2, 0}), ConfigError);
  EXPECT_THROW(make_circulant({4, 4}, Eigen::MatrixXd::Ones(2, 2), {0, -1}), ConfigError);
}

TEST(Decimation, SelectsEvenSubgrid) {
  const auto s = make_decimation({4, 4}, 2, {{0, 0}});
  Vector expected(4);
  expected << 0, 2, 8, 10;
  EXPECT_EQ(s->apply(iota(16)), expected);
  EXPECT_EQ(s->lr_shape(), (GridShape{2, 2}));
}

TEST(Decimation, FramesConcatenateInOffsetOrder) {
  const auto s = make_decimation({4, 4}, 2, {{0, 0}, {1, 1}});
  EXPECT_EQ(s->out_dim(), 8);
  Vector expected(8);
  expected << 0, 2, 8, 10, 5, 7, 13, 15;
  EXPECT_EQ(s->apply(iota(16)), expected);
}

TEST(Decimation, AdjointThenApplyIsIdentity) {
  Rng rng(5);
  const auto s = make_decimation({8, 6}, 2, {{0, 0}, {1, 0}, {0, 1}});
  const Vector y = standard_normal_vector(rng, s->out_dim());
  EXPECT_EQ(s->apply(s->adjoint_apply(y)), y);
  const DenseMatrix d = densify(*s).matrix();
  EXPECT_EQ(d * d.transpose(), DenseMatrix::Identity(s->out_dim(), s->out_dim()));
  EXPECT_LE(adjoint_gap(*s, rng), 1e-10);
}

TEST(Decimation, RepeatedOffsetsAccumulateInAdjoint) {
  const auto s = make_decimation({2, 2}, 2, {{0, 0}, {0, 0}});
  Vector y(2);
  y << 1.5, 2.0;
  const Vector back = s->adjoint_apply(y);
  EXPECT_DOUBLE_EQ(back[0], 3.5);
  EXPECT_DOUBLE_EQ(back.tail(3).cwiseAbs().sum(), 0.0);
}

TEST(Decimation, InvalidConfigurationsThrow) {
  EXPECT_THROW(make_decimation({5, 4}, 2, {{0, 0}}), ConfigError);
  EXPECT_THROW(make_decimation({4, 4}, 2, {{2, 0}}), ConfigError);
  EXPECT_THROW(make_decimation({4, 4}, 2, {{0, -1}}), ConfigError);
  EXPECT_THROW(make_decimation({4, 4}, 2, {}), ConfigError);
  EXPECT_THROW(make_decimation({4, 4}, 0, {{0, 0}}), ConfigError);
}

TEST(Compose, IdentityChain) {
  Rng rng(6);
  const OperatorPtr i = std::make_shared<IdentityOperator>(5);
  const Vector x = standard_normal_vector(rng, 5);
  EXPECT_EQ(compose({i, i})->apply(x), x);
}

TEST(Compose, MatchesDenseProductAndAdjoint) {
  Rng rng(7);
  const GridShape g{8, 8};
  const auto h = make_uniform_blur(g, 3);
  const auto s = make_decimation(g, 2, {{0, 0}, {1, 1}});
  const OperatorPtr a = compose({s, h});
  const DenseMatrix expected = densify(*s).matrix() * densify(*h).matrix();
  EXPECT_LE((densify(*a).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(adjoint_gap(*a, rng), 1e-10);
  const Vector rows = densify(*a).matrix().rowwise().sum();
  EXPECT_LE((rows.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Compose, DimensionMismatchThrows) {
  const OperatorPtr a = std::make_shared<IdentityOperator>(3);
  const OperatorPtr b = std::make_shared<IdentityOperator>(4);
  EXPECT_THROW(compose({a, b}), DimensionError);
  EXPECT_THROW(compose({}), DimensionError);
}

TEST(LinearOperator, WrongLengthThrows) {
  const DenseOperator d(DenseMatrix::Ones(2, 3));
  EXPECT_THROW(d.apply(Vector::Ones(2)), DimensionError);
  EXPECT_THROW(d.adjoint_apply(Vector::Ones(3)), DimensionError);
}

TEST(LinearOperator, DenseApplyIsExactProduct) {
  Rng rng(8);
  DenseMatrix m(3, 4);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  const DenseOperator d(m);
  const Vector x = standard_normal_vector(rng, 4);
  const Vector y = standard_normal_vector(rng, 3);
  EXPECT_EQ(d.apply(x), Vector(m * x));
  EXPECT_EQ(d.adjoint_apply(y), Vector(m.transpose() * y));
}

TEST(LinearOperator, Linearity) {
  Rng rng(9);
  const auto ops = make_operators(Geometry::desk());
  for (const OperatorPtr& op :
       std::vector<OperatorPtr>{ops.blur, ops.laplacian, ops.decimation,
                                compose({ops.decimation, ops.blur})}) {
    const Vector u = standard_normal_vector(rng, op->in_dim());
    const Vector w = standard_normal_vector(rng, op->in_dim());
    const double a = -1.7;
    const Vector lhs = op->apply(a * u + w);
    const Vector rhs = a * op->apply(u) + op->apply(w);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
  }
}

TEST(Densify, IdentityAndCirculantByHand) {
  EXPECT_EQ(densify(IdentityOperator(3)).matrix(), DenseMatrix::Identity(3, 3));
  Eigen::MatrixXd s(2, 1);
  s << 1, 2;
  const DenseMatrix c = densify(*make_circulant({4, 1}, s, {0, 0})).matrix();
  DenseMatrix expected(4, 4);
  expected << 1, 0, 0, 2, 2, 1, 0, 0, 0, 2, 1, 0, 0, 0, 2, 1;
  EXPECT_LE((c - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Densify, AgreesWithApply) {
  Rng rng(10);
  const auto ops = make_operators({{8, 8}, 2, {{0, 0}, {1, 0}}, 3});
  const OperatorPtr a = compose({ops.decimation, ops.blur});
  const DenseOperator d = densify(*a);
  for (int k = 0; k < 20; ++k) {
    const Vector x = standard_normal_vector(rng, 64);
    EXPECT_LE((d.apply(x) - a->apply(x)).norm(), 1e-13 * a->apply(x).norm());
  }
}

TEST(Densify, CapExceededIsSizeError) {
  EXPECT_THROW(densify(IdentityOperator(100), 9999), SizeError);
  EXPECT_NO_THROW(densify(IdentityOperator(100), 10000));
}

TEST(Operators, AdjointIdentityForSuperResolutionOperators) {
  Rng rng(11);
  const auto ops = make_operators(Geometry::desk());
  EXPECT_LE(adjoint_gap(*ops.blur, rng), 1e-10);
  EXPECT_LE(adjoint_gap(*ops.laplacian, rng), 1e-10);
  EXPECT_LE(adjoint_gap(*ops.decimation, rng), 1e-10);
  EXPECT_LE(adjoint_gap(*compose({ops.decimation, ops.blur}), rng), 1e-10);
  EXPECT_LE(adjoint_gap(*make_laplacian({1, 16}), rng), 1e-10);
}

TEST(Operators, ConcurrentApplyIsDeterministic) {
  Rng rng(12);
  const auto blur = make_uniform_blur({32, 32}, 5);
  const Vector x = standard_normal_vector(rng, 1024);
  const Vector ref = blur->apply(x);
  std::vector<Vector> out(4);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t) {
      pool.emplace_back([&, t] {
        for (int k = 0; k < 20; ++k) out[static_cast<std::size_t>(t)] = blur->apply(x);
      });
    }
  }
  for (const auto& v : out) EXPECT_EQ(v, ref);
}
