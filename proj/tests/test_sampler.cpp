#include "gsgs/diagnostics.hpp"
#include "gsgs/error.hpp"
#include "gsgs/sampler.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace gsgs;

namespace {

DenseMatrix diag(const Vector& v) {
  DenseMatrix d = DenseMatrix::Zero(v.size(), v.size());
  d.diagonal() = v;
  return d;
}

DenseMatrix random_spd(Index n, Rng& rng) {
  DenseMatrix g(n, n);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  DenseMatrix q = g.transpose() * g / static_cast<double>(n);
  q.diagonal().array() += 0.2;
  return q;
}

GsgsConfig config(int n_dirs, Perturbation p, std::int64_t iters) {
  GsgsConfig c;
  c.n_dirs = n_dirs;
  c.perturbation = p;
  c.max_iters = iters;
  c.keep_snapshots = false;
  return c;
}

std::vector<double> coordinate(const std::vector<Vector>& xs, Index i) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x[i]);
  return out;
}

}  // namespace

TEST(GsgsConfig, Validation) {
  GsgsConfig c;
  EXPECT_NO_THROW(c.validate());
  c.burn_in = c.max_iters;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.perturbation_period = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.n_dirs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.thinning = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Perturbation, ParseAndPrintRoundTrip) {
  for (Perturbation p : {Perturbation::kNone, Perturbation::kIidNormal, Perturbation::kFactoredQ}) {
    EXPECT_EQ(parse_perturbation(to_string(p)), p);
  }
  EXPECT_THROW(parse_perturbation("gaussian"), ConfigError);
}

TEST(GsgsStep, IdentityPrecisionGivesUncorrelatedIterates) {
  const Index n = 4;
  const ThetaModel model =
      fixed_theta_model(PrecisionModel::from_dense(DenseMatrix::Identity(n, n), Vector::Zero(n)));
  GsgsConfig cfg = config(static_cast<int>(n), Perturbation::kFactoredQ, 100000);
  cfg.keep_snapshots = true;
  const ChainRecord rec = run_chain(model, Vector::Ones(n), cfg);
  std::vector<Vector> xs;
  for (const auto& s : rec.snapshots) xs.push_back(s.x);
  ASSERT_EQ(xs.size(), 100000u);
  for (Index i = 0; i < n; ++i) {
    const Autocorrelation ac = autocorrelation(coordinate(xs, i), 1);
    EXPECT_LE(std::abs(ac.rho[1]), 0.01) << "coordinate " << i;
  }
}

// Long-run covariance of a 2-D chain with one direction per step.
TEST(GsgsStep, TwoDimensionalSingleDirectionLongRunCovariance) {
  DenseMatrix q(2, 2);
  q << 2.0, 0.6, 0.6, 1.0;
  const ThetaModel model = fixed_theta_model(PrecisionModel::from_dense(q, Vector::Zero(2)));
  GsgsConfig cfg = config(1, Perturbation::kIidNormal, 1'000'000);
  cfg.burn_in = 1000;
  cfg.keep_snapshots = true;
  cfg.seed = 21;
  const ChainRecord rec = run_chain(model, Vector::Ones(2), cfg);
  std::vector<Vector> xs;
  for (const auto& s : rec.snapshots) xs.push_back(s.x);
  const MomentSummary s = summarize(xs, true);
  const DenseMatrix inv = q.inverse();
  EXPECT_LE((*s.covariance - inv).norm() / inv.norm(), 0.05)
      << "sample covariance\n" << *s.covariance << "\nexpected\n" << inv;
}

TEST(GsgsStep, WithoutPerturbationTheChainKeepsExploring) {
  Vector d(4);
  d << 1, 2, 3, 4;
  const ThetaModel model = fixed_theta_model(PrecisionModel::from_dense(diag(d), Vector::Zero(4)));
  GsgsConfig cfg = config(2, Perturbation::kNone, 100000);
  cfg.burn_in = 100;
  const ChainRecord rec = run_chain(model, Vector::Ones(4), cfg);
  const Vector var = rec.moments.variance();
  for (Index i = 0; i < 4; ++i) EXPECT_GT(var[i], 0.5 / d[i]) << "coordinate " << i;
}

TEST(GsgsStep, OneStepReachesEveryCoordinate) {
  Rng setup(3);
  const DenseMatrix dq = random_spd(8, setup);
  const ThetaModel model = fixed_theta_model(PrecisionModel::from_dense(dq, Vector::Zero(8)));
  const Vector x0 = standard_normal_vector(setup, 8);
  for (Perturbation p : {Perturbation::kIidNormal, Perturbation::kFactoredQ}) {
    ChainState state{x0, {}, 0, Rng(4)};
    MomentAccumulator acc(8, false);
    for (int k = 0; k < 10000; ++k) {
      state.x = x0;
      gsgs_step(model, state, config(1, p, 1));
      acc.add(state.x);
    }
    EXPECT_GT(acc.summary().variance.minCoeff(), 0.0);
  }
}

TEST(GsgsStep, SingleDirectionWithoutPerturbationIsRandomizedSteepestDescent) {
  const Index n = 5;
  const Vector b = Vector::LinSpaced(n, -1.0, 1.0);
  const PrecisionModel q = PrecisionModel::from_dense(DenseMatrix::Identity(n, n), b);
  const ThetaModel model = fixed_theta_model(q);
  ChainState state{Vector::Constant(n, 2.0), {}, 0, Rng(5)};
  Rng reference_rng(5);
  Vector reference = state.x;
  for (int k = 0; k < 50; ++k) {
    gsgs_step(model, state, config(1, Perturbation::kNone, 1));
    const Vector g = reference - b;
    const Vector d = g.normalized();
    const double alpha = d.dot(g) + reference_rng.normal();
    reference -= alpha * d;
    ASSERT_LE((state.x - reference).norm(), 1e-12 * (1.0 + reference.norm())) << "step " << k;
  }
}

TEST(GsgsStep, PerturbationPeriod) {
  const ThetaModel model =
      fixed_theta_model(PrecisionModel::from_dense(DenseMatrix::Identity(3, 3), Vector::Zero(3)));
  GsgsConfig cfg = config(1, Perturbation::kIidNormal, 10);
  cfg.perturbation_period = 3;
  const ChainRecord rec = run_chain(model, Vector::Ones(3), cfg);
  for (const auto& it : rec.iterations) EXPECT_EQ(it.perturbed, (it.t - 1) % 3 == 0) << it.t;
}

TEST(GsgsStep, ZeroSeedDirectionSkipsTheUpdate) {
  const PrecisionModel q = PrecisionModel::from_dense(DenseMatrix::Identity(2, 2), Vector::Ones(2));
  const ThetaModel model = fixed_theta_model(q);
  ChainState state{Vector::Ones(2), {}, 0, Rng(1)};
  const StepInfo info = gsgs_step(model, state, config(2, Perturbation::kNone, 1));
  EXPECT_TRUE(info.skipped);
  EXPECT_EQ(state.t, 1);
  EXPECT_EQ(state.x, Vector::Ones(2));
  const ChainRecord rec = run_chain(model, Vector::Ones(2), config(2, Perturbation::kNone, 5));
  EXPECT_EQ(rec.skipped, 5);
}

TEST(GsgsStep, NonFiniteStateIsFatal) {
  const PrecisionModel q = PrecisionModel::from_dense(DenseMatrix::Identity(2, 2), Vector::Zero(2));
  const ThetaModel model = fixed_theta_model(q);
  ChainState state{Vector::Constant(2, std::numeric_limits<double>::quiet_NaN()), {}, 0, Rng(1)};
  EXPECT_THROW(gsgs_step(model, state, config(1, Perturbation::kNone, 1)), Error);
}

TEST(GsgsStep, DimensionMismatchThrows) {
  const ThetaModel model =
      fixed_theta_model(PrecisionModel::from_dense(DenseMatrix::Identity(3, 3), Vector::Zero(3)));
  ChainState state{Vector::Ones(2), {}, 0, Rng(1)};
  EXPECT_THROW(gsgs_step(model, state, config(1, Perturbation::kNone, 1)), DimensionError);
}

TEST(RunChain, SnapshotCountFollowsBurnInAndThinning) {
  const ThetaModel model =
      fixed_theta_model(PrecisionModel::from_dense(DenseMatrix::Identity(3, 3), Vector::Zero(3)));
  GsgsConfig cfg = config(2, Perturbation::kFactoredQ, 100);
  cfg.burn_in = 10;
  cfg.thinning = 10;
  cfg.keep_snapshots = true;
  const ChainRecord rec = run_chain(model, Vector::Ones(3), cfg);
  ASSERT_EQ(rec.snapshots.size(), 9u);
  EXPECT_EQ(rec.snapshots.front().t, 20);
  EXPECT_EQ(rec.snapshots.back().t, 100);
  EXPECT_EQ(rec.moments.count(), 90);
  EXPECT_EQ(rec.iterations.size(), 100u);
}

TEST(RunChain, SameSeedIsBitIdentical) {
  Rng setup(6);
  const ThetaModel model =
      fixed_theta_model(PrecisionModel::from_dense(random_spd(6, setup), standard_normal_vector(setup, 6)));
  GsgsConfig cfg = config(3, Perturbation::kFactoredQ, 200);
  cfg.keep_snapshots = true;
  cfg.seed = 77;
  const ChainRecord a = run_chain(model, Vector::Zero(6), cfg);
  const ChainRecord b = run_chain(model, Vector::Zero(6), cfg);
  EXPECT_TRUE(same_samples(a, b));
  cfg.seed = 78;
  EXPECT_FALSE(same_samples(a, run_chain(model, Vector::Zero(6), cfg)));
}

TEST(RunChain, RunningMeanEqualsSnapshotMean) {
  Rng setup(7);
  const ThetaModel model =
      fixed_theta_model(PrecisionModel::from_dense(random_spd(5, setup), standard_normal_vector(setup, 5)));
  GsgsConfig cfg = config(2, Perturbation::kFactoredQ, 500);
  cfg.burn_in = 50;
  cfg.keep_snapshots = true;
  const ChainRecord rec = run_chain(model, Vector::Zero(5), cfg);
  Vector mean = Vector::Zero(5);
  for (const auto& s : rec.snapshots) mean += s.x;
  mean /= static_cast<double>(rec.snapshots.size());
  EXPECT_LE((mean - rec.moments.mean()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(rec.final_x, rec.snapshots.back().x);
}

TEST(RunChain, ThetaSummariesUsePostBurnInIterations) {
  int calls = 0;
  ThetaModel model;
  model.theta_names = {"k"};
  model.sample_theta = [&calls](const Vector&, Rng&) { return Theta{static_cast<double>(++calls)}; };
  model.precision_at = [](const Theta&) {
    return PrecisionModel::from_dense(DenseMatrix::Identity(2, 2), Vector::Zero(2));
  };
  GsgsConfig cfg = config(1, Perturbation::kIidNormal, 10);
  cfg.burn_in = 4;
  const ChainRecord rec = run_chain(model, Vector::Ones(2), cfg);
  EXPECT_DOUBLE_EQ(rec.theta_mean(0), 7.5);  // mean of 5..10
  EXPECT_EQ(rec.theta_series(0).size(), 6u);
  EXPECT_EQ(rec.theta_series(0, false).size(), 10u);
}

TEST(RunChains, ChildSeedsAreReproducibleAcrossWorkerCounts) {
  Rng setup(8);
  const ThetaModel model =
      fixed_theta_model(PrecisionModel::from_dense(random_spd(4, setup), Vector::Zero(4)));
  GsgsConfig cfg = config(2, Perturbation::kFactoredQ, 100);
  cfg.keep_snapshots = true;
  const auto serial = run_chains(model, Vector::Ones(4), cfg, 3, 1);
  const auto parallel = run_chains(model, Vector::Ones(4), cfg, 3, 3);
  ASSERT_EQ(serial.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(same_samples(serial[i], parallel[i]));
  EXPECT_FALSE(same_samples(serial[0], serial[1]));
  EXPECT_THROW(run_chains(model, Vector::Ones(4), cfg, 0, 1), ConfigError);
}

TEST(RunningMoments, MatchesTwoPassFormulas) {
  Rng rng(9);
  RunningMoments m;
  std::vector<Vector> xs;
  for (int k = 0; k < 100; ++k) {
    xs.push_back(standard_normal_vector(rng, 3));
    m.add(xs.back());
  }
  const MomentSummary s = summarize(xs, false);
  EXPECT_LE((m.mean() - s.mean).norm(), 1e-13);
  EXPECT_LE((m.variance() - s.variance).norm(), 1e-12);
  EXPECT_THROW(m.add(Vector::Ones(2)), DimensionError);
}

TEST(Krylov, IdentityHasRankOne) {
  const std::vector<PrecisionModel> q{
      PrecisionModel::from_dense(DenseMatrix::Identity(3, 3), Vector::Zero(3))};
  const std::vector<Vector> x{Vector::Unit(3, 0)};
  const std::vector<Vector> b{Vector::Zero(3)};
  const KrylovRank r = krylov_rank_diagnostic(q, x, b);
  EXPECT_EQ(r.rank, 1);
  EXPECT_FALSE(r.certified());
}

TEST(Krylov, DistinctEigenvaluesCertify) {
  const std::vector<PrecisionModel> q{
      PrecisionModel::from_dense(diag(Vector::LinSpaced(3, 1, 3)), Vector::Zero(3))};
  const std::vector<Vector> x{Vector::Ones(3)};
  const std::vector<Vector> b{Vector::Zero(3)};
  const KrylovRank r = krylov_rank_diagnostic(q, x, b);
  EXPECT_EQ(r.rank, 3);
  EXPECT_TRUE(r.certified());
}

TEST(Krylov, RepeatedEigenvalueIsNotCertified) {
  Vector d(3), x(3);
  d << 1, 1, 2;
  x << 1, 0, 1;
  const std::vector<PrecisionModel> q{PrecisionModel::from_dense(diag(d), Vector::Zero(3))};
  const std::vector<Vector> xs{x};
  const std::vector<Vector> b{Vector::Zero(3)};
  const KrylovRank r = krylov_rank_diagnostic(q, xs, b);
  EXPECT_EQ(r.rank, 2);
  EXPECT_FALSE(r.certified());
}

TEST(Krylov, UnionOverTrajectoryAndMeanSeed) {
  Vector d(3);
  d << 1, 1, 2;
  const std::vector<PrecisionModel> q{PrecisionModel::from_dense(diag(d), Vector::Unit(3, 1)),
                                      PrecisionModel::from_dense(diag(d), Vector::Zero(3))};
  Vector x(3);
  x << 1, 0, 1;
  const std::vector<Vector> xs{x, x};
  const std::vector<Vector> b{Vector::Unit(3, 1), Vector::Zero(3)};
  EXPECT_EQ(krylov_rank_diagnostic(q, xs, b).rank, 3);
}

TEST(Krylov, ErrorPaths) {
  const std::vector<PrecisionModel> big{
      PrecisionModel::from_dense(DenseMatrix::Identity(4, 4), Vector::Zero(4))};
  const std::vector<Vector> x{Vector::Ones(4)};
  EXPECT_THROW(krylov_rank_diagnostic(big, x, x, 3), SizeError);
  const std::vector<Vector> none;
  EXPECT_THROW(krylov_rank_diagnostic(big, none, none), DimensionError);
}
