#pragma once

#include "gsgs/conjugate.hpp"
#include "gsgs/operators.hpp"
#include "gsgs/rng.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsgs {

inline constexpr Index kDenseOracleCap = 512;

struct MomentSummary {
  std::int64_t n_samples = 0;  // 0 marks an exact (analytic) summary
  Vector mean;
  std::optional<DenseMatrix> covariance;
  Vector variance;
  Vector standard_error;  // of the mean, per coordinate

  static MomentSummary exact(Vector mean, DenseMatrix covariance);
};

// Accumulates mean and (optionally) the dense sample covariance.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Index dim, bool full_covariance);

  void add(const Vector& x);
  MomentSummary summary() const;

 private:
  Index dim_;
  bool full_;
  std::int64_t n_ = 0;
  Vector mean_;
  DenseMatrix scatter_;  // full covariance
  Vector m2_;            // diagonal only
};

MomentSummary summarize(std::span<const Vector> samples, bool full_covariance);

struct MomentReport {
  bool pass = true;
  double mean_tol_se = 0.0;
  double cov_tol_rel = 0.0;
  double max_mean_z = 0.0;
  double covariance_gap = 0.0;
  std::vector<Index> failing_coordinates;

  std::string text() const;
  nlohmann::json to_json() const;
};

// Per coordinate |mean_a - mean_b| <= mean_tol_se * sqrt(se_a^2 + se_b^2) and
// ||C_a - C_b||_F / sqrt(||C_a||_F ||C_b||_F) <= cov_tol_rel. Diagonal-only
// summaries compare their variance vectors the same way.
MomentReport moment_compare(const MomentSummary& a, const MomentSummary& b, double mean_tol_se,
                            double cov_tol_rel);

// Exact sampler for N(Q^{-1} b, Q^{-1}) on dense SPD Q: x = m + L^{-t} z.
class CholeskyOracle {
 public:
  CholeskyOracle(const DenseMatrix& q, const Vector& b, Index cap = kDenseOracleCap);

  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  DenseMatrix covariance() const;
  Vector sample(Rng& rng) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Vector mean_;
};

Vector cholesky_oracle_sample(const DenseMatrix& q, const Vector& b, Rng& rng);

// Dense form of a factored precision.
DenseMatrix dense_precision(const PrecisionModel& q, Index cap = kDenseOracleCap);

struct Autocorrelation {
  std::vector<double> rho;  // rho[0] == 1; NaN beyond lag 0 when degenerate
  bool degenerate = false;  // zero-variance series
};

Autocorrelation autocorrelation(std::span<const double> series, int max_lag);

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Conjugate gradients on Q x = rhs from x0; stops at ||r|| <= tol ||rhs||.
CgResult solve_cg(const PrecisionModel& q, const Vector& rhs, const Vector& x0, double tol,
                  int max_iters);

double normal_cdf(double z);

// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Asymptotic 1% critical value 1.628 / sqrt(n).
double ks_critical_1pct(std::size_t n);

}  // namespace gsgs
