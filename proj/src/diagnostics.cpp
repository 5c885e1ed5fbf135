#include "gsgs/diagnostics.hpp"

#include "gsgs/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gsgs {

MomentSummary MomentSummary::exact(Vector mean, DenseMatrix covariance) {
  MomentSummary s;
  s.n_samples = 0;
  s.variance = covariance.diagonal();
  s.standard_error = Vector::Zero(mean.size());
  s.mean = std::move(mean);
  s.covariance = std::move(covariance);
  return s;
}

MomentAccumulator::MomentAccumulator(Index dim, bool full_covariance)
    : dim_(dim), full_(full_covariance), mean_(Vector::Zero(dim)) {
  if (dim < 1) throw DimensionError("moments: dimension must be positive");
  if (full_) {
    scatter_ = DenseMatrix::Zero(dim, dim);
  } else {
    m2_ = Vector::Zero(dim);
  }
}

void MomentAccumulator::add(const Vector& x) {
  if (x.size() != dim_) throw DimensionError("moments: sample has the wrong length");
  ++n_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  const Vector delta2 = x - mean_;
  if (full_) {
    scatter_.noalias() += delta * delta2.transpose();
  } else {
    m2_.array() += delta.array() * delta2.array();
  }
}

MomentSummary MomentAccumulator::summary() const {
  if (n_ < 2) throw DimensionError("moments: need at least two samples");
  MomentSummary s;
  s.n_samples = n_;
  s.mean = mean_;
  const double denom = static_cast<double>(n_ - 1);
  if (full_) {
    DenseMatrix cov = scatter_ / denom;
    cov = 0.5 * (cov + cov.transpose()).eval();
    s.variance = cov.diagonal();
    s.covariance = std::move(cov);
  } else {
    s.variance = m2_ / denom;
  }
  s.standard_error = (s.variance / static_cast<double>(n_)).cwiseSqrt();
  return s;
}

MomentSummary summarize(std::span<const Vector> samples, bool full_covariance) {
  if (samples.empty()) throw DimensionError("summarize: no samples");
  MomentAccumulator acc(samples.front().size(), full_covariance);
  for (const auto& x : samples) acc.add(x);
  return acc.summary();
}

std::string MomentReport::text() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " max |dmean|/SE = " << max_mean_z << " (tol " << mean_tol_se
     << "), covariance gap = " << covariance_gap << " (tol " << cov_tol_rel << ")";
  if (!failing_coordinates.empty()) {
    os << ", failing coordinates:";
    for (Index i : failing_coordinates) os << ' ' << i;
  }
  return os.str();
}

nlohmann::json MomentReport::to_json() const {
  return {{"pass", pass},
          {"mean_tol_se", mean_tol_se},
          {"cov_tol_rel", cov_tol_rel},
          {"max_mean_z", max_mean_z},
          {"covariance_gap", covariance_gap},
          {"failing_coordinates", failing_coordinates}};
}

MomentReport moment_compare(const MomentSummary& a, const MomentSummary& b, double mean_tol_se,
                            double cov_tol_rel) {
  if (a.mean.size() != b.mean.size()) throw DimensionError("moment_compare: dimension mismatch");
  MomentReport r;
  r.mean_tol_se = mean_tol_se;
  r.cov_tol_rel = cov_tol_rel;

  for (Index i = 0; i < a.mean.size(); ++i) {
    const double se = std::hypot(a.standard_error[i], b.standard_error[i]);
    const double diff = std::abs(a.mean[i] - b.mean[i]);
    const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
    r.max_mean_z = std::max(r.max_mean_z, z);
    if (!(z <= mean_tol_se)) r.failing_coordinates.push_back(i);
  }

  if (a.covariance && b.covariance) {
    const double na = a.covariance->norm();
    const double nb = b.covariance->norm();
    r.covariance_gap = (*a.covariance - *b.covariance).norm() / std::sqrt(na * nb);
  } else {
    const double na = a.variance.norm();
    const double nb = b.variance.norm();
    r.covariance_gap = (a.variance - b.variance).norm() / std::sqrt(na * nb);
  }
  r.pass = r.failing_coordinates.empty() && r.covariance_gap <= cov_tol_rel;
  return r;
}

CholeskyOracle::CholeskyOracle(const DenseMatrix& q, const Vector& b, Index cap) {
  if (q.rows() != q.cols() || q.rows() != b.size()) {
    throw DimensionError("cholesky oracle: Q must be square and match b");
  }
  if (q.rows() > cap) throw SizeError("cholesky oracle: dimension above cap");
  llt_.compute(q);
  if (llt_.info() != Eigen::Success) {
    throw IndefinitePrecisionError("cholesky oracle: Q is not positive definite");
  }
  mean_ = llt_.solve(b);
}

DenseMatrix CholeskyOracle::covariance() const {
  return llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

Vector CholeskyOracle::sample(Rng& rng) const {
  const Vector z = standard_normal_vector(rng, dim());
  return mean_ + llt_.matrixU().solve(z);
}

Vector cholesky_oracle_sample(const DenseMatrix& q, const Vector& b, Rng& rng) {
  return CholeskyOracle(q, b).sample(rng);
}

DenseMatrix dense_precision(const PrecisionModel& q, Index cap) {
  if (q.dim() > cap) throw SizeError("dense_precision: dimension above cap");
  DenseMatrix out(q.dim(), q.dim());
  Vector e = Vector::Zero(q.dim());
  for (Index j = 0; j < q.dim(); ++j) {
    e[j] = 1.0;
    out.col(j) = q.apply(e);
    e[j] = 0.0;
  }
  return out;
}

Autocorrelation autocorrelation(std::span<const double> series, int max_lag) {
  if (max_lag < 0) throw ConfigError("autocorrelation: negative lag");
  const auto n = series.size();
  if (n <= static_cast<std::size_t>(max_lag) * 4) {
    throw ConfigError("autocorrelation: series of length " + std::to_string(n) +
                      " too short for lag " + std::to_string(max_lag));
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);

  Autocorrelation out;
  out.rho.assign(static_cast<std::size_t>(max_lag) + 1, std::nan(""));
  out.rho[0] = 1.0;
  if (!(c0 > 0.0)) {
    out.degenerate = true;
    return out;
  }
  for (int lag = 1; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < n; ++t) {
      c += (series[t] - mean) * (series[t + static_cast<std::size_t>(lag)] - mean);
    }
    out.rho[static_cast<std::size_t>(lag)] = c / c0;
  }
  return out;
}

CgResult solve_cg(const PrecisionModel& q, const Vector& rhs, const Vector& x0, double tol,
                  int max_iters) {
  CgResult out;
  out.x = x0;
  Vector r = rhs - q.apply(x0);
  const double rhs_norm = rhs.norm();
  const double target = tol * (rhs_norm > 0.0 ? rhs_norm : 1.0);
  double rr = r.squaredNorm();
  if (std::sqrt(rr) <= target) {
    out.converged = true;
    out.relative_residual = std::sqrt(rr) / (rhs_norm > 0.0 ? rhs_norm : 1.0);
    return out;
  }
  Vector p = r;
  for (int k = 0; k < max_iters; ++k) {
    const Vector qp = q.apply(p);
    const double step = rr / p.dot(qp);
    out.x += step * p;
    r -= step * qp;
    const double rr_next = r.squaredNorm();
    out.iterations = k + 1;
    if (std::sqrt(rr_next) <= target) {
      rr = rr_next;
      out.converged = true;
      break;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  out.relative_residual = std::sqrt(rr) / (rhs_norm > 0.0 ? rhs_norm : 1.0);
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw DimensionError("ks: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

}  // namespace gsgs
