#pragma once

#include "gsgs/operators.hpp"
#include "gsgs/rng.hpp"

#include <vector>

namespace gsgs {

// One term M^t diag(weights) M of a factored precision.
struct PrecisionFactor {
  OperatorPtr op;
  Vector weights;  // strictly positive, length op->out_dim()
};

// Gaussian potential J(x) = 1/2 x^t Q x - b^t x + offset with
// Q = sum_k M_k^t diag(w_k) M_k. The mean m = Q^{-1} b is never formed.
class PrecisionModel {
 public:
  PrecisionModel(Index dim, std::vector<PrecisionFactor> factors, Vector b, double offset = 0.0);

  // Factors a dense SPD matrix as Q = L L^t and stores the single factor
  // (L^t, 1). Throws IndefinitePrecisionError if the factorization fails.
  static PrecisionModel from_dense(const DenseMatrix& q, Vector b);

  Index dim() const { return dim_; }
  const std::vector<PrecisionFactor>& factors() const { return factors_; }
  const Vector& b() const { return b_; }
  double offset() const { return offset_; }

  Vector apply(const Vector& x) const;
  Vector gradient(const Vector& x) const;  // Q x - b
  double potential(const Vector& x) const;

  // eps ~ N(0, Q) as sum_k M_k^t (sqrt(w_k) .* z_k), z_k standard normal,
  // drawn factor by factor in order.
  Vector sample_perturbation(Rng& rng) const;

 private:
  Index dim_;
  std::vector<PrecisionFactor> factors_;
  Vector b_;
  double offset_;
};

// How candidates for d_2, d_3, ... are produced before Q-orthogonalization.
enum class DirectionRule {
  kLanczos,  // candidate = Q d_n
};

struct ConjugateOptions {
  DirectionRule rule = DirectionRule::kLanczos;
  // Drop a direction (and stop) when its curvature falls below this multiple of c_1.
  double curvature_drop = 1e-12;
  // Stop when Q-orthogonalization removes all but this fraction of a candidate.
  double vanish_tolerance = 1e-10;
  // Classical Gram-Schmidt passes against the kept directions.
  int orthogonalization_passes = 2;
};

// Unit-norm directions, mutually conjugate with respect to Q, with cached
// products Q d_n and curvatures c_n = d_n^t Q d_n > 0.
struct ConjugateSet {
  std::vector<Vector> directions;
  std::vector<Vector> q_directions;
  std::vector<double> curvatures;

  Index size() const { return static_cast<Index>(directions.size()); }
  // max_{i != j} |d_i^t Q d_j| / sqrt(c_i c_j); zero for a single direction.
  double max_conjugacy_error() const;
};

ConjugateSet build_conjugate_set(const PrecisionModel& q, const Vector& d1, int n_dirs,
                                 const ConjugateOptions& options = {});

struct DirectionalSample {
  Vector x;
  Vector alphas;
};

// Exact draw of the coefficients along the set: alpha_n ~ N(d_n^t g / c_n, 1/c_n)
// with g = Q x0 - b, then x = x0 - sum alpha_n d_n.
DirectionalSample sample_along(const PrecisionModel& q, const ConjugateSet& set, const Vector& x0,
                               Rng& rng);
// Same draw with the gradient at x0 already known.
DirectionalSample sample_along(const ConjugateSet& set, const Vector& x0, const Vector& gradient,
                               Rng& rng);

// Noise-free variant: every alpha at its conditional mean, i.e. an exact line
// search over the span of the set.
DirectionalSample descend_along(const PrecisionModel& q, const ConjugateSet& set,
                                const Vector& x0);

}  // namespace gsgs
