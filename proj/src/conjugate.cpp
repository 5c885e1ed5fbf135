#include "gsgs/conjugate.hpp"

#include "gsgs/error.hpp"

#include <cmath>
#include <string>

namespace gsgs {

PrecisionModel::PrecisionModel(Index dim, std::vector<PrecisionFactor> factors, Vector b,
                               double offset)
    : dim_(dim), factors_(std::move(factors)), b_(std::move(b)), offset_(offset) {
  if (dim_ < 1) throw DimensionError("precision: dimension must be positive");
  if (b_.size() != dim_) throw DimensionError("precision: b has the wrong length");
  for (const auto& f : factors_) {
    if (!f.op) throw DimensionError("precision: null factor operator");
    if (f.op->in_dim() != dim_) throw DimensionError("precision: factor input length mismatch");
    if (f.weights.size() != f.op->out_dim()) {
      throw DimensionError("precision: weight vector length mismatch");
    }
    if (!(f.weights.array() > 0.0).all()) {
      throw DomainError("precision: factor weights must be strictly positive");
    }
  }
}

PrecisionModel PrecisionModel::from_dense(const DenseMatrix& q, Vector b) {
  if (q.rows() != q.cols()) throw DimensionError("precision: dense Q must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) {
    throw IndefinitePrecisionError("precision: dense Q is not positive definite");
  }
  DenseMatrix upper = llt.matrixU();
  std::vector<PrecisionFactor> factors;
  factors.push_back({std::make_shared<const DenseOperator>(std::move(upper)),
                     Vector::Ones(q.rows())});
  return PrecisionModel(q.rows(), std::move(factors), std::move(b));
}

Vector PrecisionModel::apply(const Vector& x) const {
  if (x.size() != dim_) throw DimensionError("precision: apply on a wrong-length vector");
  Vector out = Vector::Zero(dim_);
  for (const auto& f : factors_) {
    Vector mx = f.op->apply(x);
    mx.array() *= f.weights.array();
    out += f.op->adjoint_apply(mx);
  }
  return out;
}

Vector PrecisionModel::gradient(const Vector& x) const { return apply(x) - b_; }

double PrecisionModel::potential(const Vector& x) const {
  if (x.size() != dim_) throw DimensionError("precision: potential on a wrong-length vector");
  double quad = 0.0;
  for (const auto& f : factors_) {
    const Vector mx = f.op->apply(x);
    quad += (f.weights.array() * mx.array().square()).sum();
  }
  return 0.5 * quad - b_.dot(x) + offset_;
}

Vector PrecisionModel::sample_perturbation(Rng& rng) const {
  Vector eps = Vector::Zero(dim_);
  for (const auto& f : factors_) {
    Vector z = standard_normal_vector(rng, f.op->out_dim());
    z.array() *= f.weights.array().sqrt();
    eps += f.op->adjoint_apply(z);
  }
  return eps;
}

double ConjugateSet::max_conjugacy_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < directions.size(); ++i) {
    for (std::size_t j = 0; j < directions.size(); ++j) {
      if (i == j) continue;
      const double cross = std::abs(directions[i].dot(q_directions[j]));
      worst = std::max(worst, cross / std::sqrt(curvatures[i] * curvatures[j]));
    }
  }
  return worst;
}

ConjugateSet build_conjugate_set(const PrecisionModel& q, const Vector& d1, int n_dirs,
                                 const ConjugateOptions& options) {
  if (d1.size() != q.dim()) throw DimensionError("conjugate set: d1 has the wrong length");
  if (n_dirs < 1 || n_dirs > q.dim()) {
    throw ConfigError("conjugate set: n_dirs must lie in [1, " + std::to_string(q.dim()) + "]");
  }
  const double norm1 = d1.norm();
  if (!(norm1 > 0.0)) throw DegenerateDirectionError("conjugate set: first direction is zero");

  ConjugateSet set;
  set.directions.reserve(static_cast<std::size_t>(n_dirs));
  set.q_directions.reserve(static_cast<std::size_t>(n_dirs));
  set.curvatures.reserve(static_cast<std::size_t>(n_dirs));

  Vector d = d1 / norm1;
  Vector qd = q.apply(d);
  const double c1 = d.dot(qd);
  if (!(c1 > 0.0)) {
    throw IndefinitePrecisionError("conjugate set: non-positive curvature along d1 (" +
                                   std::to_string(c1) + ")");
  }
  set.directions.push_back(std::move(d));
  set.q_directions.push_back(std::move(qd));
  set.curvatures.push_back(c1);

  while (set.size() < n_dirs) {
    Vector v = set.q_directions.back();  // Lanczos candidate
    const double candidate_norm = v.norm();
    for (int pass = 0; pass < options.orthogonalization_passes; ++pass) {
      for (std::size_t k = 0; k < set.directions.size(); ++k) {
        v -= (set.q_directions[k].dot(v) / set.curvatures[k]) * set.directions[k];
      }
    }
    const double residual = v.norm();
    if (!(residual > options.vanish_tolerance * candidate_norm)) break;
    v /= residual;
    Vector qv = q.apply(v);
    const double c = v.dot(qv);
    if (!(c > options.curvature_drop * c1)) break;
    set.directions.push_back(std::move(v));
    set.q_directions.push_back(std::move(qv));
    set.curvatures.push_back(c);
  }
  return set;
}

namespace {

void check_curvatures(const ConjugateSet& set) {
  for (double c : set.curvatures) {
    if (!(c > 0.0)) throw IndefinitePrecisionError("sample_along: non-positive curvature");
  }
}

}  // namespace

DirectionalSample sample_along(const ConjugateSet& set, const Vector& x0, const Vector& gradient,
                               Rng& rng) {
  check_curvatures(set);
  DirectionalSample out{x0, Vector(set.size())};
  for (Index n = 0; n < set.size(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    const double c = set.curvatures[k];
    const double mean = set.directions[k].dot(gradient) / c;
    const double alpha = mean + rng.normal() / std::sqrt(c);
    out.alphas[n] = alpha;
    out.x -= alpha * set.directions[k];
  }
  return out;
}

DirectionalSample sample_along(const PrecisionModel& q, const ConjugateSet& set, const Vector& x0,
                               Rng& rng) {
  return sample_along(set, x0, q.gradient(x0), rng);
}

DirectionalSample descend_along(const PrecisionModel& q, const ConjugateSet& set,
                                const Vector& x0) {
  check_curvatures(set);
  const Vector g = q.gradient(x0);
  DirectionalSample out{x0, Vector(set.size())};
  for (Index n = 0; n < set.size(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    out.alphas[n] = set.directions[k].dot(g) / set.curvatures[k];
    out.x -= out.alphas[n] * set.directions[k];
  }
  return out;
}

}  // namespace gsgs
