#include "gsgs/superres.hpp"

#include "gsgs/diagnostics.hpp"
#include "gsgs/error.hpp"

#include <cmath>
#include <string>

namespace gsgs {

Hyperparams Hyperparams::from_theta(const Theta& theta) {
  if (theta.size() != 2) throw DimensionError("hyperparams: theta must hold (gamma_n, gamma_x)");
  return {theta[0], theta[1]};
}

Geometry Geometry::desk() { return {}; }

Geometry Geometry::paper_scale() {
  Geometry g;
  g.hr = {256, 256};
  g.factor = 2;
  g.offsets = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0, 0}};
  g.blur_width = 5;
  return g;
}

std::shared_ptr<const CirculantOperator> make_uniform_blur(GridShape shape, Index width) {
  if (width < 1) throw ConfigError("blur width must be >= 1");
  const Index rows = shape.rows == 1 ? 1 : width;
  const Eigen::MatrixXd stencil =
      Eigen::MatrixXd::Constant(rows, width, 1.0 / static_cast<double>(rows * width));
  return make_circulant(shape, stencil, {rows / 2, width / 2});
}

std::shared_ptr<const CirculantOperator> make_laplacian(GridShape shape) {
  if (shape.rows == 1) {
    Eigen::MatrixXd stencil(1, 3);
    stencil << -1, 2, -1;
    return make_circulant(shape, stencil, {0, 1});
  }
  Eigen::MatrixXd stencil(3, 3);
  stencil << 0, -1, 0, -1, 4, -1, 0, -1, 0;
  return make_circulant(shape, stencil, {1, 1});
}

// --- model -----------------------------------------------------------------

SuperResModel::SuperResModel(OperatorPtr blur, OperatorPtr decimation, OperatorPtr laplacian,
                             Vector y, GridShape hr_shape, GammaPrior prior, Index laplacian_rank)
    : blur_(std::move(blur)),
      decimation_(std::move(decimation)),
      laplacian_(std::move(laplacian)),
      y_(std::move(y)),
      hr_shape_(hr_shape),
      prior_(prior),
      laplacian_rank_(laplacian_rank < 0 ? hr_shape.size() - 1 : laplacian_rank) {
  if (!blur_ || !decimation_ || !laplacian_) throw ConfigError("superres: missing operator");
  const Index n = hr_shape_.size();
  if (blur_->in_dim() != n || blur_->out_dim() != n) throw DimensionError("superres: H not N x N");
  if (laplacian_->in_dim() != n || laplacian_->out_dim() != n) {
    throw DimensionError("superres: D not N x N");
  }
  if (decimation_->in_dim() != n) throw DimensionError("superres: S input is not N");
  if (decimation_->out_dim() != y_.size()) throw DimensionError("superres: y length is not M");
  if (prior_.alpha_n < 0 || prior_.beta_n < 0 || prior_.alpha_x < 0 || prior_.beta_x < 0) {
    throw DomainError("superres: Gamma prior parameters must be >= 0");
  }
  if (laplacian_rank_ < 1 || laplacian_rank_ > n) throw ConfigError("superres: bad rank(D)");
  forward_ = compose({decimation_, blur_});
  adjoint_y_ = forward_->adjoint_apply(y_);
}

void SuperResModel::set_truth(Vector truth) {
  if (truth.size() != n_pixels()) throw DimensionError("superres: truth has the wrong length");
  truth_ = std::move(truth);
}

double SuperResModel::criterion(const Vector& x, const Hyperparams& hp) const {
  const double data = (y_ - forward_->apply(x)).squaredNorm();
  const double smooth = laplacian_->apply(x).squaredNorm();
  return 0.5 * hp.gamma_n * data + 0.5 * hp.gamma_x * smooth;
}

PrecisionModel build_precision(const SuperResModel& model, const Hyperparams& hp) {
  if (hp.gamma_n < 0.0 || hp.gamma_x < 0.0 || !std::isfinite(hp.gamma_n) ||
      !std::isfinite(hp.gamma_x)) {
    throw DomainError("build_precision: hyperparameters must be finite and >= 0");
  }
  std::vector<PrecisionFactor> factors;
  if (hp.gamma_n > 0.0) {
    factors.push_back({model.forward(), Vector::Constant(model.n_data(), hp.gamma_n)});
  }
  if (hp.gamma_x > 0.0) {
    factors.push_back({model.laplacian(), Vector::Constant(model.n_pixels(), hp.gamma_x)});
  }
  return PrecisionModel(model.n_pixels(), std::move(factors), hp.gamma_n * model.adjoint_data(),
                        0.5 * hp.gamma_n * model.y().squaredNorm());
}

HyperConditionals hyperparam_conditionals(const SuperResModel& model, const Vector& x) {
  const double residual = (model.y() - model.forward()->apply(x)).squaredNorm();
  const double roughness = model.laplacian()->apply(x).squaredNorm();
  if (!std::isfinite(residual) || !std::isfinite(roughness)) {
    throw NumericalError("hyperparams: non-finite residual norms");
  }
  const auto& p = model.prior();
  const double m = static_cast<double>(model.n_data());
  const double n = static_cast<double>(model.n_pixels());

  HyperConditionals c;
  if (model.shapes() == ShapeConvention::kCorrected) {
    c.noise.shape = p.alpha_n + 0.5 * m;
    c.smoothness.shape = p.alpha_x + 0.5 * static_cast<double>(model.laplacian_rank());
  } else {
    c.noise.shape = p.alpha_n + 0.5 * n;
    c.smoothness.shape = p.alpha_x + 0.5 * (m - 1.0);
  }
  const double rate_n = p.beta_n + 0.5 * residual;
  const double rate_x = p.beta_x + 0.5 * roughness;
  if (!(rate_n > 0.0)) throw DomainError("hyperparams: zero data residual gives a degenerate scale");
  if (!(rate_x > 0.0)) throw DomainError("hyperparams: ||Dx|| = 0 gives a degenerate scale");
  c.noise.scale = 1.0 / rate_n;
  c.smoothness.scale = 1.0 / rate_x;
  return c;
}

Hyperparams sample_hyperparams(const SuperResModel& model, const Vector& x, Rng& rng) {
  const HyperConditionals c = hyperparam_conditionals(model, x);
  Hyperparams hp;
  hp.gamma_n = gamma_draw(rng, c.noise.shape, c.noise.scale);
  hp.gamma_x = gamma_draw(rng, c.smoothness.shape, c.smoothness.scale);
  return hp;
}

Vector po_perturbation(const SuperResModel& model, const Hyperparams& hp, Rng& rng) {
  if (hp.gamma_n < 0.0 || hp.gamma_x < 0.0) throw DomainError("po_perturbation: negative gamma");
  Vector eps = Vector::Zero(model.n_pixels());
  if (hp.gamma_n > 0.0) {
    eps += std::sqrt(hp.gamma_n) *
           model.forward()->adjoint_apply(standard_normal_vector(rng, model.n_data()));
  }
  if (hp.gamma_x > 0.0) {
    eps += std::sqrt(hp.gamma_x) *
           model.laplacian()->adjoint_apply(standard_normal_vector(rng, model.n_pixels()));
  }
  return eps;
}

Vector phantom(GridShape shape) {
  Vector x(shape.size());
  for (Index i = 0; i < shape.rows; ++i) {
    for (Index j = 0; j < shape.cols; ++j) {
      const double r = static_cast<double>(i) / static_cast<double>(shape.rows);
      const double c = static_cast<double>(j) / static_cast<double>(shape.cols);
      const double blob1 = 120.0 * std::exp(-((r - 0.30) * (r - 0.30) + (c - 0.35) * (c - 0.35)) / 0.01);
      const double blob2 = 80.0 * std::exp(-((r - 0.70) * (r - 0.70) + (c - 0.60) * (c - 0.60)) / 0.03);
      x[i * shape.cols + j] = blob1 + blob2 + 40.0 * c;
    }
  }
  return x;
}

SuperResOperators make_operators(const Geometry& geometry) {
  return {make_uniform_blur(geometry.hr, geometry.blur_width),
          make_decimation(geometry.hr, geometry.factor, geometry.offsets),
          make_laplacian(geometry.hr)};
}

SuperResModel simulate_data(const Vector& truth, OperatorPtr blur, OperatorPtr decimation,
                            OperatorPtr laplacian, GridShape hr_shape, double gamma_n_true,
                            Rng& rng, GammaPrior prior, Index laplacian_rank) {
  if (!(gamma_n_true > 0.0)) throw DomainError("simulate: gamma_n_true must be positive");
  if (truth.size() != hr_shape.size()) throw DimensionError("simulate: truth has the wrong length");
  Vector y = decimation->apply(blur->apply(truth));
  if (std::isfinite(gamma_n_true)) {
    y += standard_normal_vector(rng, y.size()) / std::sqrt(gamma_n_true);
  }
  SuperResModel model(std::move(blur), std::move(decimation), std::move(laplacian), std::move(y),
                      hr_shape, prior, laplacian_rank);
  model.set_truth(truth);
  return model;
}

SuperResModel simulate_data(const Vector& truth, const Geometry& geometry, double gamma_n_true,
                            Rng& rng, GammaPrior prior) {
  auto ops = make_operators(geometry);
  return simulate_data(truth, ops.blur, ops.decimation, ops.laplacian, geometry.hr, gamma_n_true,
                       rng, prior);
}

Vector default_initial_image(const SuperResModel& model) {
  const auto& s = *model.decimation();
  const Vector counts = s.adjoint_apply(Vector::Ones(model.n_data()));
  const Vector sums = s.adjoint_apply(model.y());
  const double fill = model.y().mean();
  Vector x(model.n_pixels());
  for (Index i = 0; i < x.size(); ++i) x[i] = counts[i] > 0.0 ? sums[i] / counts[i] : fill;
  return x;
}

ThetaModel make_theta_model(ModelPtr model) {
  ThetaModel tm;
  tm.theta_names = {"gamma_n", "gamma_x"};
  tm.sample_theta = [model](const Vector& x, Rng& rng) {
    return sample_hyperparams(*model, x, rng).to_theta();
  };
  tm.precision_at = [model](const Theta& theta) {
    return build_precision(*model, Hyperparams::from_theta(theta));
  };
  tm.perturb = [model](const Theta& theta, Rng& rng) {
    return po_perturbation(*model, Hyperparams::from_theta(theta), rng);
  };
  return tm;
}

ThetaModel make_pinned_theta_model(ModelPtr model, const Hyperparams& hp) {
  ThetaModel tm = make_theta_model(model);
  tm.sample_theta = [hp](const Vector&, Rng&) { return hp.to_theta(); };
  return tm;
}

SuperResResult summarize_superres(ChainRecord chain) {
  SuperResResult out;
  out.pm = chain.moments.mean();
  out.psd = chain.moments.variance().cwiseSqrt();
  if (chain.theta_names.size() == 2) {
    out.estimate = {chain.theta_mean(0), chain.theta_mean(1)};
    out.estimate_std = {chain.theta_std(0), chain.theta_std(1)};
  }
  out.chain = std::move(chain);
  return out;
}

SuperResResult run_superres(const ModelPtr& model, const GsgsConfig& cfg, std::optional<Vector> x0) {
  const Vector start = x0 ? *x0 : default_initial_image(*model);
  return summarize_superres(run_chain(make_theta_model(model), start, cfg));
}

SuperResResult run_exact_gibbs(const ModelPtr& model, const GsgsConfig& cfg,
                               const ExactOptions& options, std::optional<Vector> x0) {
  const Vector start = x0 ? *x0 : default_initial_image(*model);
  auto step = [&](ChainState& state) {
    const Hyperparams hp = sample_hyperparams(*model, state.x, state.rng);
    state.theta = hp.to_theta();
    const PrecisionModel q = build_precision(*model, hp);
    if (options.sampler == ExactSampler::kCholesky) {
      const CholeskyOracle oracle(dense_precision(q), q.b());
      state.x = oracle.sample(state.rng);
    } else {
      const Vector rhs = q.b() + po_perturbation(*model, hp, state.rng);
      CgResult cg = solve_cg(q, rhs, state.x, options.cg_tolerance, options.cg_max_iters);
      if (!cg.converged) {
        throw NumericalError("exact gibbs: CG did not converge at iteration " +
                             std::to_string(state.t + 1) + " (relative residual " +
                             std::to_string(cg.relative_residual) + ")");
      }
      state.x = std::move(cg.x);
    }
    ++state.t;
    StepInfo info;
    info.directions = static_cast<int>(model->n_pixels());
    info.perturbed = true;
    info.potential = q.potential(state.x);
    return info;
  };
  return summarize_superres(run_chain(step, {"gamma_n", "gamma_x"}, start, cfg));
}

}  // namespace gsgs
