#pragma once

#include "gsgs/conjugate.hpp"
#include "gsgs/operators.hpp"
#include "gsgs/rng.hpp"
#include "gsgs/sampler.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace gsgs {

// Gamma(alpha, rate beta) hyperpriors; all zero is the Jeffreys limit.
struct GammaPrior {
  double alpha_n = 0.0;
  double beta_n = 0.0;
  double alpha_x = 0.0;
  double beta_x = 0.0;
};

// Shape parameters of the hyperparameter conditionals.
//   kCorrected:    gamma_n shape alpha_n + M/2,  gamma_x shape alpha_x + rank(D)/2
//   kPaperLiteral: gamma_n shape alpha_n + N/2,  gamma_x shape alpha_x + (M-1)/2
enum class ShapeConvention { kCorrected, kPaperLiteral };

struct Hyperparams {
  double gamma_n = 1.0;  // noise precision
  double gamma_x = 1.0;  // smoothness prior precision

  Theta to_theta() const { return {gamma_n, gamma_x}; }
  static Hyperparams from_theta(const Theta& theta);
};

struct Geometry {
  GridShape hr{64, 64};
  Index factor = 2;
  std::vector<PixelOffset> offsets{{0, 0}, {1, 0}, {0, 1}};
  Index blur_width = 5;

  // 64x64 scene, three 32x32 frames, 5x5 uniform blur.
  static Geometry desk();
  // 256x256 scene, five 128x128 frames (factor 2 allows four distinct
  // integer shifts, so the fifth repeats the first).
  static Geometry paper_scale();
};

// Uniform width x width blur (1 x width on single-row grids) anchored at
// (width / 2, width / 2), i.e. centred for odd widths.
std::shared_ptr<const CirculantOperator> make_uniform_blur(GridShape shape, Index width);

// Periodic Laplacian: 5-point stencil on 2-D grids, [-1 2 -1] on a single
// row. Its null space is the constant image, so its rank is N - 1.
std::shared_ptr<const CirculantOperator> make_laplacian(GridShape shape);

// Posterior of y = S H x + n with n ~ N(0, 1/gamma_n), smoothness prior
// x ~ N(0, (gamma_x D^t D)^+) and Gamma hyperpriors.
class SuperResModel {
 public:
  SuperResModel(OperatorPtr blur, OperatorPtr decimation, OperatorPtr laplacian, Vector y,
                GridShape hr_shape, GammaPrior prior = {}, Index laplacian_rank = -1);

  const OperatorPtr& blur() const { return blur_; }
  const OperatorPtr& decimation() const { return decimation_; }
  const OperatorPtr& laplacian() const { return laplacian_; }
  const OperatorPtr& forward() const { return forward_; }  // A = S H
  const Vector& y() const { return y_; }
  const Vector& adjoint_data() const { return adjoint_y_; }  // A^t y
  GridShape hr_shape() const { return hr_shape_; }
  Index n_pixels() const { return hr_shape_.size(); }
  Index n_data() const { return y_.size(); }
  Index laplacian_rank() const { return laplacian_rank_; }

  const GammaPrior& prior() const { return prior_; }
  void set_prior(const GammaPrior& prior) { prior_ = prior; }
  ShapeConvention shapes() const { return shapes_; }
  void set_shapes(ShapeConvention s) { shapes_ = s; }

  const std::optional<Vector>& truth() const { return truth_; }
  void set_truth(Vector truth);

  // J(x) = gamma_n/2 ||y - A x||^2 + gamma_x/2 ||D x||^2.
  double criterion(const Vector& x, const Hyperparams& hp) const;

 private:
  OperatorPtr blur_, decimation_, laplacian_, forward_;
  Vector y_, adjoint_y_;
  GridShape hr_shape_;
  GammaPrior prior_;
  Index laplacian_rank_;
  ShapeConvention shapes_ = ShapeConvention::kCorrected;
  std::optional<Vector> truth_;
};

// Hessian gamma_n A^t A + gamma_x D^t D with b = gamma_n A^t y; a zero
// gamma drops its factor.
PrecisionModel build_precision(const SuperResModel& model, const Hyperparams& hp);

struct GammaConditional {
  double shape = 0.0;
  double scale = 0.0;
  double mean() const { return shape * scale; }
};

struct HyperConditionals {
  GammaConditional noise;
  GammaConditional smoothness;
};

// Parameters of p(gamma_n | y, x) and p(gamma_x | x). Throws DomainError when
// a scale is degenerate (zero residual under a zero rate).
HyperConditionals hyperparam_conditionals(const SuperResModel& model, const Vector& x);

// gamma_n then gamma_x, each from its Gamma conditional.
Hyperparams sample_hyperparams(const SuperResModel& model, const Vector& x, Rng& rng);

// eps = gamma_n^{1/2} A^t e_n + gamma_x^{1/2} D^t e_x with e_n, e_x standard
// normal (drawn in that order), so Cov(eps) = Q.
Vector po_perturbation(const SuperResModel& model, const Hyperparams& hp, Rng& rng);

// Two Gaussian blobs on a ramp, amplitude roughly 0..240.
Vector phantom(GridShape shape);

// Operators (H, S, D) for a geometry.
struct SuperResOperators {
  std::shared_ptr<const CirculantOperator> blur;
  std::shared_ptr<const DecimationOperator> decimation;
  std::shared_ptr<const CirculantOperator> laplacian;
};
SuperResOperators make_operators(const Geometry& geometry);

inline constexpr double kNoiseFree = std::numeric_limits<double>::infinity();

// y = S H truth + n, n ~ N(0, 1/gamma_n_true); gamma_n_true = kNoiseFree
// skips the noise. The truth is stored on the model.
SuperResModel simulate_data(const Vector& truth, const Geometry& geometry, double gamma_n_true,
                            Rng& rng, GammaPrior prior = {});
SuperResModel simulate_data(const Vector& truth, OperatorPtr blur, OperatorPtr decimation,
                            OperatorPtr laplacian, GridShape hr_shape, double gamma_n_true,
                            Rng& rng, GammaPrior prior = {}, Index laplacian_rank = -1);

// Back-projected data: S^t y averaged over frames, unobserved pixels set to
// the data mean.
Vector default_initial_image(const SuperResModel& model);

using ModelPtr = std::shared_ptr<const SuperResModel>;

// theta = (gamma_n, gamma_x) with the PO-style perturbation.
ThetaModel make_theta_model(ModelPtr model);
// Hyperparameters pinned at hp; x-step unchanged.
ThetaModel make_pinned_theta_model(ModelPtr model, const Hyperparams& hp);

struct SuperResResult {
  Vector pm;   // posterior mean image
  Vector psd;  // posterior standard deviation image
  ChainRecord chain;
  Hyperparams estimate;
  Hyperparams estimate_std;
};

SuperResResult summarize_superres(ChainRecord chain);

SuperResResult run_superres(const ModelPtr& model, const GsgsConfig& cfg,
                            std::optional<Vector> x0 = std::nullopt);

// Reference Gibbs sampler that draws x | theta exactly each iteration.
enum class ExactSampler {
  kCholesky,         // dense factorization, small N only
  kPerturbOptimize,  // x = Q^{-1}(b + eps), eps ~ N(0, Q), solved by CG
};

struct ExactOptions {
  ExactSampler sampler = ExactSampler::kPerturbOptimize;
  double cg_tolerance = 1e-10;
  int cg_max_iters = 10000;
};

SuperResResult run_exact_gibbs(const ModelPtr& model, const GsgsConfig& cfg,
                               const ExactOptions& options = {},
                               std::optional<Vector> x0 = std::nullopt);

}  // namespace gsgs
