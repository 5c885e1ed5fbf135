#pragma once

#include "gsgs/conjugate.hpp"
#include "gsgs/operators.hpp"
#include "gsgs/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gsgs {

// Model-specific parameter record, flattened to named scalars.
using Theta = std::vector<double>;

// The pieces of p(x, theta) the sampler needs: an exact draw of theta | x, the
// Gaussian x | theta in factored form, and optionally a model-specific
// N(0, Q_theta) perturbation. When perturb is empty the factored sampler of
// the precision model is used for Perturbation::kFactoredQ.
struct ThetaModel {
  std::vector<std::string> theta_names;
  std::function<Theta(const Vector& x, Rng& rng)> sample_theta;
  std::function<PrecisionModel(const Theta& theta)> precision_at;
  std::function<Vector(const Theta& theta, Rng& rng)> perturb;
};

// A model whose theta never changes.
ThetaModel fixed_theta_model(PrecisionModel precision);

enum class Perturbation { kNone, kIidNormal, kFactoredQ };

std::string to_string(Perturbation p);
Perturbation parse_perturbation(const std::string& name);

struct GsgsConfig {
  int n_dirs = 10;
  Perturbation perturbation = Perturbation::kFactoredQ;
  // Perturb on iterations t with (t - 1) % period == 0; eps = 0 otherwise.
  int perturbation_period = 1;
  std::int64_t max_iters = 1000;
  std::int64_t burn_in = 0;
  // Keep x every `thinning` post-burn-in iterations.
  std::int64_t thinning = 1;
  bool keep_snapshots = true;
  std::uint64_t seed = 1;
  ConjugateOptions conjugate;

  void validate() const;  // throws ConfigError
};

struct ChainState {
  Vector x;
  Theta theta;
  std::int64_t t = 0;
  Rng rng;
};

struct StepInfo {
  int directions = 0;
  bool perturbed = false;
  bool skipped = false;  // d1 was exactly zero; x left unchanged
  double potential = 0.0;  // J_theta at the new x
  double alpha_norm = 0.0;
};

// One iteration of the gradient scan Gibbs sampler: theta | x, gradient,
// perturbation, conjugate directions seeded by the perturbed gradient, exact
// draw along them. Updates the state in place.
StepInfo gsgs_step(const ThetaModel& model, ChainState& state, const GsgsConfig& cfg);

// Welford accumulator for per-coordinate mean and second moment.
class RunningMoments {
 public:
  void add(const Vector& x);

  std::int64_t count() const { return count_; }
  const Vector& mean() const { return mean_; }
  Vector second_moment() const;  // E[x^2] per coordinate
  Vector variance() const;       // unbiased

 private:
  std::int64_t count_ = 0;
  Vector mean_;
  Vector m2_;
};

struct IterationRecord {
  std::int64_t t = 0;
  Theta theta;
  double potential = 0.0;
  double alpha_norm = 0.0;
  int directions = 0;
  bool perturbed = false;
  bool skipped = false;
  double wall_ms = 0.0;
};

struct Snapshot {
  std::int64_t t = 0;
  Vector x;
};

struct ChainRecord {
  std::vector<std::string> theta_names;
  std::int64_t burn_in = 0;
  std::vector<IterationRecord> iterations;
  std::vector<Snapshot> snapshots;  // post burn-in, thinned
  RunningMoments moments;           // every post burn-in iteration
  std::int64_t skipped = 0;
  Vector final_x;

  // Post burn-in mean / standard deviation of theta component k.
  double theta_mean(std::size_t k) const;
  double theta_std(std::size_t k) const;
  std::vector<double> theta_series(std::size_t k, bool post_burn_in = true) const;
  double mean_wall_ms() const;
};

// Everything except wall-clock timings.
bool same_samples(const ChainRecord& a, const ChainRecord& b);

ChainRecord run_chain(const ThetaModel& model, const Vector& x0, const GsgsConfig& cfg);

// Drives any Gibbs-style transition with the same bookkeeping as run_chain:
// `step` must advance state.t by one.
using StepFunction = std::function<StepInfo(ChainState& state)>;
ChainRecord run_chain(const StepFunction& step, std::vector<std::string> theta_names,
                      const Vector& x0, const GsgsConfig& cfg);

// Runs k chains with child seeds of cfg.seed on up to `workers` threads.
std::vector<ChainRecord> run_chains(const ThetaModel& model, const Vector& x0,
                                    const GsgsConfig& cfg, int k, int workers);

struct KrylovRank {
  Index rank = 0;
  Index dim = 0;
  bool certified() const { return rank == dim; }
};

inline constexpr Index kKrylovDenseCap = 512;

// Numerical rank of the union over supplied (Q, x, b) of the Krylov spaces
// span{Q^k x} and span{Q^k m}, m = Q^{-1} b, k = 0..N.
KrylovRank krylov_rank_diagnostic(std::span<const PrecisionModel> precisions,
                                  std::span<const Vector> xs, std::span<const Vector> bs,
                                  Index cap = kKrylovDenseCap);

}  // namespace gsgs
