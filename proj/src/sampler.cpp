#include "gsgs/sampler.hpp"

#include "gsgs/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace gsgs {

ThetaModel fixed_theta_model(PrecisionModel precision) {
  auto shared = std::make_shared<const PrecisionModel>(std::move(precision));
  ThetaModel model;
  model.sample_theta = [](const Vector&, Rng&) { return Theta{}; };
  model.precision_at = [shared](const Theta&) { return *shared; };
  return model;
}

std::string to_string(Perturbation p) {
  switch (p) {
    case Perturbation::kNone:
      return "none";
    case Perturbation::kIidNormal:
      return "iid_normal";
    case Perturbation::kFactoredQ:
      return "factored_Q";
  }
  return "unknown";
}

Perturbation parse_perturbation(const std::string& name) {
  if (name == "none") return Perturbation::kNone;
  if (name == "iid_normal") return Perturbation::kIidNormal;
  if (name == "factored_Q") return Perturbation::kFactoredQ;
  throw ConfigError("unknown perturbation '" + name + "' (none, iid_normal, factored_Q)");
}

void GsgsConfig::validate() const {
  if (n_dirs < 1) throw ConfigError("n_dirs must be >= 1");
  if (perturbation_period < 1) throw ConfigError("perturbation_period must be >= 1");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (burn_in < 0 || burn_in >= max_iters) throw ConfigError("burn_in must lie in [0, max_iters)");
  if (thinning < 1) throw ConfigError("thinning must be >= 1");
}

StepInfo gsgs_step(const ThetaModel& model, ChainState& state, const GsgsConfig& cfg) {
  StepInfo info;
  state.theta = model.sample_theta(state.x, state.rng);
  const PrecisionModel q = model.precision_at(state.theta);
  if (q.dim() != state.x.size()) throw DimensionError("gsgs: precision and state disagree");

  const Vector g = q.gradient(state.x);
  Vector d1 = g;
  info.perturbed = cfg.perturbation != Perturbation::kNone &&
                   state.t % cfg.perturbation_period == 0;
  if (info.perturbed) {
    if (cfg.perturbation == Perturbation::kIidNormal) {
      d1 += standard_normal_vector(state.rng, q.dim());
    } else if (model.perturb) {
      d1 += model.perturb(state.theta, state.rng);
    } else {
      d1 += q.sample_perturbation(state.rng);
    }
  }

  ++state.t;
  if (d1.squaredNorm() == 0.0) {
    // Only reachable at x == m with eps == 0.
    info.skipped = true;
    info.potential = q.potential(state.x);
    return info;
  }

  const int n_dirs = static_cast<int>(std::min<Index>(cfg.n_dirs, q.dim()));
  const ConjugateSet set = build_conjugate_set(q, d1, n_dirs, cfg.conjugate);
  DirectionalSample draw = sample_along(set, state.x, g, state.rng);
  if (!draw.x.allFinite()) {
    throw NumericalError("gsgs: non-finite state at iteration " + std::to_string(state.t));
  }
  state.x = std::move(draw.x);
  info.directions = static_cast<int>(set.size());
  info.alpha_norm = draw.alphas.norm();
  info.potential = q.potential(state.x);
  return info;
}

// --- records ---------------------------------------------------------------

void RunningMoments::add(const Vector& x) {
  if (count_ == 0) {
    mean_ = Vector::Zero(x.size());
    m2_ = Vector::Zero(x.size());
  } else if (x.size() != mean_.size()) {
    throw DimensionError("running moments: length changed");
  }
  ++count_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_.array() += delta.array() * (x - mean_).array();
}

Vector RunningMoments::second_moment() const {
  if (count_ == 0) return {};
  return m2_ / static_cast<double>(count_) + mean_.cwiseAbs2();
}

Vector RunningMoments::variance() const {
  if (count_ < 2) return Vector::Zero(mean_.size());
  return m2_ / static_cast<double>(count_ - 1);
}

std::vector<double> ChainRecord::theta_series(std::size_t k, bool post_burn_in) const {
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto& it : iterations) {
    if (post_burn_in && it.t <= burn_in) continue;
    out.push_back(it.theta.at(k));
  }
  return out;
}

double ChainRecord::theta_mean(std::size_t k) const {
  const auto s = theta_series(k);
  if (s.empty()) return std::nan("");
  double sum = 0.0;
  for (double v : s) sum += v;
  return sum / static_cast<double>(s.size());
}

double ChainRecord::theta_std(std::size_t k) const {
  const auto s = theta_series(k);
  if (s.size() < 2) return std::nan("");
  const double m = theta_mean(k);
  double ss = 0.0;
  for (double v : s) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(s.size() - 1));
}

double ChainRecord::mean_wall_ms() const {
  if (iterations.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& it : iterations) sum += it.wall_ms;
  return sum / static_cast<double>(iterations.size());
}

bool same_samples(const ChainRecord& a, const ChainRecord& b) {
  if (a.theta_names != b.theta_names || a.burn_in != b.burn_in || a.skipped != b.skipped ||
      a.iterations.size() != b.iterations.size() || a.snapshots.size() != b.snapshots.size() ||
      a.final_x != b.final_x || a.moments.count() != b.moments.count() ||
      a.moments.mean() != b.moments.mean() || a.moments.second_moment() != b.moments.second_moment()) {
    return false;
  }
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    const auto& p = a.iterations[i];
    const auto& q = b.iterations[i];
    if (p.t != q.t || p.theta != q.theta || p.potential != q.potential ||
        p.alpha_norm != q.alpha_norm || p.directions != q.directions ||
        p.perturbed != q.perturbed || p.skipped != q.skipped) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    if (a.snapshots[i].t != b.snapshots[i].t || a.snapshots[i].x != b.snapshots[i].x) return false;
  }
  return true;
}

ChainRecord run_chain(const ThetaModel& model, const Vector& x0, const GsgsConfig& cfg) {
  return run_chain([&](ChainState& s) { return gsgs_step(model, s, cfg); }, model.theta_names, x0,
                   cfg);
}

ChainRecord run_chain(const StepFunction& step, std::vector<std::string> theta_names,
                      const Vector& x0, const GsgsConfig& cfg) {
  cfg.validate();
  ChainState state{x0, {}, 0, Rng(cfg.seed)};
  ChainRecord record;
  record.theta_names = std::move(theta_names);
  record.burn_in = cfg.burn_in;
  record.iterations.reserve(static_cast<std::size_t>(cfg.max_iters));

  using Clock = std::chrono::steady_clock;
  for (std::int64_t i = 0; i < cfg.max_iters; ++i) {
    const auto start = Clock::now();
    const StepInfo info = step(state);
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

    record.iterations.push_back({state.t, state.theta, info.potential, info.alpha_norm,
                                 info.directions, info.perturbed, info.skipped, ms});
    if (info.skipped) ++record.skipped;
    if (state.t > cfg.burn_in) {
      record.moments.add(state.x);
      if (cfg.keep_snapshots && (state.t - cfg.burn_in) % cfg.thinning == 0) {
        record.snapshots.push_back({state.t, state.x});
      }
    }
  }
  record.final_x = state.x;
  return record;
}

std::vector<ChainRecord> run_chains(const ThetaModel& model, const Vector& x0,
                                    const GsgsConfig& cfg, int k, int workers) {
  if (k < 1) throw ConfigError("run_chains: need at least one chain");
  std::vector<ChainRecord> out(static_cast<std::size_t>(k));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
  std::atomic<int> next{0};
  const Rng root(cfg.seed);
  auto worker = [&] {
    for (int i = next++; i < k; i = next++) {
      GsgsConfig c = cfg;
      c.seed = root.child(static_cast<std::uint64_t>(i)).seed();
      try {
        out[static_cast<std::size_t>(i)] = run_chain(model, x0, c);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(workers, 1, k);
  std::vector<std::jthread> pool;
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// --- Krylov rank -----------------------------------------------------------

namespace {

// Orthonormal basis of span{s, Q s, Q^2 s, ...} by Arnoldi with full
// re-orthogonalization; stops once a new vector is numerically dependent.
void append_krylov_basis(const DenseMatrix& q, const Vector& seed, std::vector<Vector>& basis) {
  const double seed_norm = seed.norm();
  if (!(seed_norm > 0.0)) return;
  std::vector<Vector> local;
  local.push_back(seed / seed_norm);
  for (Index k = 1; k <= q.rows(); ++k) {
    Vector w = q * local.back();
    const double candidate = w.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& v : local) w -= v.dot(w) * v;
    }
    const double r = w.norm();
    if (!(r > 1e-10 * candidate)) break;
    local.push_back(w / r);
  }
  for (auto& v : local) basis.push_back(std::move(v));
}

}  // namespace

KrylovRank krylov_rank_diagnostic(std::span<const PrecisionModel> precisions,
                                  std::span<const Vector> xs, std::span<const Vector> bs,
                                  Index cap) {
  if (precisions.empty() || precisions.size() != xs.size() || precisions.size() != bs.size()) {
    throw DimensionError("krylov: need matching, non-empty lists of Q, x and b");
  }
  const Index n = precisions.front().dim();
  if (n > cap) throw SizeError("krylov: dimension " + std::to_string(n) + " above cap");

  std::vector<Vector> basis;
  for (std::size_t i = 0; i < precisions.size(); ++i) {
    const auto& p = precisions[i];
    if (p.dim() != n || xs[i].size() != n || bs[i].size() != n) {
      throw DimensionError("krylov: inconsistent dimensions");
    }
    DenseMatrix q(n, n);
    Vector e = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
      e[j] = 1.0;
      q.col(j) = p.apply(e);
      e[j] = 0.0;
    }
    append_krylov_basis(q, xs[i], basis);
    if (bs[i].squaredNorm() > 0.0) {
      const Vector m = Eigen::MatrixXd(q).ldlt().solve(bs[i]);
      append_krylov_basis(q, m, basis);
    }
  }

  KrylovRank out;
  out.dim = n;
  if (basis.empty()) return out;
  Eigen::MatrixXd stacked(n, static_cast<Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) stacked.col(static_cast<Index>(j)) = basis[j];
  Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-10 * s.maxCoeff();
  out.rank = (s.array() > cutoff).count();
  return out;
}

}  // namespace gsgs
