#include "gsgs/cli.hpp"

#include "gsgs/diagnostics.hpp"
#include "gsgs/error.hpp"
#include "gsgs/image_io.hpp"
#include "gsgs/run_config.hpp"
#include "gsgs/superres.hpp"
#include "gsgs/validation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <thread>

namespace gsgs {

namespace fs = std::filesystem;

namespace {

// Raised for bad command lines after parsing; maps to kExitUsage.
struct UsageError : Error {
  using Error::Error;
};

// Flag values that override the config file when present.
struct Overrides {
  std::optional<std::string> config;
  std::optional<Index> rows, cols, factor, blur_width;
  std::optional<double> gamma_n_true, alpha_n, beta_n, alpha_x, beta_x;
  bool paper_literal_shapes = false;
  std::optional<int> n_dirs, perturbation_period, chains;
  std::optional<std::string> perturbation, output_dir, data_dir;
  std::optional<std::int64_t> max_iters, burn_in, thinning;
  bool no_snapshots = false;
  std::optional<std::uint64_t> seed;

  RunConfig resolve() const {
    RunConfig c = config ? RunConfig::load(*config) : RunConfig{};
    auto set = [](auto& field, const auto& value) {
      if (value) field = *value;
    };
    set(c.rows, rows);
    set(c.cols, cols);
    set(c.factor, factor);
    set(c.blur_width, blur_width);
    set(c.gamma_n_true, gamma_n_true);
    set(c.alpha_n, alpha_n);
    set(c.beta_n, beta_n);
    set(c.alpha_x, alpha_x);
    set(c.beta_x, beta_x);
    if (paper_literal_shapes) c.paper_literal_shapes = true;
    set(c.n_dirs, n_dirs);
    set(c.perturbation_period, perturbation_period);
    set(c.chains, chains);
    set(c.perturbation, perturbation);
    set(c.output_dir, output_dir);
    set(c.data_dir, data_dir);
    set(c.max_iters, max_iters);
    set(c.burn_in, burn_in);
    set(c.thinning, thinning);
    if (no_snapshots) c.keep_snapshots = false;
    set(c.seed, seed);
    c.validate();
    return c;
  }
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file (flat keys)")->check(CLI::ExistingFile);
  cmd->add_option("--output-dir", o.output_dir, "Output directory");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--rows", o.rows, "High-resolution rows");
  cmd->add_option("--cols", o.cols, "High-resolution columns");
  cmd->add_option("--factor", o.factor, "Down-sampling factor");
  cmd->add_option("--blur-width", o.blur_width, "Uniform blur width");
  cmd->add_option("--gamma-n", o.gamma_n_true, "True noise precision of simulated data");
}

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--data-dir", o.data_dir, "Directory written by `simulate`");
  cmd->add_option("--n-dirs", o.n_dirs, "Number of conjugate directions N_D");
  cmd->add_option("--perturbation", o.perturbation, "none | iid_normal | factored_Q");
  cmd->add_option("--perturbation-period", o.perturbation_period, "Perturb every k-th iteration");
  cmd->add_option("--max-iters", o.max_iters, "Gibbs iterations");
  cmd->add_option("--burn-in", o.burn_in, "Discarded iterations");
  cmd->add_option("--thinning", o.thinning, "Snapshot spacing after burn-in");
  cmd->add_flag("--no-snapshots", o.no_snapshots, "Do not write x snapshots");
  cmd->add_option("--alpha-n", o.alpha_n, "Gamma prior shape of gamma_n");
  cmd->add_option("--beta-n", o.beta_n, "Gamma prior rate of gamma_n");
  cmd->add_option("--alpha-x", o.alpha_x, "Gamma prior shape of gamma_x");
  cmd->add_option("--beta-x", o.beta_x, "Gamma prior rate of gamma_x");
  cmd->add_flag("--paper-literal-shapes", o.paper_literal_shapes,
                "Use the shapes N/2 (gamma_n) and (M-1)/2 (gamma_x)");
  cmd->add_option("--chains", o.chains, "Independent chains with child seeds");
}

void prepare_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw UsageError("cannot create output directory " + cfg.output_dir + ": " + ec.message());
  write_json(fs::path(cfg.output_dir) / "resolved_config.json", cfg.to_json());
}

GridShape data_shape(const DecimationOperator& s) {
  return {s.num_frames() * s.lr_shape().rows, s.lr_shape().cols};
}

// Data noise has its own child stream, disjoint from the per-chain streams
// 0..k-1; a single chain uses the seed itself.
constexpr std::uint64_t kDataStream = 0xDA7A;
Rng data_rng(const RunConfig& cfg) { return Rng(cfg.seed).child(kDataStream); }

nlohmann::json geometry_json(const RunConfig& cfg, const DecimationOperator& s) {
  const GridShape y = data_shape(s);
  return {{"hr_shape", {cfg.rows, cfg.cols}},
          {"lr_shape", {s.lr_shape().rows, s.lr_shape().cols}},
          {"frames", s.num_frames()},
          {"y_shape", {y.rows, y.cols}},
          {"n_pixels", cfg.rows * cfg.cols},
          {"n_data", s.out_dim()}};
}

int cmd_simulate(const Overrides& o, std::ostream& out) {
  const RunConfig cfg = o.resolve();
  prepare_output_dir(cfg);
  const Geometry g = cfg.geometry();
  const SuperResOperators ops = make_operators(g);
  Rng rng = data_rng(cfg);
  const SuperResModel model = simulate_data(phantom(g.hr), ops.blur, ops.decimation,
                                            ops.laplacian, g.hr, cfg.gamma_n_true, rng, cfg.prior());
  const fs::path dir(cfg.output_dir);
  const nlohmann::json geom = geometry_json(cfg, *ops.decimation);
  const nlohmann::json meta = output_metadata(cfg, {{"geometry", geom}});

  write_raw_image(dir / "y.f64", data_shape(*ops.decimation), model.y());
  write_sidecar(dir / "y.f64", meta);
  write_raw_image(dir / "truth.f64", g.hr, *model.truth());
  write_sidecar(dir / "truth.f64", meta);
  write_json(dir / "geometry.json", meta);

  out << "wrote " << (dir / "y.f64").string() << " (" << model.n_data() << " values) and "
      << (dir / "truth.f64").string() << " (" << model.n_pixels() << " pixels)\n";
  return kExitOk;
}

std::shared_ptr<SuperResModel> load_model(const RunConfig& cfg) {
  const Geometry g = cfg.geometry();
  const SuperResOperators ops = make_operators(g);
  std::shared_ptr<SuperResModel> model;
  if (cfg.data_dir.empty()) {
    Rng rng = data_rng(cfg);
    model = std::make_shared<SuperResModel>(simulate_data(phantom(g.hr), ops.blur, ops.decimation,
                                                          ops.laplacian, g.hr, cfg.gamma_n_true,
                                                          rng, cfg.prior()));
  } else {
    const fs::path dir(cfg.data_dir);
    if (!fs::exists(dir / "y.f64")) throw UsageError("no y.f64 in data directory " + cfg.data_dir);
    const RawImage y = read_raw_image(dir / "y.f64");
    if (y.pixels.size() != ops.decimation->out_dim()) {
      throw UsageError("y.f64 holds " + std::to_string(y.pixels.size()) +
                       " values but the geometry expects " +
                       std::to_string(ops.decimation->out_dim()));
    }
    model = std::make_shared<SuperResModel>(ops.blur, ops.decimation, ops.laplacian, y.pixels,
                                            g.hr, cfg.prior());
    if (fs::exists(dir / "truth.f64")) {
      const RawImage truth = read_raw_image(dir / "truth.f64");
      if (truth.shape == g.hr) model->set_truth(truth.pixels);
    }
  }
  model->set_shapes(cfg.shapes());
  return model;
}

nlohmann::json estimate_json(const SuperResResult& r) {
  return {{"gamma_n", r.estimate.gamma_n},
          {"gamma_n_std", r.estimate_std.gamma_n},
          {"gamma_x", r.estimate.gamma_x},
          {"gamma_x_std", r.estimate_std.gamma_x},
          {"loop_s", r.chain.mean_wall_ms() / 1000.0},
          {"iterations", r.chain.iterations.size()},
          {"skipped", r.chain.skipped}};
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg, const SuperResModel& model,
                       const SuperResResult& r, const nlohmann::json& extra) {
  fs::create_directories(dir);
  const nlohmann::json meta = output_metadata(cfg, extra);
  const GridShape hr = model.hr_shape();
  write_raw_image(dir / "pm.f64", hr, r.pm);
  write_sidecar(dir / "pm.f64", meta);
  write_pgm16(dir / "pm.pgm", hr, r.pm);
  write_sidecar(dir / "pm.pgm", meta);
  write_raw_image(dir / "psd.f64", hr, r.psd);
  write_sidecar(dir / "psd.f64", meta);
  write_pgm16(dir / "psd.pgm", hr, r.psd);
  write_sidecar(dir / "psd.pgm", meta);
  if (!r.chain.iterations.empty()) {
    write_chain_csv(dir / "chain.csv", r.chain);
    write_sidecar(dir / "chain.csv", meta);
  }
  if (cfg.keep_snapshots && !r.chain.snapshots.empty()) {
    write_snapshots(dir / "snapshots", r.chain, hr, meta);
  }
  nlohmann::json summary = meta;
  summary["estimate"] = estimate_json(r);
  write_json(dir / "summary.json", summary);
}

void print_table(std::ostream& out, const RunConfig& cfg, const SuperResResult& r, double total_s) {
  auto row = [&](const char* name, double v) {
    out << std::left << std::setw(16) << name << std::scientific << std::setprecision(2) << v
        << '\n';
  };
  out << std::left << std::setw(16) << "" << "N_D = " << cfg.n_dirs << '\n';
  row("gamma_n hat", r.estimate.gamma_n);
  row("sigma gamma_n", r.estimate_std.gamma_n);
  row("gamma_x hat", r.estimate.gamma_x);
  row("sigma gamma_x", r.estimate_std.gamma_x);
  row("loop [s.]", r.chain.mean_wall_ms() / 1000.0);
  out << std::left << std::setw(16) << "total [s.]" << std::fixed << std::setprecision(1)
      << total_s << '\n';
  out.unsetf(std::ios::floatfield);
}

int worker_count(int chains) {
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("GSGS_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) workers = cap;
    } catch (const std::exception&) {
      throw UsageError(std::string("GSGS_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return std::min(workers, chains);
}

int cmd_run(const Overrides& o, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = o.resolve();
  if (!cfg.data_dir.empty() && !fs::is_directory(cfg.data_dir)) {
    throw UsageError("data directory " + cfg.data_dir + " does not exist");
  }
  prepare_output_dir(cfg);
  const std::shared_ptr<const SuperResModel> model = load_model(cfg);
  const GsgsConfig gcfg = cfg.gsgs_config();
  if (gcfg.perturbation == Perturbation::kNone) {
    err << "warning: perturbation = none; convergence to the target distribution is not "
           "guaranteed\n";
  }
  const fs::path dir(cfg.output_dir);
  const auto start = std::chrono::steady_clock::now();
  const Vector x0 = default_initial_image(*model);

  if (cfg.chains == 1) {
    const SuperResResult r = run_superres(model, gcfg, x0);
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_run_outputs(dir, cfg, *model, r, {{"chain", 0}});
    print_table(out, cfg, r, total);
    return kExitOk;
  }

  const int workers = worker_count(cfg.chains);
  std::vector<ChainRecord> records =
      run_chains(make_theta_model(model), x0, gcfg, cfg.chains, workers);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const Rng root(cfg.seed);
  nlohmann::json per_chain = nlohmann::json::array();
  Vector pooled_mean = Vector::Zero(model->n_pixels());
  Vector pooled_sq = Vector::Zero(model->n_pixels());
  double n_total = 0.0;
  double gn = 0.0, gx = 0.0;
  std::vector<SuperResResult> results;
  for (int i = 0; i < cfg.chains; ++i) {
    RunConfig chain_cfg = cfg;
    chain_cfg.seed = root.child(static_cast<std::uint64_t>(i)).seed();
    SuperResResult r = summarize_superres(std::move(records[static_cast<std::size_t>(i)]));
    write_run_outputs(dir / ("chain_" + std::to_string(i)), chain_cfg, *model, r,
                      {{"chain", i}, {"parent_seed", cfg.seed}});
    const double n = static_cast<double>(r.chain.moments.count());
    pooled_mean += n * r.pm;
    pooled_sq += n * r.chain.moments.second_moment();
    n_total += n;
    gn += r.estimate.gamma_n / cfg.chains;
    gx += r.estimate.gamma_x / cfg.chains;
    nlohmann::json e = estimate_json(r);
    e["seed"] = chain_cfg.seed;
    per_chain.push_back(e);
    results.push_back(std::move(r));
  }
  pooled_mean /= n_total;
  const Vector pooled_var =
      ((pooled_sq / n_total - pooled_mean.cwiseAbs2()) * (n_total / std::max(1.0, n_total - 1.0)))
          .cwiseMax(0.0);
  const Vector pooled_psd = pooled_var.cwiseSqrt();

  const nlohmann::json meta = output_metadata(cfg, {{"chains", cfg.chains}, {"workers", workers}});
  write_raw_image(dir / "pm.f64", model->hr_shape(), pooled_mean);
  write_sidecar(dir / "pm.f64", meta);
  write_pgm16(dir / "pm.pgm", model->hr_shape(), pooled_mean);
  write_sidecar(dir / "pm.pgm", meta);
  write_raw_image(dir / "psd.f64", model->hr_shape(), pooled_psd);
  write_sidecar(dir / "psd.f64", meta);
  write_pgm16(dir / "psd.pgm", model->hr_shape(), pooled_psd);
  write_sidecar(dir / "psd.pgm", meta);
  nlohmann::json summary = meta;
  summary["per_chain"] = per_chain;
  summary["merged"] = {{"gamma_n", gn}, {"gamma_x", gx}};
  write_json(dir / "summary.json", summary);

  for (int i = 0; i < cfg.chains; ++i) {
    out << "chain " << i << ":\n";
    print_table(out, cfg, results[static_cast<std::size_t>(i)], total);
  }
  out << "merged: gamma_n hat " << std::scientific << std::setprecision(3) << gn
      << ", gamma_x hat " << gx << '\n';
  out.unsetf(std::ios::floatfield);
  return kExitOk;
}

struct DiagnoseOptions {
  std::string run_dir;
  std::string reference;
  std::string output;
  int max_lag = 50;
};

nlohmann::json series_stats(const std::vector<double>& s, int max_lag) {
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const double sd = s.size() > 1 ? std::sqrt(ss / static_cast<double>(s.size() - 1)) : 0.0;
  const Autocorrelation ac = autocorrelation(s, max_lag);
  nlohmann::json rho = nlohmann::json::array();
  for (double r : ac.rho) rho.push_back(std::isfinite(r) ? nlohmann::json(r) : nlohmann::json());
  return {{"mean", mean}, {"std", sd}, {"degenerate", ac.degenerate}, {"autocorrelation", rho}};
}

int cmd_diagnose(const DiagnoseOptions& o, std::ostream& out) {
  const fs::path dir(o.run_dir);
  if (!fs::exists(dir / "chain.csv")) throw UsageError("no chain.csv in " + o.run_dir);
  std::int64_t burn_in = 0;
  if (fs::exists(dir / "resolved_config.json")) {
    burn_in = RunConfig::from_json(read_json(dir / "resolved_config.json")).burn_in;
  }
  if (o.max_lag < 0) throw UsageError("--max-lag must be >= 0");
  const ChainTable table = read_chain_csv(dir / "chain.csv");
  const std::vector<double> t = table.column("t");

  nlohmann::json report{{"run_dir", o.run_dir}, {"burn_in", burn_in}, {"max_lag", o.max_lag}};
  for (const auto& name : table.columns) {
    if (name == "t" || name == "wall_ms" || name == "alpha_norm" || name == "directions") continue;
    const std::vector<double> all = table.column(name);
    std::vector<double> post;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (t[i] > static_cast<double>(burn_in)) post.push_back(all[i]);
    }
    if (post.size() <= static_cast<std::size_t>(o.max_lag) * 4) {
      throw UsageError("only " + std::to_string(post.size()) +
                       " post burn-in iterations; reduce --max-lag");
    }
    const nlohmann::json s = series_stats(post, o.max_lag);
    report["series"][name] = s;
    out << std::left << std::setw(10) << name << " mean " << std::setprecision(6)
        << s["mean"].get<double>() << "  std " << s["std"].get<double>();
    if (o.max_lag >= 1 && !s["degenerate"].get<bool>()) {
      out << "  rho(1) " << s["autocorrelation"][1].get<double>();
    }
    out << '\n';
  }
  const std::vector<double> wall = table.column("wall_ms");
  double wall_mean = 0.0;
  for (double v : wall) wall_mean += v / static_cast<double>(wall.size());
  report["mean_wall_ms"] = wall_mean;

  if (!o.reference.empty()) {
    const fs::path ref(o.reference);
    nlohmann::json cmp;
    for (const char* img : {"pm.f64", "psd.f64"}) {
      if (!fs::exists(dir / img) || !fs::exists(ref / img)) continue;
      const RawImage a = read_raw_image(dir / img);
      const RawImage b = read_raw_image(ref / img);
      if (!(a.shape == b.shape)) throw UsageError(std::string(img) + ": shapes differ");
      const double rel = (a.pixels - b.pixels).norm() / b.pixels.norm();
      cmp[img] = rel;
      out << img << " relative L2 difference vs reference " << rel << '\n';
    }
    if (fs::exists(ref / "chain.csv")) {
      const ChainTable rt = read_chain_csv(ref / "chain.csv");
      std::int64_t ref_burn = burn_in;
      if (fs::exists(ref / "resolved_config.json")) {
        ref_burn = RunConfig::from_json(read_json(ref / "resolved_config.json")).burn_in;
      }
      const std::vector<double> rt_t = rt.column("t");
      for (const auto& name : table.columns) {
        if (name == "t" || name == "J" || name == "wall_ms" || name == "alpha_norm" ||
            name == "directions") {
          continue;
        }
        const auto rc = std::find(rt.columns.begin(), rt.columns.end(), name);
        if (rc == rt.columns.end()) continue;
        const std::vector<double> rv = rt.column(name);
        double m = 0.0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < rv.size(); ++i) {
          if (rt_t[i] > static_cast<double>(ref_burn)) {
            m += rv[i];
            ++k;
          }
        }
        if (k == 0) continue;
        m /= static_cast<double>(k);
        const double mine = report["series"][name]["mean"].get<double>();
        cmp[name] = {{"mean", mine}, {"reference_mean", m}, {"relative_difference", (mine - m) / m}};
        out << name << " mean " << mine << " vs reference " << m << " (" << 100.0 * (mine - m) / m
            << "%)\n";
      }
    }
    report["reference"] = {{"dir", o.reference}, {"comparison", cmp}};
  }
  const fs::path target = o.output.empty() ? dir / "diagnose.json" : fs::path(o.output);
  write_json(target, report);
  out << "wrote " << target.string() << '\n';
  return kExitOk;
}

int cmd_validate(const std::string& suite, const std::string& output_dir, std::ostream& out) {
  if (!is_suite(suite)) {
    std::string names;
    for (const auto& n : suite_names()) names += (names.empty() ? "" : ", ") + n;
    throw UsageError("unknown suite '" + suite + "' (expected one of " + names + ")");
  }
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw UsageError("cannot create " + output_dir + ": " + ec.message());
  const SuiteReport report = run_suite(suite);
  out << report.text();
  const fs::path path = fs::path(output_dir) / ("validate_" + suite + ".json");
  write_json(path, report.to_json());
  out << "wrote " << path.string() << '\n';
  return report.pass() ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient scan Gibbs sampler for Gaussian-conditional posteriors", "gsgs"};
  app.require_subcommand(1);

  Overrides sim_opts;
  auto* simulate = app.add_subcommand("simulate", "Write synthetic super-resolution data");
  add_common_flags(simulate, sim_opts);

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "Run the sampler; writes pm/psd images and chain.csv");
  add_common_flags(run, run_opts);
  add_run_flags(run, run_opts);

  DiagnoseOptions diag;
  auto* diagnose = app.add_subcommand("diagnose", "Summarize and compare recorded chains");
  diagnose->add_option("--run-dir", diag.run_dir, "Directory written by `run`")->required();
  diagnose->add_option("--reference", diag.reference, "Run directory to compare against");
  diagnose->add_option("--max-lag", diag.max_lag, "Largest autocorrelation lag");
  diagnose->add_option("--output", diag.output, "Report path (default <run-dir>/diagnose.json)");

  std::string suite;
  std::string validate_dir = "validation";
  auto* validate = app.add_subcommand("validate", "Run an acceptance suite");
  validate->add_option("suite", suite, "operators | conjugate | invariance | toy-hier | superres-desk")
      ->required();
  validate->add_option("--output-dir", validate_dir, "Directory for the JSON report");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_opts, out);
    if (run->parsed()) return cmd_run(run_opts, out, err);
    if (diagnose->parsed()) return cmd_diagnose(diag, out);
    if (validate->parsed()) return cmd_validate(suite, validate_dir, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace gsgs
