#pragma once

#include "gsgs/sampler.hpp"
#include "gsgs/superres.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace gsgs {

// Flat configuration shared by the CLI commands. JSON keys equal the field
// names; unknown keys are rejected.
struct RunConfig {
  // geometry
  Index rows = 64;
  Index cols = 64;
  Index factor = 2;
  std::vector<PixelOffset> offsets{{0, 0}, {1, 0}, {0, 1}};
  Index blur_width = 5;
  // data
  double gamma_n_true = 1.0;
  // Gamma hyperpriors (shape, rate)
  double alpha_n = 0.0;
  double beta_n = 0.0;
  double alpha_x = 0.0;
  double beta_x = 0.0;
  bool paper_literal_shapes = false;
  // sampler
  int n_dirs = 10;
  std::string perturbation = "factored_Q";
  int perturbation_period = 1;
  std::int64_t max_iters = 2000;
  std::int64_t burn_in = 500;
  std::int64_t thinning = 100;
  bool keep_snapshots = true;
  std::uint64_t seed = 1;
  // I/O
  std::string output_dir = "out";
  std::string data_dir;  // empty: simulate in memory
  int chains = 1;

  static RunConfig from_json(const nlohmann::json& j);  // throws ConfigError
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Throws ConfigError on the first inconsistent field.
  void validate() const;

  Geometry geometry() const;
  GammaPrior prior() const;
  GsgsConfig gsgs_config() const;
  ShapeConvention shapes() const;
};

// Metadata describing an output file: the resolved config, the seed, the
// blur anchor and any extra fields, written as `<file>.json`.
nlohmann::json output_metadata(const RunConfig& cfg, const nlohmann::json& extra = {});
void write_sidecar(const std::filesystem::path& file, const nlohmann::json& meta);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Chain CSV: one row per iteration with columns
//   t, <theta names...>, J, wall_ms, alpha_norm, directions
void write_chain_csv(const std::filesystem::path& path, const ChainRecord& record);

struct ChainTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Values of one column; throws ConfigError for an unknown name.
  std::vector<double> column(const std::string& name) const;
};
ChainTable read_chain_csv(const std::filesystem::path& path);

// Writes every snapshot as `snap_<t>.f64` under dir plus a single meta.json.
void write_snapshots(const std::filesystem::path& dir, const ChainRecord& record, GridShape shape,
                     const nlohmann::json& meta);

}  // namespace gsgs
