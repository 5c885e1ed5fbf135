#include "gsgs/run_config.hpp"

#include "gsgs/error.hpp"
#include "gsgs/image_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace gsgs {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "rows",     "cols",          "factor",        "offsets",      "blur_width",
      "gamma_n_true", "alpha_n",   "beta_n",        "alpha_x",      "beta_x",
      "paper_literal_shapes",      "n_dirs",        "perturbation", "perturbation_period",
      "max_iters", "burn_in",      "thinning",      "keep_snapshots", "seed",
      "output_dir", "data_dir",    "chains"};
  return keys;
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  read_key(j, "rows", c.rows);
  read_key(j, "cols", c.cols);
  read_key(j, "factor", c.factor);
  if (j.contains("offsets")) {
    std::vector<std::array<Index, 2>> raw;
    read_key(j, "offsets", raw);
    c.offsets.clear();
    for (const auto& o : raw) c.offsets.push_back({o[0], o[1]});
  }
  read_key(j, "blur_width", c.blur_width);
  read_key(j, "gamma_n_true", c.gamma_n_true);
  read_key(j, "alpha_n", c.alpha_n);
  read_key(j, "beta_n", c.beta_n);
  read_key(j, "alpha_x", c.alpha_x);
  read_key(j, "beta_x", c.beta_x);
  read_key(j, "paper_literal_shapes", c.paper_literal_shapes);
  read_key(j, "n_dirs", c.n_dirs);
  read_key(j, "perturbation", c.perturbation);
  read_key(j, "perturbation_period", c.perturbation_period);
  read_key(j, "max_iters", c.max_iters);
  read_key(j, "burn_in", c.burn_in);
  read_key(j, "thinning", c.thinning);
  read_key(j, "keep_snapshots", c.keep_snapshots);
  read_key(j, "seed", c.seed);
  read_key(j, "output_dir", c.output_dir);
  read_key(j, "data_dir", c.data_dir);
  read_key(j, "chains", c.chains);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

nlohmann::json RunConfig::to_json() const {
  nlohmann::json offs = nlohmann::json::array();
  for (const auto& o : offsets) offs.push_back({o.row, o.col});
  return {{"rows", rows},
          {"cols", cols},
          {"factor", factor},
          {"offsets", offs},
          {"blur_width", blur_width},
          {"gamma_n_true", gamma_n_true},
          {"alpha_n", alpha_n},
          {"beta_n", beta_n},
          {"alpha_x", alpha_x},
          {"beta_x", beta_x},
          {"paper_literal_shapes", paper_literal_shapes},
          {"n_dirs", n_dirs},
          {"perturbation", perturbation},
          {"perturbation_period", perturbation_period},
          {"max_iters", max_iters},
          {"burn_in", burn_in},
          {"thinning", thinning},
          {"keep_snapshots", keep_snapshots},
          {"seed", seed},
          {"output_dir", output_dir},
          {"data_dir", data_dir},
          {"chains", chains}};
}

void RunConfig::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("rows and cols must be >= 1");
  if (factor < 1 || rows % factor != 0 || cols % factor != 0) {
    throw ConfigError("factor must divide rows and cols");
  }
  if (offsets.empty()) throw ConfigError("offsets must not be empty");
  for (const auto& o : offsets) {
    if (o.row < 0 || o.row >= factor || o.col < 0 || o.col >= factor) {
      throw ConfigError("offsets must lie in [0, factor)");
    }
  }
  if (blur_width < 1 || blur_width > cols || (rows > 1 && blur_width > rows)) {
    throw ConfigError("blur_width must lie in [1, grid size]");
  }
  if (!(gamma_n_true > 0.0)) throw ConfigError("gamma_n_true must be > 0");
  if (alpha_n < 0 || beta_n < 0 || alpha_x < 0 || beta_x < 0) {
    throw ConfigError("prior parameters must be >= 0");
  }
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  gsgs_config().validate();
}

Geometry RunConfig::geometry() const {
  Geometry g;
  g.hr = {rows, cols};
  g.factor = factor;
  g.offsets = offsets;
  g.blur_width = blur_width;
  return g;
}

GammaPrior RunConfig::prior() const { return {alpha_n, beta_n, alpha_x, beta_x}; }

GsgsConfig RunConfig::gsgs_config() const {
  GsgsConfig g;
  g.n_dirs = n_dirs;
  g.perturbation = parse_perturbation(perturbation);
  g.perturbation_period = perturbation_period;
  g.max_iters = max_iters;
  g.burn_in = burn_in;
  g.thinning = thinning;
  g.keep_snapshots = keep_snapshots;
  g.seed = seed;
  return g;
}

ShapeConvention RunConfig::shapes() const {
  return paper_literal_shapes ? ShapeConvention::kPaperLiteral : ShapeConvention::kCorrected;
}

// --- metadata --------------------------------------------------------------

nlohmann::json output_metadata(const RunConfig& cfg, const nlohmann::json& extra) {
  nlohmann::json meta{{"config", cfg.to_json()},
                      {"seed", cfg.seed},
                      {"blur_anchor", {cfg.blur_width / 2, cfg.blur_width / 2}},
                      {"boundary", "periodic"},
                      {"rng", "mt19937_64"}};
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) meta[k] = v;
  }
  return meta;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_sidecar(const std::filesystem::path& file, const nlohmann::json& meta) {
  nlohmann::json j = meta;
  j["file"] = file.filename().string();
  write_json(file.string() + ".json", j);
}

// --- chain CSV -------------------------------------------------------------

void write_chain_csv(const std::filesystem::path& path, const ChainRecord& record) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "t";
  for (const auto& name : record.theta_names) out << ',' << name;
  out << ",J,wall_ms,alpha_norm,directions\n";
  out << std::setprecision(17);
  for (const auto& it : record.iterations) {
    out << it.t;
    for (double v : it.theta) out << ',' << v;
    out << ',' << it.potential << ',' << it.wall_ms << ',' << it.alpha_norm << ','
        << it.directions << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<double> ChainTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] != name) continue;
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
  throw ConfigError("chain table has no column '" + name + "'");
}

ChainTable read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  ChainTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty chain file");
  {
    std::istringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell +
                          "'");
      }
    }
    if (row.size() != table.columns.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_snapshots(const std::filesystem::path& dir, const ChainRecord& record, GridShape shape,
                     const nlohmann::json& meta) {
  std::filesystem::create_directories(dir);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& s : record.snapshots) {
    const std::string name = "snap_" + std::to_string(s.t) + ".f64";
    write_raw_image(dir / name, shape, s.x);
    files.push_back(name);
  }
  nlohmann::json j = meta;
  j["snapshots"] = files;
  write_json(dir / "meta.json", j);
}

}  // namespace gsgs
