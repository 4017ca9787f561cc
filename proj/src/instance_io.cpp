#include "ridemix/instance_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace ridemix {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty file");
  return rows;
}

double parse_double(const std::string& text, const fs::path& path, int line) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
  }
}

Mat read_matrix_csv(const fs::path& path, const std::vector<std::string>& ids) {
  const auto rows = read_csv(path);
  const int m = static_cast<int>(ids.size());
  const auto& header = rows[0];
  if (static_cast<int>(header.size()) != m + 1)
    throw DataError(path.string() + ":1: expected " + std::to_string(m + 1) + " columns, got " +
                    std::to_string(header.size()));
  for (int j = 0; j < m; ++j)
    if (header[j + 1] != ids[j])
      throw DataError(path.string() + ":1: column header '" + header[j + 1] + "' does not match zone id '" +
                      ids[j] + "'");
  if (static_cast<int>(rows.size()) != m + 1)
    throw DataError(path.string() + ": expected " + std::to_string(m + 1) + " rows, got " +
                    std::to_string(rows.size()));
  Mat out(m, m);
  for (int i = 0; i < m; ++i) {
    const auto& row = rows[i + 1];
    const int line = i + 2;
    if (static_cast<int>(row.size()) != m + 1)
      throw DataError(path.string() + ":" + std::to_string(line) + ": expected " + std::to_string(m + 1) +
                      " fields");
    if (row[0] != ids[i])
      throw DataError(path.string() + ":" + std::to_string(line) + ": row id '" + row[0] +
                      "' does not match zone id '" + ids[i] + "'");
    for (int j = 0; j < m; ++j) {
      out(i, j) = parse_double(row[j + 1], path, line);
      if (!std::isfinite(out(i, j)) || out(i, j) < 0.0)
        throw DataError(path.string() + ":" + std::to_string(line) + ": entries must be finite and nonnegative");
    }
  }
  return out;
}

void write_matrix_csv(const fs::path& path, const Mat& mat, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  out << "zone_id";
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  for (int i = 0; i < mat.rows(); ++i) {
    out << ids[i];
    for (int j = 0; j < mat.cols(); ++j) out << ',' << format_double(mat(i, j));
    out << '\n';
  }
}

const std::set<std::string>& known_param_keys() {
  static const std::set<std::string> keys = {
      "alpha", "eps", "sigma", "eta", "L", "N0", "q0", "D", "q_min",
      // solver overrides
      "fp_max_iters", "fp_damping", "fp_tol", "bisect_tol", "dual_max_iters", "dual_mu0", "dual_tau0",
      "dual_primal_tol", "fare_lo", "fare_hi", "fare_points", "idle_cap", "idle_points", "wage_lo", "wage_hi",
      "wage_points", "zoom_passes", "zoom_factor", "refine_max_evals", "refine_initial_step", "refine_shrink",
      "refine_min_step"};
  return keys;
}

}  // namespace

void SolverOverrides::apply(EquilibriumConfig& config) const {
  if (fp_max_iters) config.max_outer_iters = *fp_max_iters;
  if (fp_damping) config.damping = *fp_damping;
  if (fp_tol) config.fp_tol = *fp_tol;
  if (bisect_tol) config.bisect_tol = *bisect_tol;
}

void SolverOverrides::apply(GridSpec& grid) const {
  if (fare_lo) grid.fare_lo = *fare_lo;
  if (fare_hi) grid.fare_hi = *fare_hi;
  if (fare_points) grid.fare_points = *fare_points;
  if (idle_cap) grid.idle_cap = *idle_cap;
  if (idle_points) grid.idle_points = *idle_points;
  if (wage_lo) grid.wage_lo = *wage_lo;
  if (wage_hi) grid.wage_hi = *wage_hi;
  if (wage_points) grid.wage_points = *wage_points;
  if (zoom_passes) grid.zoom_passes = *zoom_passes;
  if (zoom_factor) grid.zoom_factor = *zoom_factor;
}

void SolverOverrides::apply(DualConfig& config) const {
  if (dual_max_iters) config.max_iters = *dual_max_iters;
  if (dual_mu0) config.mu0 = *dual_mu0;
  if (dual_tau0) config.tau0 = *dual_tau0;
  if (dual_primal_tol) config.primal_tol = *dual_primal_tol;
  apply(config.grid);
}

void SolverOverrides::apply(RefineConfig& config) const {
  if (refine_max_evals) config.max_evaluations = *refine_max_evals;
  if (refine_initial_step) config.initial_step = *refine_initial_step;
  if (refine_shrink) config.shrink = *refine_shrink;
  if (refine_min_step) config.min_step = *refine_min_step;
  apply(config.grid);
  apply(config.equilibrium);
}

InstanceBundle read_instance_dir(const std::string& dir) {
  const fs::path root(dir);
  InstanceBundle bundle;

  const fs::path zones_path = root / "zones.csv";
  const auto zone_rows = read_csv(zones_path);
  if (zone_rows[0] != std::vector<std::string>{"zone_id", "postal_code", "label"})
    throw DataError(zones_path.string() + ":1: expected header zone_id,postal_code,label");
  std::vector<std::string> ids;
  for (size_t i = 1; i < zone_rows.size(); ++i) {
    const auto& row = zone_rows[i];
    const int line = static_cast<int>(i) + 1;
    if (row.size() != 3)
      throw DataError(zones_path.string() + ":" + std::to_string(line) + ": expected 3 fields");
    if (row[2] != "urban" && row[2] != "remote")
      throw DataError(zones_path.string() + ":" + std::to_string(line) + ": label must be urban or remote");
    bundle.instance.zones.push_back({row[0], row[1], row[2] == "remote"});
    ids.push_back(row[0]);
  }
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
    throw DataError(zones_path.string() + ": duplicate zone ids");

  bundle.instance.travel_time = read_matrix_csv(root / "travel_time.csv", ids);
  bundle.instance.potential_demand = read_matrix_csv(root / "demand.csv", ids);
  bundle.instance.outside_cost = read_matrix_csv(root / "outside_cost.csv", ids);

  const fs::path params_path = root / "params.json";
  std::ifstream in(params_path);
  if (!in) throw DataError(params_path.string() + ": cannot open");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const std::exception& err) {
    throw DataError(params_path.string() + ": " + err.what());
  }
  if (!doc.is_object()) throw DataError(params_path.string() + ": expected a flat JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known_param_keys().count(key)) throw DataError(params_path.string() + ": unknown key '" + key + "'");
    if (!value.is_number()) throw DataError(params_path.string() + ": key '" + key + "' must be a number");
  }
  auto require = [&](const char* key) -> double {
    if (!doc.contains(key)) throw DataError(params_path.string() + ": missing key '" + key + "'");
    return doc[key].get<double>();
  };
  BehaviorParams& p = bundle.params;
  p.value_of_time = require("alpha");
  p.demand_sensitivity = require("eps");
  p.supply_sensitivity = require("sigma");
  p.reposition_sensitivity = require("eta");
  p.wait_coefficient = require("L");
  p.driver_pool = require("N0");
  p.reservation_wage = require("q0");
  p.av_cost = require("D");
  if (doc.contains("q_min")) p.min_wage = doc["q_min"].get<double>();

  SolverOverrides& o = bundle.overrides;
  auto opt_int = [&](const char* key, std::optional<int>& slot) {
    if (doc.contains(key)) slot = doc[key].get<int>();
  };
  auto opt_double = [&](const char* key, std::optional<double>& slot) {
    if (doc.contains(key)) slot = doc[key].get<double>();
  };
  opt_int("fp_max_iters", o.fp_max_iters);
  opt_double("fp_damping", o.fp_damping);
  opt_double("fp_tol", o.fp_tol);
  opt_double("bisect_tol", o.bisect_tol);
  opt_int("dual_max_iters", o.dual_max_iters);
  opt_double("dual_mu0", o.dual_mu0);
  opt_double("dual_tau0", o.dual_tau0);
  opt_double("dual_primal_tol", o.dual_primal_tol);
  opt_double("fare_lo", o.fare_lo);
  opt_double("fare_hi", o.fare_hi);
  opt_int("fare_points", o.fare_points);
  opt_double("idle_cap", o.idle_cap);
  opt_int("idle_points", o.idle_points);
  opt_double("wage_lo", o.wage_lo);
  opt_double("wage_hi", o.wage_hi);
  opt_int("wage_points", o.wage_points);
  opt_int("zoom_passes", o.zoom_passes);
  opt_double("zoom_factor", o.zoom_factor);
  opt_int("refine_max_evals", o.refine_max_evals);
  opt_double("refine_initial_step", o.refine_initial_step);
  opt_double("refine_shrink", o.refine_shrink);
  opt_double("refine_min_step", o.refine_min_step);

  bundle.instance.validate();
  bundle.params.validate();
  return bundle;
}

void write_instance_dir(const std::string& dir, const NetworkInstance& instance, const BehaviorParams& params,
                        const SolverOverrides& overrides) {
  const fs::path root(dir);
  fs::create_directories(root);
  std::vector<std::string> ids;
  for (const auto& z : instance.zones) ids.push_back(z.zone_id);

  {
    std::ofstream out(root / "zones.csv");
    out << "zone_id,postal_code,label\n";
    for (const auto& z : instance.zones)
      out << z.zone_id << ',' << z.postal_code << ',' << (z.remote ? "remote" : "urban") << '\n';
  }
  write_matrix_csv(root / "travel_time.csv", instance.travel_time, ids);
  write_matrix_csv(root / "demand.csv", instance.potential_demand, ids);
  write_matrix_csv(root / "outside_cost.csv", instance.outside_cost, ids);

  ordered_json doc;
  doc["alpha"] = params.value_of_time;
  doc["eps"] = params.demand_sensitivity;
  doc["sigma"] = params.supply_sensitivity;
  doc["eta"] = params.reposition_sensitivity;
  doc["L"] = params.wait_coefficient;
  doc["N0"] = params.driver_pool;
  doc["q0"] = params.reservation_wage;
  doc["D"] = params.av_cost;
  if (params.min_wage) doc["q_min"] = *params.min_wage;
  auto put_int = [&](const char* key, const std::optional<int>& v) {
    if (v) doc[key] = *v;
  };
  auto put_double = [&](const char* key, const std::optional<double>& v) {
    if (v) doc[key] = *v;
  };
  put_int("fp_max_iters", overrides.fp_max_iters);
  put_double("fp_damping", overrides.fp_damping);
  put_double("fp_tol", overrides.fp_tol);
  put_double("bisect_tol", overrides.bisect_tol);
  put_int("dual_max_iters", overrides.dual_max_iters);
  put_double("dual_mu0", overrides.dual_mu0);
  put_double("dual_tau0", overrides.dual_tau0);
  put_double("dual_primal_tol", overrides.dual_primal_tol);
  put_double("fare_lo", overrides.fare_lo);
  put_double("fare_hi", overrides.fare_hi);
  put_int("fare_points", overrides.fare_points);
  put_double("idle_cap", overrides.idle_cap);
  put_int("idle_points", overrides.idle_points);
  put_double("wage_lo", overrides.wage_lo);
  put_double("wage_hi", overrides.wage_hi);
  put_int("wage_points", overrides.wage_points);
  put_int("zoom_passes", overrides.zoom_passes);
  put_double("zoom_factor", overrides.zoom_factor);
  put_int("refine_max_evals", overrides.refine_max_evals);
  put_double("refine_initial_step", overrides.refine_initial_step);
  put_double("refine_shrink", overrides.refine_shrink);
  put_double("refine_min_step", overrides.refine_min_step);

  std::ofstream out(root / "params.json");
  out << doc.dump(2) << '\n';
}

}  // namespace ridemix
