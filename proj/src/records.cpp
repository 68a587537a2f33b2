#include "confspec/records.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "confspec/concentration.hpp"
#include "confspec/constants.hpp"
#include "confspec/errors.hpp"
#include "confspec/geneig.hpp"
#include "confspec/testfunctions.hpp"
#include "confspec/variation.hpp"

namespace confspec {

namespace {

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0.0 ? "inf" : "-inf";
}

template <class V>
json num_array(const V& v) {
  json a = json::array();
  for (auto x : v) a.push_back(num(x));
  return a;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

class Params {
 public:
  explicit Params(const json& j) : j_(j) {}

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw InvalidConfig("parameter '" + key + "' must be a number");
    return v.get<double>();
  }

  int integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw InvalidConfig("parameter '" + key + "' must be an integer");
    return v.get<int>();
  }

  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw InvalidConfig("parameter '" + key + "' must be a boolean");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) throw InvalidConfig("parameter '" + key + "' must be a string");
    return v.get<std::string>();
  }

  // array of numbers or a comma-separated string
  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (v.is_array()) {
      for (const auto& x : v) {
        if (!x.is_number()) throw InvalidConfig("parameter '" + key + "' must hold numbers");
        out.push_back(x.get<double>());
      }
    } else if (v.is_string()) {
      std::stringstream ss(v.get<std::string>());
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          size_t used = 0;
          out.push_back(std::stod(tok, &used));
          if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw InvalidConfig("parameter '" + key + "' has a malformed entry '" + tok + "'");
        }
      }
    } else {
      throw InvalidConfig("parameter '" + key + "' must be a list");
    }
    return out;
  }

 private:
  const json& j_;
};

const std::vector<std::string>& known_tasks() {
  static const std::vector<std::string> t{"constants", "eigen",          "variation",
                                          "optimize",  "sweep",          "bubbling",
                                          "xk",        "bubble-sweep",   "demo-unbounded",
                                          "sphere-table"};
  return t;
}

std::set<std::string> allowed_params(const std::string& task, const std::string& action) {
  const std::set<std::string> opt{"k",           "direction",  "p_schedule", "iters",
                                  "theta",       "tol_fun",    "tol_residual", "floor_eps",
                                  "seed_amplitude", "snapshots", "delta",     "reference",
                                  "seed_beta"};
  if (task == "constants") return {"L"};
  if (task == "eigen" && action == "classify") return {"count"};
  if (task == "eigen") return {"beta", "column", "p", "kmax"};
  if (task == "variation" && action == "ddiff") return {"beta", "dir", "column", "k", "t"};
  if (task == "variation") return {"beta", "column", "k", "p", "direction"};
  if (task == "optimize") return opt;
  if (task == "sweep") {
    std::set<std::string> s = opt;
    s.erase("k");
    s.insert({"k_from", "k_to"});
    return s;
  }
  if (task == "bubbling") return {"run", "delta", "window"};
  if (task == "xk") return {"table", "sphere", "higher", "k"};
  if (task == "bubble-sweep") return {"variant", "eps", "delta", "center"};
  if (task == "demo-unbounded") return {"eps", "use_k_minus", "center"};
  if (task == "sphere-table") return {"k_max", "iters", "bump_width"};
  return {};
}

void check_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidConfig(what + " must be positive");
}

}  // namespace

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  static const std::set<std::string> top{"task", "action", "backend", "params", "out", "seed"};
  for (const auto& [k, v] : j.items())
    if (!top.count(k)) throw InvalidConfig("unknown config key '" + k + "'");
  RunConfig cfg;
  try {
    if (!j.contains("task") || !j.at("task").is_string()) throw InvalidConfig("missing task");
    cfg.task = j.at("task").get<std::string>();
    if (j.contains("action")) cfg.action = j.at("action").get<std::string>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("seed")) {
      if (!j.at("seed").is_number_unsigned()) throw InvalidConfig("seed must be a nonnegative integer");
      cfg.seed = j.at("seed").get<unsigned long long>();
    }
    if (j.contains("params")) {
      if (!j.at("params").is_object()) throw InvalidConfig("params must be an object");
      cfg.params = j.at("params");
    }
    if (j.contains("backend")) {
      const json& b = j.at("backend");
      if (!b.is_object()) throw InvalidConfig("backend must be an object");
      static const std::set<std::string> keys{"kind", "n", "s", "truncation", "quad_density",
                                              "axial", "c"};
      for (const auto& [k, v] : b.items())
        if (!keys.count(k)) throw InvalidConfig("unknown backend key '" + k + "'");
      if (b.contains("kind")) cfg.backend.kind = manifold_kind_from_string(b.at("kind").get<std::string>());
      if (b.contains("n")) cfg.backend.n = b.at("n").get<int>();
      if (b.contains("s")) cfg.backend.s = b.at("s").get<int>();
      if (b.contains("truncation")) cfg.backend.truncation = b.at("truncation").get<int>();
      if (b.contains("quad_density")) cfg.backend.quad_density = b.at("quad_density").get<double>();
      if (b.contains("axial")) cfg.backend.axial = b.at("axial").get<bool>();
      if (b.contains("c")) cfg.backend.c = b.at("c").get<double>();
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config schema violation: ") + e.what());
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j;
  j["task"] = cfg.task;
  if (!cfg.action.empty()) j["action"] = cfg.action;
  j["backend"] = {{"kind", to_string(cfg.backend.kind)},
                  {"n", cfg.backend.n},
                  {"s", cfg.backend.s},
                  {"truncation", cfg.backend.truncation},
                  {"quad_density", cfg.backend.quad_density},
                  {"axial", cfg.backend.axial},
                  {"c", cfg.backend.c}};
  j["params"] = cfg.params;
  if (!cfg.out.empty()) j["out"] = cfg.out;
  j["seed"] = cfg.seed;
  return j;
}

void validate_config(const RunConfig& cfg) {
  const auto& tasks = known_tasks();
  if (std::find(tasks.begin(), tasks.end(), cfg.task) == tasks.end())
    throw InvalidConfig("unknown task '" + cfg.task + "'");
  if (cfg.task == "eigen" && cfg.action != "classify" && cfg.action != "solve")
    throw InvalidConfig("eigen needs action classify or solve");
  if (cfg.task == "variation" && cfg.action != "ddiff" && cfg.action != "certify")
    throw InvalidConfig("variation needs action ddiff or certify");
  const BackendSpec& b = cfg.backend;
  if (b.n < 2 || b.n > 64) throw InvalidConfig("n must lie in [2, 64]");
  if (b.s < 1) throw InvalidConfig("s must be >= 1");
  if (b.truncation < 1 || b.truncation > 400) throw InvalidConfig("truncation must lie in [1, 400]");
  if (!(b.quad_density >= 1.0) || b.quad_density > 16.0)
    throw InvalidConfig("quad_density must lie in [1, 16]");
  if (!std::isfinite(b.c)) throw InvalidConfig("c must be finite");
  if (b.kind == ManifoldKind::sphere) {
    if (2 * b.s >= b.n) throw InvalidConfig("the sphere backend needs 2s < n");
    if (b.c != 0.0) throw InvalidConfig("the sphere operator has no free shift");
  }
  if (b.axial && b.kind != ManifoldKind::sphere) throw InvalidConfig("axial needs the sphere");

  const std::set<std::string> allowed = allowed_params(cfg.task, cfg.action);
  for (const auto& [k, v] : cfg.params.items())
    if (!allowed.count(k)) throw InvalidConfig("unknown parameter '" + k + "' for " + cfg.task);

  const Params p(cfg.params);
  if (cfg.task == "constants" && p.integer("L", 8) < 0) throw InvalidConfig("L must be >= 0");
  if (cfg.task == "eigen" && cfg.action == "classify" && p.integer("count", 10) < 1)
    throw InvalidConfig("count must be >= 1");
  if (cfg.task == "eigen" && cfg.action == "solve") {
    if (p.integer("kmax", 5) < 1) throw InvalidConfig("kmax must be >= 1");
    if (p.has("p")) check_positive(p.number("p", 1.0), "p");
    p.text("beta", "const");
  }
  if (cfg.task == "variation") {
    if (p.integer("k", 1) < 1) throw InvalidConfig("k must be >= 1");
    if (p.text("beta", "") .empty()) throw InvalidConfig("variation needs a beta file");
    if (cfg.action == "ddiff") {
      if (p.text("dir", "").empty()) throw InvalidConfig("ddiff needs a direction file");
      if (p.has("t")) check_positive(p.number("t", 1e-4), "t");
    } else {
      const double pp = p.number("p", 0.0);
      if (!(pp > 1.0)) throw InvalidConfig("certify needs p > 1");
      direction_from_string(p.text("direction", "min"));
    }
  }
  if (cfg.task == "optimize" || cfg.task == "sweep") {
    if (cfg.task == "optimize" && p.integer("k", 1) < 1) throw InvalidConfig("k must be >= 1");
    if (cfg.task == "sweep") {
      const int a = p.integer("k_from", 1), z = p.integer("k_to", 1);
      if (a < 1 || z < a) throw InvalidConfig("sweep needs 1 <= k_from <= k_to");
    }
    direction_from_string(p.text("direction", "min"));
    const std::vector<double> sched = p.list("p_schedule");
    if (sched.empty()) throw InvalidConfig("p_schedule is required");
    if (p.integer("iters", 2000) < 1) throw InvalidConfig("iters must be >= 1");
    const double th = p.number("theta", 0.5);
    if (!(th > 0.0 && th <= 1.0)) throw InvalidConfig("theta must lie in (0, 1]");
    check_positive(p.number("tol_fun", 1e-12), "tol_fun");
    check_positive(p.number("tol_residual", 1e-4), "tol_residual");
    if (p.number("floor_eps", 0.0) < 0.0) throw InvalidConfig("floor_eps must be >= 0");
    if (p.number("seed_amplitude", 0.05) < 0.0) throw InvalidConfig("seed_amplitude must be >= 0");
    if (p.integer("snapshots", 5) < 1) throw InvalidConfig("snapshots must be >= 1");
    if (p.has("delta")) check_positive(p.number("delta", 1.0), "delta");
    p.number("reference", 0.0);
    p.text("seed_beta", "");
  }
  if (cfg.task == "bubbling") {
    if (p.text("run", "").empty()) throw InvalidConfig("bubbling needs a run record");
    if (p.has("delta")) check_positive(p.number("delta", 1.0), "delta");
    if (p.integer("window", 5) < 1) throw InvalidConfig("window must be >= 1");
  }
  if (cfg.task == "xk") {
    if (p.integer("k", 0) < 1) throw InvalidConfig("xk needs k >= 1");
    if (!p.flag("sphere", false) && p.text("table", "").empty())
      throw InvalidConfig("xk needs a table file or sphere = true");
  }
  if (cfg.task == "bubble-sweep" || cfg.task == "demo-unbounded") {
    const std::vector<double> eps = p.list("eps");
    if (eps.empty()) throw InvalidConfig("eps list is required");
    for (double e : eps) check_positive(e, "every eps");
    p.list("center");
    if (cfg.task == "bubble-sweep") {
      bubble_variant_from_string(p.text("variant", "plain"));
      if (p.has("delta")) check_positive(p.number("delta", 1.0), "delta");
    } else {
      p.flag("use_k_minus", false);
    }
  }
  if (cfg.task == "sphere-table") {
    if (b.kind != ManifoldKind::sphere || b.axial)
      throw InvalidConfig("sphere-table needs the full sphere backend");
    if (p.integer("k_max", 4) < 2) throw InvalidConfig("k_max must be >= 2");
    if (p.integer("iters", 300) < 1) throw InvalidConfig("iters must be >= 1");
    check_positive(p.number("bump_width", 0.5), "bump_width");
  }
}

json RunRecord::to_json() const {
  json j;
  j["config"] = config;
  j["version"] = version;
  j["timing"] = {{"seconds", seconds}, {"threads", omp_get_max_threads()}};
  j["payload"] = payload;
  j["warnings"] = warnings;
  json sc = json::object();
  for (const auto& s : sidecars) sc[s.name] = s.name + ".csv";
  j["sidecars"] = sc;
  return j;
}

ModelPtr build_model(const BackendSpec& b) {
  return ManifoldModel::build(ModelSpec{b.kind, b.n, b.truncation, b.quad_density, b.axial});
}

OperatorPtr build_operator(const BackendSpec& b) { return make_operator(build_model(b), b.s, b.c); }

std::string sidecar_path(const std::string& record_path, const std::string& name) {
  std::filesystem::path p(record_path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + "." + name + ".csv")).string();
}

void write_record(const RunRecord& rec, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidConfig("cannot write " + path);
  json j = rec.to_json();
  json sc = json::object();
  for (const auto& s : rec.sidecars)
    sc[s.name] = std::filesystem::path(sidecar_path(path, s.name)).filename().string();
  j["sidecars"] = sc;
  f << j.dump(2) << "\n";
  for (const auto& s : rec.sidecars) {
    std::ofstream c(sidecar_path(path, s.name));
    if (!c) throw InvalidConfig("cannot write sidecar " + s.name);
    c << s.csv;
  }
}

std::string field_csv(const ManifoldModel& m, const std::vector<std::string>& names,
                      const std::vector<Eigen::VectorXd>& columns) {
  if (names.size() != columns.size()) throw PreconditionViolation("one name per column");
  const Grid& g = m.grid();
  for (const auto& c : columns)
    if (c.size() != g.weights.size()) throw ModelMismatch("column length does not match the grid");
  std::ostringstream os;
  os << std::setprecision(17);
  os << "node";
  for (Eigen::Index j = 0; j < g.coords.cols(); ++j) os << ",c" << j;
  os << ",w";
  for (const auto& n : names) os << "," << n;
  os << "\n";
  for (Eigen::Index q = 0; q < g.weights.size(); ++q) {
    os << q;
    for (Eigen::Index j = 0; j < g.coords.cols(); ++j) os << "," << g.coords(q, j);
    os << "," << g.weights[q];
    for (const auto& c : columns) os << "," << c[q];
    os << "\n";
  }
  return os.str();
}

Eigen::VectorXd read_field_csv(const std::string& path, const std::string& name) {
  std::ifstream f(path);
  if (!f) throw InvalidConfig("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw InvalidConfig(path + " is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  int col = static_cast<int>(header.size()) - 1;
  if (!name.empty()) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidConfig("column '" + name + "' not found in " + path);
    col = static_cast<int>(it - header.begin());
  }
  std::vector<double> vals;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    for (int i = 0; i <= col; ++i)
      if (!std::getline(ss, tok, ',')) throw InvalidConfig("short row in " + path);
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw InvalidConfig("malformed value '" + tok + "' in " + path);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

OptimizerConfig optimizer_config_from(const RunConfig& cfg, const OperatorModel& op) {
  const Params p(cfg.params);
  OptimizerConfig o;
  o.k = p.integer("k", 1);
  o.direction = direction_from_string(p.text("direction", "min"));
  o.p_schedule = p.list("p_schedule");
  o.max_iters = p.integer("iters", 2000);
  o.theta = p.number("theta", 0.5);
  o.tol_fun = p.number("tol_fun", 1e-12);
  o.tol_residual = p.number("tol_residual", 1e-4);
  o.floor_eps = p.number("floor_eps", 0.0);
  o.seed = cfg.seed;
  o.seed_amplitude = p.number("seed_amplitude", 0.05);
  o.snapshots = p.integer("snapshots", 5);
  const std::string sb = p.text("seed_beta", "");
  if (!sb.empty()) {
    Eigen::VectorXd v = read_field_csv(sb);
    if (v.size() != op.manifold->node_count()) throw ModelMismatch("seed_beta length does not match the grid");
    o.seed_values = std::move(v);
  }
  return o;
}

namespace {

Weight load_beta(const ModelPtr& m, const std::string& src, const std::string& column) {
  if (src == "const") return constant_weight(m, 1.0);
  Eigen::VectorXd v = read_field_csv(src, column);
  if (v.size() != m->node_count()) throw ModelMismatch("beta length does not match the grid");
  return grid_weight(m, std::move(v), Provenance::user);
}

Eigen::RowVectorXd center_from(const Params& p, const ManifoldModel& m) {
  const std::vector<double> c = p.list("center");
  const Eigen::Index dim = m.grid().coords.cols();
  if (c.empty()) {
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(dim);
    if (m.kind() == ManifoldKind::sphere) x[0] = 1.0;
    return x;
  }
  if (static_cast<Eigen::Index>(c.size()) != dim) throw InvalidConfig("center has the wrong dimension");
  return Eigen::Map<const Eigen::RowVectorXd>(c.data(), dim);
}

double default_delta(const ManifoldModel& m) {
  return std::min(4.0 * m.grid_spacing(), 0.5 * m.injectivity_radius());
}

json cluster_table(const GenEigenResult& res, int kmax) {
  json a = json::array();
  int k = res.m_beta;
  while (k <= std::min(kmax, res.count())) {
    const EigenCluster c = eigencluster(res, k);
    a.push_back({{"i_k", c.i_k}, {"I_k", c.I_k}, {"value", num(res.lambda(k))}});
    k = c.I_k + 1;
  }
  return a;
}

json certificate_json(const ELCertificate& c) {
  return {{"direction", to_string(c.direction)},
          {"k", c.k},
          {"r_or_s", c.r_or_s},
          {"lambda_bar", num(c.lambda_bar)},
          {"p", c.p},
          {"d", vec_json(c.d)},
          {"residual_norm", num(c.residual_norm)},
          {"orth_error", num(c.orth_error)}};
}

json concentration_json(const ConcentrationReport& r) {
  json pts = json::array();
  for (Eigen::Index i = 0; i < r.flagged_points.rows(); ++i)
    pts.push_back(vec_json(r.flagged_points.row(i).transpose()));
  return {{"threshold", r.threshold},       {"delta", r.delta},
          {"flagged_points", pts},          {"flagged_masses", num_array(r.flagged_masses)},
          {"max_local_mass", r.local_masses.size() ? r.local_masses.maxCoeff() : 0.0},
          {"total_mass", r.total_mass},     {"snapshots", r.snapshots},
          {"sequence_tag", r.sequence_tag}, {"limsup_rule", "max over the last snapshots"}};
}

struct OptimizeOutcome {
  json payload;
  ContinuationResult run;
  ConcentrationReport conc;
};

OptimizeOutcome run_optimize(const RunConfig& cfg, const OperatorPtr& op, RunRecord& rec) {
  const Params p(cfg.params);
  const OptimizerConfig o = optimizer_config_from(cfg, *op);
  OptimizeOutcome out;
  out.run = continuation(op, o);
  std::vector<ScaledWeight> seq;
  for (const Snapshot& sn : out.run.tail) seq.push_back({sn.lambda, sn.beta});
  const double delta = p.number("delta", default_delta(*op->manifold));
  out.conc = detect_concentration(seq, op->dims.s, delta, o.snapshots, "p-schedule tail");
  const VerdictReport v =
      attainment_verdict(out.run, out.conc, o.tol_residual, p.number("reference", 0.0));

  json stages = json::array();
  for (const StageRecord& s : out.run.stages) {
    stages.push_back({{"p", s.p},
                      {"lambda_bar", num(s.lambda_bar)},
                      {"lambda", num(s.lambda)},
                      {"residual", num(s.residual)},
                      {"iterations", s.iterations},
                      {"rejections", s.rejections},
                      {"status", to_string(s.status)},
                      {"cluster", num_array(s.cluster)},
                      {"history", num_array(s.history)}});
    if (s.status != StageStatus::converged)
      rec.warnings.push_back("stage p=" + std::to_string(s.p) + " ended " + to_string(s.status));
  }
  json tail = json::array();
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> cols;
  for (size_t i = 0; i < out.run.tail.size(); ++i) {
    const Snapshot& sn = out.run.tail[i];
    names.push_back("beta_" + std::to_string(i));
    cols.push_back(sn.beta.grid_values());
    tail.push_back({{"p", sn.p}, {"lambda", num(sn.lambda)}, {"column", names.back()}});
  }
  const ModelPtr& m = op->manifold;
  rec.sidecars.push_back({"beta", field_csv(*m, {"beta"}, {out.run.final_state.beta.grid_values()})});
  rec.sidecars.push_back({"tail", field_csv(*m, names, cols)});
  out.payload = {{"k", o.k},
                 {"direction", to_string(o.direction)},
                 {"stages", stages},
                 {"extrapolation",
                  {{"p0", op->dims.n / (2.0 * op->dims.s)},
                   {"value", num(out.run.extrapolation.value)},
                   {"slope", num(out.run.extrapolation.slope)},
                   {"fit_residual", num(out.run.extrapolation.fit_residual)},
                   {"points", out.run.extrapolation.points}}},
                 {"holder_consistent", out.run.holder_consistent},
                 {"monotone_iterates", out.run.monotone_iterates},
                 {"certificate", certificate_json(out.run.final_certificate)},
                 {"concentration", concentration_json(out.conc)},
                 {"verdict",
                  {{"verdict", to_string(v.verdict)},
                   {"residual", num(v.residual)},
                   {"flags", v.flags},
                   {"reference", v.reference},
                   {"relative_gap", num(v.relative_gap)}}},
                 {"tail", tail},
                 {"final_beta", "beta"}};
  return out;
}

void task_constants(const RunConfig& cfg, RunRecord& rec) {
  const DimPair d{cfg.backend.n, cfg.backend.s};
  const int L = Params(cfg.params).integer("L", cfg.backend.truncation);
  std::vector<double> eigs;
  for (int l = 0; l <= L; ++l) eigs.push_back(sphere_gjms_eigenvalue(d, l));
  rec.payload = {{"n", d.n},
                 {"s", d.s},
                 {"K2inv", sobolev_constant_sq_inv(d)},
                 {"K2inv_gamma_form", sobolev_constant_sq_inv_gamma(d)},
                 {"b", green_constant(d)},
                 {"gamma", bubble_gamma(d)},
                 {"omega_n", sphere_volume(d.n)},
                 {"lambda1_sphere", sphere_gjms_eigenvalue(d, 0)},
                 {"sphere_eigs", num_array(eigs)}};
}

void task_eigen(const RunConfig& cfg, RunRecord& rec) {
  const Params p(cfg.params);
  const OperatorPtr op = build_operator(cfg.backend);
  if (cfg.action == "classify") {
    rec.payload = {{"k_minus", op->k_minus},
                   {"k_plus", op->k_plus},
                   {"ker_dim", op->ker_dim()},
                   {"first_eigs", num_array(first_eigenvalues(*op, p.integer("count", 10)))}};
    return;
  }
  const Weight beta = load_beta(op->manifold, p.text("beta", "const"), p.text("column", ""));
  const int kmax = p.integer("kmax", 5);
  const double pp = p.number("p", op->dims.n / (2.0 * op->dims.s));
  const GenEigenResult res = solve_pencil(op, beta, kmax);
  const double nrm = beta.norm(pp);
  json bars = json::array();
  for (int k = 1; k <= std::min(kmax, res.count()); ++k) bars.push_back(num(res.lambda(k) * nrm));
  rec.payload = {{"m_beta", res.m_beta},
                 {"rank_b", res.rank_b},
                 {"eigenvalues", num_array(std::vector<double>(
                                     res.eigenvalues.begin(),
                                     res.eigenvalues.begin() + std::min(kmax, res.count())))},
                 {"lambda_bar", bars},
                 {"p", pp},
                 {"beta_norm", nrm},
                 {"max_residual", num(res.cond.max_residual)},
                 {"orth_error", num(res.cond.orth_error)},
                 {"max_shift", res.cond.max_shift},
                 {"coupled_zeros", res.cond.coupled_zeros},
                 {"clusters", cluster_table(res, kmax)}};
  if (res.m_beta > 1)
    rec.warnings.push_back("indices below m_beta carry the -inf sentinel (arbitrarily negative test spaces)");
}

void task_variation(const RunConfig& cfg, RunRecord& rec) {
  const Params p(cfg.params);
  const OperatorPtr op = build_operator(cfg.backend);
  const std::string column = p.text("column", "");
  Weight beta = load_beta(op->manifold, p.text("beta", ""), column);
  const int k = p.integer("k", 1);
  if (cfg.action == "ddiff") {
    const Weight b = load_beta(op->manifold, p.text("dir", ""), column);
    const DirectionalDerivative dd = directional_derivative(op, beta, k, b);
    rec.payload = {{"k", k},
                   {"value", num(dd.value)},
                   {"value_max_form", num(dd.value_max_form)},
                   {"cluster", {{"i_k", dd.cluster.i_k}, {"I_k", dd.cluster.I_k}}},
                   {"pencil_spectrum", vec_json(dd.pencil_spectrum)}};
    if (p.has("t")) {
      const FiniteDifference fd = finite_difference_derivative(op, beta, k, b, p.number("t", 1e-4));
      rec.payload["finite_difference"] = {
          {"coarse", fd.coarse}, {"fine", fd.fine}, {"richardson", fd.richardson}};
    }
    return;
  }
  const double pp = p.number("p", 0.0);
  beta = normalize_weight(beta, pp);
  const ELCertificate c =
      el_certificate(op, beta, k, pp, direction_from_string(p.text("direction", "min")));
  rec.payload = certificate_json(c);
  rec.sidecars.push_back({"certificate", field_csv(*op->manifold, {"combination", "residual_field"},
                                                   {c.combination, c.residual_field})});
}

void task_optimize(const RunConfig& cfg, RunRecord& rec) {
  const OperatorPtr op = build_operator(cfg.backend);
  rec.payload = run_optimize(cfg, op, rec).payload;
}

void task_sweep(const RunConfig& cfg, RunRecord& rec) {
  const Params p(cfg.params);
  const OperatorPtr op = build_operator(cfg.backend);
  json runs = json::array();
  for (int k = p.integer("k_from", 1); k <= p.integer("k_to", 1); ++k) {
    RunConfig sub = cfg;
    sub.task = "optimize";
    sub.params.erase("k_from");
    sub.params.erase("k_to");
    sub.params["k"] = k;
    sub.seed = cfg.seed + 1000ULL * static_cast<unsigned long long>(k);
    RunRecord tmp;
    const OptimizeOutcome o = run_optimize(sub, op, tmp);
    for (const auto& w : tmp.warnings) rec.warnings.push_back("k=" + std::to_string(k) + ": " + w);
    runs.push_back({{"k", k},
                    {"seed", sub.seed},
                    {"extrapolation", o.payload["extrapolation"]["value"]},
                    {"last_lambda_bar", num(o.run.stages.back().lambda_bar)},
                    {"verdict", o.payload["verdict"]}});
  }
  rec.payload = {{"runs", runs}};
}

void task_bubbling(const RunConfig& cfg, RunRecord& rec) {
  const Params p(cfg.params);
  const std::string path = p.text("run", "");
  std::ifstream f(path);
  if (!f) throw InvalidConfig("cannot read " + path);
  json run;
  try {
    run = json::parse(f);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("malformed run record: ") + e.what());
  }
  if (!run.contains("config") || !run.contains("payload") || !run["payload"].contains("tail"))
    throw InvalidConfig("run record has no tail snapshots");
  const RunConfig rc = parse_config(run["config"]);
  const ModelPtr m = build_model(rc.backend);
  const std::string tail_csv = sidecar_path(path, "tail");
  std::vector<ScaledWeight> seq;
  for (const auto& t : run["payload"]["tail"]) {
    const json& lam = t.at("lambda");
    if (!lam.is_number()) throw InvalidConfig("tail eigenvalue is not finite");
    Eigen::VectorXd v = read_field_csv(tail_csv, t.at("column").get<std::string>());
    if (v.size() != m->node_count()) throw ModelMismatch("tail snapshot does not match the grid");
    seq.push_back({lam.get<double>(), grid_weight(m, std::move(v), Provenance::iterate)});
  }
  const ConcentrationReport r = detect_concentration(seq, rc.backend.s, p.number("delta", default_delta(*m)),
                                                     p.integer("window", 5), path);
  rec.payload = concentration_json(r);
}

InvariantTable read_table(const json& j) {
  InvariantTable t;
  try {
    if (j.contains("payload") && j.at("payload").contains("rows")) {
      const json& pl = j.at("payload");
      std::vector<InvariantEntry> higher;
      for (const auto& e : pl.at("rows"))
        if (e.at("k").get<int>() >= 3) higher.push_back({e.at("value").get<double>(), e.at("attained").get<bool>()});
      return sphere_invariant_table(DimPair{pl.at("n").get<int>(), pl.at("s").get<int>()}, higher);
    }
    t.dims = DimPair{j.at("n").get<int>(), j.at("s").get<int>()};
    t.k_plus = j.value("k_plus", 1);
    for (const auto& e : j.at("manifold")) t.manifold.push_back({e.at("value").get<double>(), e.at("attained").get<bool>()});
    for (const auto& e : j.at("sphere")) t.sphere.push_back({e.at("value").get<double>(), e.at("attained").get<bool>()});
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("invariant table schema violation: ") + e.what());
  }
  return t;
}

json partition_json(const Partition& p) { return {{"l0", p.l0}, {"sphere_parts", p.sphere_parts}}; }

void task_xk(const RunConfig& cfg, RunRecord& rec) {
  const Params p(cfg.params);
  InvariantTable table;
  if (p.flag("sphere", false)) {
    std::vector<InvariantEntry> higher;
    for (double v : p.list("higher")) higher.push_back({v, false});
    table = sphere_invariant_table(DimPair{cfg.backend.n, cfg.backend.s}, higher);
  } else {
    std::ifstream f(p.text("table", ""));
    if (!f) throw InvalidConfig("cannot read invariant table");
    try {
      table = read_table(json::parse(f));
    } catch (const json::parse_error& e) {
      throw InvalidConfig(std::string("malformed invariant table: ") + e.what());
    }
  }
  const XYResult r = compute_X_Y(table, p.integer("k", 1));
  rec.payload = {{"k", p.integer("k", 1)},
                 {"X_k", num(r.X)},
                 {"Y_k", num(r.Y)},
                 {"X_pow", num(r.X_pow)},
                 {"Y_pow", num(r.Y_pow)},
                 {"x_admissible", r.x_admissible},
                 {"x_partition", partition_json(r.x_partition)},
                 {"y_partition", partition_json(r.y_partition)}};
}

void task_bubble_sweep(const RunConfig& cfg, RunRecord& rec) {
  const Params p(cfg.params);
  const OperatorPtr op = build_operator(cfg.backend);
  const ManifoldModel& m = *op->manifold;
  const BubbleVariant variant = bubble_variant_from_string(p.text("variant", "plain"));
  const double delta = p.number("delta", 1.0);
  const Eigen::RowVectorXd center = center_from(p, m);
  const EpsWindow win = resolvable_window(m, delta);
  std::vector<GluedBubble> bubbles;
  for (double e : p.list("eps")) {
    if (!win.contains(e))
      rec.warnings.push_back("eps=" + std::to_string(e) + " lies outside the resolvable window");
    bubbles.push_back(build_glued_bubble(*op, center, e, delta, variant));
  }
  const SweepTable t = rayleigh_sweep(*op, bubbles);
  json rows = json::array();
  std::ostringstream csv;
  csv << std::setprecision(17) << "eps,I,fitted_exponent,raw_critical_mass,aliasing\n";
  for (const SweepRow& r : t.rows) {
    rows.push_back({{"eps", r.eps}, {"I", r.I}, {"raw_critical_mass", r.raw_critical_mass}, {"aliasing", r.aliasing}});
    csv << r.eps << "," << r.I << "," << t.fitted_exponent << "," << r.raw_critical_mass << ","
        << r.aliasing << "\n";
  }
  rec.sidecars.push_back({"sweep", csv.str()});
  rec.payload = {{"variant", to_string(variant)},
                 {"delta", delta},
                 {"window", {win.lo, win.hi}},
                 {"reference", sobolev_constant_sq_inv(op->dims)},
                 {"rows", rows},
                 {"limit", t.limit},
                 {"fitted_exponent", t.fitted_exponent}};
}

void task_demo(const RunConfig& cfg, RunRecord& rec) {
  const Params p(cfg.params);
  const OperatorPtr op = build_operator(cfg.backend);
  const DemoTable t = unbounded_weight_demo(op, center_from(p, *op->manifold), p.list("eps"),
                                            p.flag("use_k_minus", false));
  json rows = json::array();
  for (const DemoRow& r : t.rows)
    rows.push_back({{"eps", r.eps},
                    {"lambda", num(r.lambda)},
                    {"norm", r.norm},
                    {"lambda_bar", num(r.lambda_bar)},
                    {"resolvable", r.resolvable}});
  rec.payload = {{"k", t.k},
                 {"rows", rows},
                 {"strictly_monotone", t.strictly_monotone},
                 {"resolvable_rows", t.resolvable_rows}};
  if (t.resolvable_rows < static_cast<int>(t.rows.size()))
    rec.warnings.push_back("some eps values are below the grid resolution");
}

}  // namespace

RunRecord sphere_table(const BackendSpec& backend, int k_max, const EstimateOptions& opt) {
  if (backend.kind != ManifoldKind::sphere || backend.axial)
    throw InvalidConfig("sphere_table needs the full sphere backend");
  if (k_max < 2) throw InvalidConfig("k_max must be >= 2");
  const DimPair d{backend.n, backend.s};
  require_admissible(d);
  RunRecord rec;
  const double l1 = sobolev_constant_sq_inv(d);
  json rows = json::array();
  rows.push_back({{"k", 1}, {"value", l1}, {"attained", true}, {"source", "exact"}});
  rows.push_back({{"k", 2},
                  {"value", std::pow(2.0, 2.0 * d.s / d.n) * l1},
                  {"attained", false},
                  {"source", "exact"}});
  std::vector<double> col{l1, std::pow(2.0, 2.0 * d.s / d.n) * l1};
  if (k_max >= 3) {
    const OperatorPtr op = build_operator(backend);
    for (int k = 3; k <= k_max; ++k) {
      const InvariantEstimate e = estimate_sphere_invariant(op, k, opt);
      rows.push_back({{"k", k},
                      {"value", e.value},
                      {"last_stage", e.last_stage},
                      {"residual", num(e.residual)},
                      {"converged", e.converged},
                      {"bubbling_flags", e.flags},
                      {"delta", e.delta},
                      {"attained", e.flags == 0 && e.converged},
                      {"source", "numerical"}});
      col.push_back(e.value);
      if (!e.converged)
        rec.warnings.push_back("k=" + std::to_string(k) + " estimate is resolution-limited (stage cap reached)");
    }
  }
  bool increasing = true;
  for (size_t i = 1; i < col.size(); ++i) increasing = increasing && col[i] > col[i - 1];
  rec.payload = {{"n", d.n}, {"s", d.s}, {"rows", rows}, {"strictly_increasing", increasing}};
  try {
    const KnBound kb = kn_upper_bound(d);
    rec.payload["kn_bound"] = {{"value", kb.value}, {"raw", kb.raw}, {"asymptotic_cap", kb.asymptotic_cap}};
  } catch (const DomainError& e) {
    rec.warnings.push_back(std::string("k_n analysis skipped: ") + e.what());
  }
  if (d.s == 1 && d.n >= 7) {
    const double a0 = gamma_bound_root(d.n);
    rec.payload["gamma_certificate"] = {
        {"alpha0", a0}, {"F_alpha0", gamma_bound_F(d.n, a0)}, {"lower_bound", 1.0 - 4.0 / d.n}};
  }
  return rec;
}

RunRecord dispatch(const RunConfig& cfg) {
  validate_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  if (cfg.task == "constants") task_constants(cfg, rec);
  else if (cfg.task == "eigen") task_eigen(cfg, rec);
  else if (cfg.task == "variation") task_variation(cfg, rec);
  else if (cfg.task == "optimize") task_optimize(cfg, rec);
  else if (cfg.task == "sweep") task_sweep(cfg, rec);
  else if (cfg.task == "bubbling") task_bubbling(cfg, rec);
  else if (cfg.task == "xk") task_xk(cfg, rec);
  else if (cfg.task == "bubble-sweep") task_bubble_sweep(cfg, rec);
  else if (cfg.task == "demo-unbounded") task_demo(cfg, rec);
  else if (cfg.task == "sphere-table") {
    const Params p(cfg.params);
    EstimateOptions opt;
    opt.iters = p.integer("iters", opt.iters);
    opt.bump_width = p.number("bump_width", opt.bump_width);
    opt.seed = cfg.seed;
    rec = sphere_table(cfg.backend, p.integer("k_max", 4), opt);
  }
  rec.config = to_json(cfg);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace confspec
