#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "confspec/discretization.hpp"
#include "confspec/operator.hpp"
#include "confspec/optimizer.hpp"

namespace confspec {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "confspec 0.1.0";

struct BackendSpec {
  ManifoldKind kind = ManifoldKind::sphere;
  int n = 3;
  int s = 1;
  int truncation = 8;
  double quad_density = 2.0;
  bool axial = false;
  double c = 0.0;
};

// task: constants | eigen | variation | optimize | sweep | bubbling | xk | bubble-sweep |
// demo-unbounded | sphere-table. action selects the eigen (classify|solve) and variation
// (ddiff|certify) forms.
struct RunConfig {
  std::string task;
  std::string action;
  BackendSpec backend;
  json params = json::object();
  std::string out;
  unsigned long long seed = 1;
};

RunConfig parse_config(const json& j);
json to_json(const RunConfig& cfg);
// Schema and range checks; throws InvalidConfig.
void validate_config(const RunConfig& cfg);

struct Sidecar {
  std::string name;  // appended to the record stem: run.json -> run.<name>.csv
  std::string csv;
};

struct RunRecord {
  json config;
  std::string version = kVersion;
  double seconds = 0.0;
  json payload = json::object();
  std::vector<std::string> warnings;
  std::vector<Sidecar> sidecars;

  json to_json() const;
};

ModelPtr build_model(const BackendSpec& b);
OperatorPtr build_operator(const BackendSpec& b);

RunRecord dispatch(const RunConfig& cfg);

// Writes the JSON record to `path` and each sidecar next to it.
void write_record(const RunRecord& rec, const std::string& path);
std::string sidecar_path(const std::string& record_path, const std::string& name);

// Sphere invariant table: Λ₁ exact, Λ₂ = 2^{2s/n}Λ₁, estimates for 3 ≤ k ≤ k_max on the
// given full sphere backend, the k_n bound and the α₀ certificate.
RunRecord sphere_table(const BackendSpec& backend, int k_max, const EstimateOptions& opt = {});

// Field CSV: node, coordinates, quadrature weight, then one column per field.
std::string field_csv(const ManifoldModel& m, const std::vector<std::string>& names,
                      const std::vector<Eigen::VectorXd>& columns);
// Reads the named column (or the last one when name is empty).
Eigen::VectorXd read_field_csv(const std::string& path, const std::string& name = "");

OptimizerConfig optimizer_config_from(const RunConfig& cfg, const OperatorModel& op);

}  // namespace confspec
