#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "confspec/errors.hpp"
#include "confspec/records.hpp"

using namespace confspec;

namespace {

json optimize_config(unsigned long long seed) {
  return json::parse(R"({"task": "optimize",
    "backend": {"kind": "torus", "n": 2, "s": 1, "truncation": 3, "quad_density": 1.0, "c": -0.5},
    "params": {"k": 1, "direction": "max", "p_schedule": [2.0, 1.5], "iters": 200},
    "seed": )" + std::to_string(seed) + "}");
}

std::filesystem::path scratch_dir() {
  const auto d = std::filesystem::temp_directory_path() / "confspec_records_test";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Records, ConfigRoundTrip) {
  const RunConfig a = parse_config(optimize_config(7));
  const RunConfig b = parse_config(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.backend.kind, ManifoldKind::torus);
  EXPECT_EQ(b.backend.c, -0.5);
  EXPECT_EQ(b.seed, 7u);
}

TEST(Records, SameSeedSamePayload) {
  const RunRecord a = dispatch(parse_config(optimize_config(3)));
  const RunRecord b = dispatch(parse_config(optimize_config(3)));
  EXPECT_EQ(a.payload.dump(), b.payload.dump());
  EXPECT_EQ(a.config, b.config);
  const RunRecord c = dispatch(parse_config(optimize_config(4)));
  EXPECT_NE(a.payload.dump(), c.payload.dump());
}

TEST(Records, InvalidConfigsAreRejected) {
  const std::vector<std::string> bad{
      R"({"task": "nope"})",
      R"({"task": "constants", "extra": 1})",
      R"({"task": "constants", "backend": {"n": 2, "s": 1}})",
      R"({"task": "constants", "backend": {"kind": "sphere", "c": 0.5}})",
      R"({"task": "constants", "backend": {"kind": "torus", "axial": true}})",
      R"({"task": "constants", "params": {"L": -1}})",
      R"({"task": "eigen", "action": "explode"})",
      R"({"task": "eigen", "action": "classify", "params": {"kmax": 3}})",
      R"({"task": "optimize", "params": {"k": 1}})",
      R"({"task": "optimize", "params": {"p_schedule": [2.0, 1.6], "theta": 2}})",
      R"({"task": "bubble-sweep", "params": {"eps": [0.1, -0.2]}})",
      R"({"task": "xk", "params": {"k": 2}})",
      R"({"task": "sphere-table", "backend": {"axial": true}})",
      R"({"task": "constants", "seed": -3})",
      R"({"task": "constants", "backend": {"n": "three"}})",
  };
  for (const auto& s : bad) {
    EXPECT_THROW(validate_config(parse_config(json::parse(s))), InvalidConfig) << s;
    try {
      validate_config(parse_config(json::parse(s)));
    } catch (const Error& e) {
      EXPECT_EQ(e.exit_code(), 2) << s;
    }
  }
  EXPECT_NO_THROW(validate_config(parse_config(json::parse(R"({"task": "constants"})"))));
}

TEST(Records, FieldCsvRoundTrip) {
  auto m = build_model(BackendSpec{ManifoldKind::torus, 2, 1, 3, 1.0, false, 0.0});
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(m->node_count(), -1.0, 1.0 / 3.0);
  const Eigen::VectorXd b = a.array().exp();
  const auto path = scratch_dir() / "field.csv";
  std::ofstream(path) << field_csv(*m, {"a", "b"}, {a, b});
  EXPECT_EQ(read_field_csv(path.string(), "a"), a);
  EXPECT_EQ(read_field_csv(path.string()), b);
  EXPECT_THROW(read_field_csv(path.string(), "missing"), InvalidConfig);
  EXPECT_THROW(field_csv(*m, {"a"}, {Eigen::VectorXd::Zero(3)}), ModelMismatch);
}

TEST(Records, WriteRecordWithSidecars) {
  const RunRecord r = dispatch(parse_config(optimize_config(1)));
  const auto path = (scratch_dir() / "run.json").string();
  write_record(r, path);
  EXPECT_EQ(sidecar_path(path, "beta"), (scratch_dir() / "run.beta.csv").string());
  std::ifstream f(path);
  const json j = json::parse(f);
  EXPECT_EQ(j.at("payload"), r.payload);
  EXPECT_EQ(j.at("sidecars").at("tail"), "run.tail.csv");
  EXPECT_EQ(j.at("version"), kVersion);
  const Eigen::VectorXd beta = read_field_csv(sidecar_path(path, "beta"));
  EXPECT_EQ(beta.size(), build_model(parse_config(optimize_config(1)).backend)->node_count());
}

TEST(Records, ConstantsPayload) {
  const RunRecord r = dispatch(parse_config(json::parse(R"({"task": "constants", "params": {"L": 2}})")));
  EXPECT_NEAR(r.payload.at("b").get<double>(), 0.25 / 3.141592653589793, 1e-15);
  EXPECT_EQ(r.payload.at("gamma").get<double>(), 3.0);
  EXPECT_EQ(r.payload.at("sphere_eigs").size(), 3u);
  EXPECT_NEAR(r.payload.at("lambda1_sphere").get<double>(), 0.75, 1e-15);
}

TEST(Records, XkReadsSphereTableRecord) {
  const RunRecord t = sphere_table({ManifoldKind::sphere, 3, 1, 2, 1.0, false}, 2);
  const auto path = (scratch_dir() / "table.json").string();
  write_record(t, path);
  json cfg = json::parse(R"({"task": "xk", "params": {"k": 2}})");
  cfg["params"]["table"] = path;
  const RunRecord r = dispatch(parse_config(cfg));
  const RunRecord s = dispatch(parse_config(json::parse(R"({"task": "xk", "params": {"k": 2, "sphere": true}})")));
  EXPECT_EQ(r.payload.at("X_k"), s.payload.at("X_k"));
  EXPECT_EQ(r.payload.at("Y_k"), s.payload.at("Y_k"));
}
