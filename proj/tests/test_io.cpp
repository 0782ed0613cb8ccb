#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "l96/experiment.hpp"
#include "l96/io.hpp"

using namespace l96;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "l96_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string error_of(const json& j) {
  try {
    experiment_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("doubles survive formatting") {
  for (double v : {0.1, 1.0 / 3.0, -2.973427, 1e-300, 6.02214076e23})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv round trip") {
  Eigen::MatrixXd m(2, 3);
  m << 0.1, 1.0 / 3.0, -7, 1e-17, 2, 3;
  const std::string path = temp_path("t.csv");
  write_csv(path, {"a", "b", "c"}, m);
  const CsvTable t = read_csv(path);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.data == m);
  CHECK(t.column("c") == 2);
  CHECK(t.column("z") == -1);
  CHECK_THROWS(read_csv(temp_path("missing.csv")));
}

TEST_CASE("trajectory csv round trip") {
  Trajectory tr;
  tr.times = {0.0, 0.01};
  tr.states = Eigen::MatrixXd::Random(2, 6);
  const std::string path = temp_path("traj.csv");
  write_trajectory_csv(path, tr, 6);
  const Trajectory back = read_trajectory_csv(path);
  CHECK(back.times == tr.times);
  CHECK(back.states == tr.states);
}

TEST_CASE("model parameters from json") {
  const ModelParams p = params_from_json(json{{"K", 8}, {"F", 8.0}});
  CHECK(p.K == 8);
  CHECK(p.F == 8.0);
  CHECK(p.J == 10);
  const ModelParams q = params_from_json(to_json(p));
  CHECK(q.K == p.K);
  CHECK(q.dt == p.dt);
  CHECK_THROWS_WITH_AS(params_from_json(json{{"Q", 1}}), "model.Q: unknown field", ConfigError);
  CHECK_THROWS_WITH_AS(params_from_json(json{{"K", "x"}}), "model.K: wrong type", ConfigError);
  CHECK_THROWS_AS(params_from_json(json{{"K", 3}}), ConfigError);
  CHECK_THROWS_AS(params_from_json(json{{"dt", 0.0}}), ConfigError);
  CHECK_THROWS_AS(params_from_json(json{{"b", 0.0}}), ConfigError);
}

TEST_CASE("experiment config round trip and validation") {
  ExperimentConfig c;
  c.seed = 7;
  c.methods = {"wilks", "cs-avg-bias"};
  const ExperimentConfig back = experiment_config_from_json(to_json(c));
  CHECK(back.seed == 7);
  CHECK(back.methods == c.methods);
  CHECK(back.obs_variance == c.obs_variance);
  CHECK(to_json(back).dump() == to_json(c).dump());

  CHECK(error_of(json{{"bogus", 1}}).find("bogus") != std::string::npos);
  CHECK(error_of(json{{"cv_folds", 1}}).rfind("cv_folds", 0) == 0);
  CHECK(error_of(json{{"horizon", -1.0}}).rfind("horizon", 0) == 0);
  CHECK(error_of(json{{"methods", json::array({"wilks", "magic"})}}).find("magic") != std::string::npos);
  CHECK(error_of(json{{"seed", "abc"}}).rfind("seed", 0) == 0);
  CHECK(error_of(json{{"enkf_every", 30}}).rfind("enkf_every", 0) == 0);
  CHECK(error_of(json{{"train_t1", 400.0}}).rfind("train_t1", 0) == 0);
  CHECK(error_of(json{{"lyapunov", json{{"tau", 1}}}}).find("lyapunov.tau") != std::string::npos);
  CHECK(error_of(json::array()) != "");
}

TEST_CASE("named stage seeds are distinct and stable") {
  ExperimentConfig c;
  CHECK(stage_seed(c, "truth") == stage_seed(c, "truth"));
  CHECK(stage_seed(c, "truth") != stage_seed(c, "enkf"));
  ExperimentConfig d;
  d.seed = 2021;
  CHECK(stage_seed(c, "truth") != stage_seed(d, "truth"));
}

TEST_CASE("closure from json") {
  WilksModel w{{0.0, -0.5, 0.0, 0.0, 0.0}};
  const auto f = closure_from_json(to_json(w));
  Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 2.0), out(4);
  f->evaluate(x, out);
  CHECK(out[0] == -1.0);
  CHECK_THROWS_AS(closure_from_json(json{{"kind", "other"}}), ConfigError);
}

TEST_CASE("lyapunov summary") {
  LyapunovResult r;
  r.exponents = Eigen::Vector3d(1.0, 0.0, -2.0);
  const json s = lyapunov_summary(r);
  CHECK(s["lambda1"].get<double>() == 1.0);
  CHECK(s["n_positive"].get<int>() == 1);
  CHECK(s["n_neutral"].get<int>() == 1);
  CHECK(s["d_ky"].get<double>() == doctest::Approx(2.5));
  CHECK(s["h_ks"].get<double>() == 1.0);
}
