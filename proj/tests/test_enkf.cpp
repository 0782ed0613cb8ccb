#include <doctest.h>

#include <cmath>

#include "l96/enkf.hpp"
#include "l96/regression.hpp"

using namespace l96;

namespace {

EnsembleState scalar_ensemble(std::vector<double> values, std::uint64_t seed) {
  EnsembleState e = make_ensemble(Eigen::VectorXd::Zero(1), static_cast<int>(values.size()), 0.0, seed);
  for (std::size_t i = 0; i < values.size(); ++i) e.members(i, 0) = values[i];
  return e;
}

ObservationModel scalar_obs(double r) {
  return {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Constant(1, 1, r), 1};
}

}  // namespace

TEST_CASE("ensemble covariance of two members") {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 2, 3;
  CHECK(ensemble_mean(m) == Eigen::Vector2d(1, 2));
  const Eigen::MatrixXd C = ensemble_covariance(m);
  CHECK(C(0, 0) == 2.0);
  CHECK(C(0, 1) == 2.0);
  CHECK(C(1, 1) == 2.0);
}

TEST_CASE("scalar gain is c / (c + r)") {
  EnsembleState e = scalar_ensemble({0.0, 2.0}, 1);
  const AnalysisResult a = analysis(e, Eigen::VectorXd::Constant(1, 1.0), scalar_obs(0.5));
  CHECK(a.gain(0, 0) == doctest::Approx(2.0 / 2.5));
  CHECK(a.S(0, 0) == doctest::Approx(2.5));
}

TEST_CASE("identical members are left untouched") {
  EnsembleState e = make_ensemble(Eigen::Vector3d(1, 2, 3), 5, 0.0, 3);
  const Eigen::MatrixXd before = e.members;
  const AnalysisResult a = analysis(e, Eigen::Vector3d(9, 9, 9), ObservationModel::identity(3, 1.0, 1));
  CHECK(a.gain.isZero());
  CHECK(e.members == before);
}

TEST_CASE("gain limits and the covariance identity") {
  Rng rng(4);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd H(2, 4);
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = n(rng);
  EnsembleState base = make_ensemble(Eigen::VectorXd::Zero(4), 30, 1.0, 5);
  const Eigen::MatrixXd C = ensemble_covariance(base.members);

  EnsembleState e1 = base;
  const ObservationModel obs{H, 0.3 * Eigen::MatrixXd::Identity(2, 2), 1};
  const AnalysisResult a = analysis(e1, Eigen::Vector2d(0.5, -0.5), obs);
  const Eigen::MatrixXd S = H * C * H.transpose() + obs.Gamma;
  const Eigen::MatrixXd expected = C * H.transpose() * S.inverse();
  CHECK((a.gain - expected).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd lhs = (Eigen::MatrixXd::Identity(4, 4) - a.gain * H) * C;
  const Eigen::MatrixXd rhs = C - C * H.transpose() * S.inverse() * H * C;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);

  EnsembleState e2 = base;
  const AnalysisResult loose = analysis(e2, Eigen::Vector2d(0, 0), {H, 1e12 * Eigen::MatrixXd::Identity(2, 2), 1});
  CHECK(loose.gain.cwiseAbs().maxCoeff() < 1e-10);

  EnsembleState e3 = base;
  const AnalysisResult tight = analysis(e3, Eigen::VectorXd::Zero(4), ObservationModel::identity(4, 1e-12, 1));
  CHECK((tight.gain - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::Vector4d y(1, 2, 3, 4);
  EnsembleState e4 = base;
  analysis(e4, y, ObservationModel::identity(4, 1e-12, 1));
  CHECK((ensemble_mean(e4.members) - y).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("member order does not matter") {
  EnsembleState a = make_ensemble(Eigen::Vector2d(1, -1), 6, 0.5, 7);
  EnsembleState b = a;
  for (int i = 0; i < 3; ++i) {
    b.members.row(i).swap(b.members.row(5 - i));
    std::swap(b.streams[i], b.streams[5 - i]);
  }
  const auto obs = ObservationModel::identity(2, 0.1, 1);
  analysis(a, Eigen::Vector2d(0, 0), obs);
  analysis(b, Eigen::Vector2d(0, 0), obs);
  for (int i = 0; i < 6; ++i) CHECK((a.members.row(i) - b.members.row(5 - i)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analysis mean matches the Kalman update on average") {
  EnsembleState e = make_ensemble(Eigen::Vector2d(0, 0), 20000, 1.0, 8);
  const Eigen::Vector2d m0 = ensemble_mean(e.members);
  const auto obs = ObservationModel::identity(2, 0.5, 1);
  const Eigen::Vector2d y(2, -1);
  const AnalysisResult a = analysis(e, y, obs);
  const Eigen::Vector2d expect = m0 + a.gain * (y - m0);
  CHECK((ensemble_mean(e.members) - expect).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("gaussian forecast noise has the requested covariance") {
  EnsembleState e = make_ensemble(Eigen::Vector3d(1, 1, 1), 20000, 0.0, 9);
  const MapPropagator ident([](Eigen::VectorXd&, Rng&) {});
  const ForecastResult f = forecast(e, ident, 3, NoiseSpec::gaussian(0.04 * Eigen::MatrixXd::Identity(3, 3)));
  CHECK((f.cov - 0.04 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.003);
  CHECK(f.mean_path.rows() == 3);
  CHECK_THROWS_AS(NoiseSpec::gaussian(-Eigen::MatrixXd::Identity(3, 3)).validate(3), ConfigError);
}

TEST_CASE("forecast reports the member that blew up") {
  EnsembleState e = make_ensemble(Eigen::Vector2d(1, 1), 4, 0.1, 10);
  e.members(2, 0) = 1e7;
  const MapPropagator grow([](Eigen::VectorXd& x, Rng&) { x *= 100.0; });
  try {
    forecast(e, grow, 1, NoiseSpec::none());
    FAIL("expected NumericalError");
  } catch (const NumericalError& err) {
    CHECK(std::string(err.what()).find("member 2") != std::string::npos);
  }
}

TEST_CASE("parallel forecast equals serial") {
  ModelParams p;
  p.K = 8;
  ReducedModel m{p, WilksModel{{0.0, -0.4, 0.0, 0.0, 0.0}}.closure(), {make_ar_model(0.9, 0.1)}};
  const ReducedPropagator prop(m);
  EnsembleState a = make_ensemble(Eigen::VectorXd::Constant(8, 2.0), 16, 0.5, 11);
  EnsembleState b = a;
  const auto fa = forecast(a, prop, 20, NoiseSpec::none(), Exec::serial);
  const auto fb = forecast(b, prop, 20, NoiseSpec::none(), Exec::parallel);
  CHECK(a.members == b.members);
  CHECK(a.residuals == b.residuals);
  CHECK(fa.mean_path == fb.mean_path);
}

TEST_CASE("observation schedule") {
  Trajectory t;
  t.states = Eigen::MatrixXd::Zero(401, 3);
  for (int i = 0; i <= 400; ++i) t.times.push_back(i * 0.01);
  Rng rng(1);
  const Observations o = generate_observations(t, ObservationModel::identity(3, 1.0, 20), rng);
  CHECK(o.steps.size() == 20);
  CHECK(o.steps.front() == 20);
  CHECK(o.steps.back() == 400);
  CHECK(o.times[0] == doctest::Approx(0.2));
  t.states = Eigen::MatrixXd::Zero(400, 3);
  CHECK_THROWS_AS(generate_observations(t, ObservationModel::identity(3, 1.0, 20), rng), ConfigError);
  ObservationModel bad = ObservationModel::identity(3, 1.0, 20);
  bad.Gamma(0, 1) = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(ObservationModel::identity(3, 0.0, 20).validate(), ConfigError);
}

TEST_CASE("scalar random walk tracks the exact Kalman filter") {
  const double q = 0.5, r = 1.0;
  const int N = 10000, cycles = 50;
  std::normal_distribution<double> n(0, 1);
  Rng truth_rng(12);
  EnsembleState e = make_ensemble(Eigen::VectorXd::Zero(1), N, 1.0, 13);
  const MapPropagator walk([q](Eigen::VectorXd& x, Rng& rng) { x[0] += std::sqrt(q) * standard_normal(rng); });
  double m = ensemble_mean(e.members)[0], P = ensemble_covariance(e.members)(0, 0);
  double x = 0.0;
  for (int t = 0; t < cycles; ++t) {
    x += std::sqrt(q) * n(truth_rng);
    const double y = x + std::sqrt(r) * n(truth_rng);
    forecast(e, walk, 1, NoiseSpec::none());
    P += q;
    analysis(e, Eigen::VectorXd::Constant(1, y), scalar_obs(r));
    const double g = P / (P + r);
    m += g * (y - m);
    P *= 1 - g;
  }
  CHECK(ensemble_covariance(e.members)(0, 0) == doctest::Approx(P).epsilon(0.03));
  CHECK(std::abs(ensemble_mean(e.members)[0] - m) < 0.03 * std::sqrt(P) + 0.03);
}

TEST_CASE("assimilation beats the free run") {
  ModelParams p;
  p.K = 12;
  ReducedModel m{p, WilksModel{{0.0, -0.45, 0.0, 0.004, -0.0003}}.closure(), {}};
  Rng rng(14);
  ReducedState s{Eigen::VectorXd::Zero(12), {}};
  for (auto& v : s.X) v = 3.0 * standard_normal(rng);
  // spin-up, then a 2-time-unit truth window
  const Trajectory spin = simulate_reduced(m, s, 0, 10, rng);
  s.X = spin.states.bottomRows(1).transpose();
  const Trajectory truth = simulate_reduced(m, s, 0, 2, rng);
  AssimilationConfig cfg;
  cfg.members = 20;
  cfg.initial_spread = 1.0;
  cfg.obs = ObservationModel::identity(12, 0.01, 20);
  cfg.noise = NoiseSpec::gaussian(0.01 * Eigen::MatrixXd::Identity(12, 12));
  cfg.seed = 15;
  const AssimilationResult with = run_assimilation(truth, m, cfg);
  cfg.assimilate = false;
  const AssimilationResult without = run_assimilation(truth, m, cfg);
  CHECK(with.observations.steps.size() == 10);
  CHECK(with.l1_error.size() == truth.size());
  CHECK(with.mspe < 0.5 * without.mspe);
  CHECK(with.mspe < 0.05);
}
