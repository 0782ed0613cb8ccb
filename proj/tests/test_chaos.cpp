#include <doctest.h>

#include <cmath>

#include "l96/chaos.hpp"

using namespace l96;

namespace {

Eigen::MatrixXd fd_jacobian(const Eigen::VectorXd& X, double F) {
  const Eigen::Index K = X.size();
  Eigen::MatrixXd J(K, K);
  const double h = 1e-6;
  Eigen::VectorXd gp(K), gm(K);
  for (Eigen::Index m = 0; m < K; ++m) {
    Eigen::VectorXd xp = X, xm = X;
    xp[m] += h;
    xm[m] -= h;
    slow_tendency(xp, F, gp);
    slow_tendency(xm, F, gm);
    J.col(m) = (gp - gm) / (2 * h);
  }
  return J;
}

}  // namespace

TEST_CASE("slow Jacobian") {
  ModelParams p;
  p.K = 5;
  CHECK(slow_jacobian(Eigen::VectorXd::Zero(5), p).isApprox(-Eigen::MatrixXd::Identity(5, 5)));
  Rng rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  Eigen::VectorXd X(5);
  for (auto& v : X) v = u(rng);
  const Eigen::MatrixXd J = slow_jacobian(X, p);
  const Eigen::MatrixXd Jfd = fd_jacobian(X, p.F);
  CHECK((J - Jfd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, J.cwiseAbs().maxCoeff()));
  for (int k = 0; k < 5; ++k) CHECK((J.row(k).array() != 0.0).count() == 4);
}

TEST_CASE("matrix-free Jacobian product agrees with the dense Jacobian") {
  ModelParams p;
  Rng rng(4);
  std::normal_distribution<double> n(0, 3);
  Eigen::VectorXd X(p.K);
  for (auto& v : X) v = n(rng);
  RowMatrixXd V(p.K, 7), out;
  for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = n(rng);
  slow_jacobian_apply(X, V, out);
  CHECK((out - slow_jacobian(X, p) * V).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modified Gram-Schmidt gives an orthonormal basis with positive R") {
  Rng rng(8);
  std::normal_distribution<double> n(0, 1);
  RowMatrixXd V(10, 10);
  for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = n(rng);
  const RowMatrixXd A = V;
  const Eigen::VectorXd r = modified_gram_schmidt(V);
  CHECK((V.transpose() * V - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.array() > 0).all());
  // |det A| = prod R_ii
  CHECK(std::abs(A.determinant()) == doctest::Approx(r.prod()).epsilon(1e-10));
  RowMatrixXd Z = RowMatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(modified_gram_schmidt(Z), NumericalError);
}

TEST_CASE("diagonal linear system has its rates as exponents") {
  const Eigen::Vector3d a(0.5, -0.25, -1.0);
  TangentSystem sys;
  sys.rhs = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out = a.cwiseProduct(x); };
  sys.tangent = [&](const Eigen::VectorXd&, const RowMatrixXd& V, RowMatrixXd& out) { out = a.asDiagonal() * V; };
  LyapunovConfig cfg;
  cfg.spinup = 0.0;
  cfg.total_time = 20.0;
  const LyapunovResult r = lyapunov_spectrum(sys, Eigen::Vector3d(1e-3, 1e-3, 1e-3), cfg);
  REQUIRE(r.exponents.size() == 3);
  CHECK(r.exponents[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.exponents[1] == doctest::Approx(-0.25).epsilon(1e-6));
  CHECK(r.exponents[2] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(r.history.rows() == 100);
}

TEST_CASE("slow Lorenz-96 spectrum sums to the flow divergence") {
  ModelParams p;
  p.h = 0.0;
  LyapunovConfig cfg;
  cfg.spinup = 50.0;
  cfg.total_time = 150.0;
  Rng rng(1);
  const LyapunovResult r = lyapunov_spectrum(p, cfg, rng);
  CHECK(r.exponents.sum() == doctest::Approx(-p.K).epsilon(0.02));
  CHECK(r.exponents[0] > 1.5);
  for (Eigen::Index i = 1; i < r.exponents.size(); ++i) CHECK(r.exponents[i] <= r.exponents[i - 1]);
}

TEST_CASE("Kaplan-Yorke, KS entropy and doubling time") {
  CHECK(kaplan_yorke(Eigen::Vector2d(1, -2)).dimension == doctest::Approx(1.5));
  CHECK(kaplan_yorke(Eigen::Vector2d(1, -2)).r == 1);
  CHECK(kaplan_yorke(Eigen::Vector2d(-1, -2)).dimension == 0.0);
  const KaplanYorke sat = kaplan_yorke(Eigen::Vector2d(2, 1));
  CHECK(sat.saturated);
  CHECK(sat.dimension == 2.0);
  CHECK_THROWS_AS(kaplan_yorke(Eigen::Vector2d(-1, 1)), ConfigError);
  CHECK_THROWS_AS(kaplan_yorke(Eigen::VectorXd()), ConfigError);
  CHECK(ks_entropy(Eigen::Vector3d(2, 0.5, -1)) == doctest::Approx(2.5));
  CHECK(ks_entropy(Eigen::Vector2d(-1, -2)) == 0.0);
  CHECK(error_doubling_time(std::log(2.0)) == doctest::Approx(1.0));
  CHECK(error_doubling_time(2 * std::log(2.0)) == doctest::Approx(0.5));
  CHECK(error_doubling_time(2.3098) == doctest::Approx(0.3001).epsilon(1e-3));
  CHECK_THROWS_AS(error_doubling_time(0.0), ConfigError);
  const SpectrumClasses c = classify_spectrum(Eigen::Vector4d(1.0, 0.005, -0.005, -1.0));
  CHECK(c.positive == 1);
  CHECK(c.neutral == 2);
  CHECK(c.negative == 1);
}

TEST_CASE("Lyapunov config validation") {
  LyapunovConfig cfg;
  cfg.renorm_interval = 0.015;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.total_time = cfg.spinup;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
