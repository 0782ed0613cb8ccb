#include <doctest.h>

#include <cmath>

#include "l96/dynamics.hpp"

using namespace l96;

namespace {

VectorXd random_vector(int n, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Term-by-term expansion of dX_k for K = 5 with explicit neighbour indices.
VectorXd slow_by_hand_k5(const VectorXd& x, double F) {
  VectorXd d(5);
  d[0] = -x[4] * (x[3] - x[1]) - x[0] + F;
  d[1] = -x[0] * (x[4] - x[2]) - x[1] + F;
  d[2] = -x[1] * (x[0] - x[3]) - x[2] + F;
  d[3] = -x[2] * (x[1] - x[4]) - x[3] + F;
  d[4] = -x[3] * (x[2] - x[0]) - x[4] + F;
  return d;
}

// Fast tendency written with explicit (j, k) indices and the cyclic rules.
double fast_by_hand(const FullState& s, const ModelParams& p, int j, int k) {
  auto Z = [&](int jj, int kk) {
    while (jj >= p.J) jj -= p.J, kk += 1;
    while (jj < 0) jj += p.J, kk -= 1;
    kk = ((kk % p.K) + p.K) % p.K;
    return s.Z[kk * p.J + jj];
  };
  return -p.c * p.b * Z(j + 1, k) * (Z(j + 2, k) - Z(j - 1, k)) - p.c * Z(j, k) + p.h * p.c / p.b * s.X[k];
}

}  // namespace

TEST_CASE("full_rhs at rest gives pure forcing") {
  ModelParams p;
  FullState s{VectorXd::Zero(p.K), VectorXd::Zero(p.fast_dim())};
  const FullState d = full_rhs(s, p);
  CHECK((d.X.array() == p.F).all());
  CHECK((d.Z.array() == 0.0).all());
}

TEST_CASE("symmetric slow state cancels advection") {
  ModelParams p;
  p.K = 4;
  p.J = 3;
  FullState s{VectorXd::Ones(4), VectorXd::Zero(p.fast_dim())};
  const FullState d = full_rhs(s, p);
  for (int k = 0; k < 4; ++k) CHECK(d.X[k] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("slow tendency matches hand expansion for K = 5") {
  Rng rng(7);
  ModelParams p;
  p.K = 5;
  p.J = 2;
  const VectorXd x = random_vector(5, rng, 5.0);
  FullState s{x, VectorXd::Zero(p.fast_dim())};
  const VectorXd expected = slow_by_hand_k5(x, p.F);
  const FullState d = full_rhs(s, p);
  for (int k = 0; k < 5; ++k) CHECK(d.X[k] == doctest::Approx(expected[k]).epsilon(1e-14));
}

TEST_CASE("fast tendency follows the cyclic subsector rules") {
  Rng rng(11);
  ModelParams p;
  p.K = 6;
  p.J = 4;
  FullState s{random_vector(p.K, rng, 5.0), random_vector(p.fast_dim(), rng, 0.5)};
  const FullState d = full_rhs(s, p);
  for (int k = 0; k < p.K; ++k)
    for (int j = 0; j < p.J; ++j) CHECK(d.Z[k * p.J + j] == doctest::Approx(fast_by_hand(s, p, j, k)).epsilon(1e-13));
}

TEST_CASE("coupling forcing examples") {
  ModelParams p;
  CHECK(coupling_forcing(VectorXd::Zero(p.fast_dim()), p).isZero());
  const VectorXd U = coupling_forcing(VectorXd::Ones(p.fast_dim()), p);
  for (int k = 0; k < p.K; ++k) CHECK(U[k] == doctest::Approx(-10.0));
  ModelParams q;
  q.K = 4;
  q.J = 2;
  VectorXd z = VectorXd::Zero(8);
  z[0] = 0.5;
  z[1] = -0.5;
  CHECK(coupling_forcing(z, q)[0] == 0.0);
}

TEST_CASE("advection term conserves the quadratic energy") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd x = random_vector(40, rng, 10.0);
    VectorXd g(40);
    slow_tendency(x, 0.0, g);
    const VectorXd advection = g + x;  // remove the -X_k term
    CHECK(std::abs(x.dot(advection)) < 1e-10 * std::max(1.0, x.squaredNorm() * x.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("full_rhs is equivariant under a cyclic sector shift") {
  Rng rng(5);
  ModelParams p;
  p.K = 8;
  p.J = 5;
  FullState s{random_vector(p.K, rng, 5.0), random_vector(p.fast_dim(), rng, 0.5)};
  auto rotate = [&](const FullState& a) {
    FullState r{VectorXd(p.K), VectorXd(p.fast_dim())};
    for (int k = 0; k < p.K; ++k) r.X[(k + 1) % p.K] = a.X[k];
    for (int n = 0; n < p.fast_dim(); ++n) r.Z[(n + p.J) % p.fast_dim()] = a.Z[n];
    return r;
  };
  const FullState a = full_rhs(rotate(s), p);
  const FullState b = rotate(full_rhs(s, p));
  CHECK((a.X - b.X).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.Z - b.Z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reduced model with the true coupling reproduces the slow tendency") {
  Rng rng(9);
  ModelParams p;
  FullState s{random_vector(p.K, rng, 5.0), random_vector(p.fast_dim(), rng, 0.5)};
  const VectorXd U = coupling_forcing(s.Z, p);
  FunctionParameterization oracle([&](const Eigen::Ref<const VectorXd>&, Eigen::Ref<VectorXd> out) { out = U; });
  const VectorXd reduced = reduced_rhs(ReducedState{s.X, VectorXd::Zero(p.K)}, p, oracle);
  CHECK((reduced - full_rhs(s, p).X).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reduced_rhs special cases") {
  ModelParams p;
  ZeroParameterization zero;
  const VectorXd d = reduced_rhs(ReducedState{VectorXd::Zero(p.K), VectorXd::Zero(p.K)}, p, zero);
  CHECK((d.array() == p.F).all());
  SharedPolynomial wilks({-0.03779, -0.47362, 0.005197, 0.004882, -0.0003142});
  CHECK(wilks(1.0) == doctest::Approx(-0.5016452).epsilon(1e-12));
  FunctionParameterization bad([](const Eigen::Ref<const VectorXd>&, Eigen::Ref<VectorXd> out) {
    out.setConstant(std::numeric_limits<double>::quiet_NaN());
  });
  CHECK_THROWS_AS(reduced_rhs(ReducedState{VectorXd::Zero(p.K), VectorXd::Zero(p.K)}, p, bad), NumericalError);
}

TEST_CASE("rk4 on linear ODEs") {
  VectorField lin = [](const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out) { out = x; };
  VectorField none = [](const Eigen::Ref<const VectorXd>&, Eigen::Ref<VectorXd> out) { out.setZero(); };
  VectorXd x0(1);
  x0[0] = 1.0;
  CHECK(rk4_step(none, x0, 0.01)[0] == 1.0);
  CHECK(rk4_step(lin, x0, 0.01)[0] == doctest::Approx(1.0100501670833333).epsilon(1e-15));

  auto error_at_one = [&](int n) {
    VectorXd x = x0;
    for (int i = 0; i < n; ++i) x = rk4_step(lin, x, 1.0 / n);
    return std::abs(x[0] - std::exp(1.0));
  };
  const double ratio = error_at_one(20) / error_at_one(40);
  CHECK(ratio == doctest::Approx(16.0).epsilon(1.0 / 16.0));
  const double order = std::log2(error_at_one(40) / error_at_one(80));
  CHECK(order == doctest::Approx(4.0).epsilon(0.1 / 4.0));
}

TEST_CASE("rk4 rejects non-finite stages") {
  VectorField blow = [](const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out) { out = x.array() / 0.0; };
  VectorXd x0 = VectorXd::Ones(2);
  CHECK_THROWS_AS(rk4_step(blow, x0, 0.1), NumericalError);
}

TEST_CASE("simulate records and is deterministic") {
  ModelParams p;
  Rng rng(1);
  const FullState s = random_initial_state(p, rng);
  const Trajectory t0 = simulate(s, p, 0.0, 0.0);
  CHECK(t0.size() == 1);
  CHECK(t0.states.row(0).transpose() == s.packed());
  const Trajectory a = simulate(s, p, 0.0, 1.0);
  const Trajectory b = simulate(s, p, 0.0, 1.0);
  CHECK(a.size() == 101);
  CHECK(a.states == b.states);
  CHECK(a.times.back() == doctest::Approx(1.0));
  SimulateOptions opt;
  opt.record_every = 10;
  const Trajectory c = simulate(s, p, 0.0, 1.0, opt);
  CHECK(c.size() == 11);
  CHECK(c.states.row(10) == a.states.row(100));
}

TEST_CASE("simulate reports blow-up time") {
  ModelParams p;
  p.K = 4;
  p.J = 1;
  p.F = 1e9;
  FullState s{VectorXd::Ones(4), VectorXd::Zero(4)};
  s.X[0] = 2.0;
  try {
    simulate(s, p, 0.0, 1.0);
    FAIL("expected blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.time() >= 0.0);
    CHECK(e.time() < 1.0);
  }
}

TEST_CASE("parameter validation") {
  ModelParams p;
  p.K = 3;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.b = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  FullState s{VectorXd::Zero(3), VectorXd::Zero(3)};
  CHECK_THROWS_AS(full_rhs(s, ModelParams{}), ConfigError);
}

TEST_CASE("reduced integrator holds the AR residual over a step") {
  ModelParams p;
  p.K = 4;
  ReducedModel det{p, std::make_shared<ZeroParameterization>(), {}};
  ReducedModel sto{p, std::make_shared<ZeroParameterization>(), {make_ar_model(0.5, 0.0)}};
  Rng r1(1), r2(1);
  ReducedState a{VectorXd::LinSpaced(4, 1, 4), VectorXd::Zero(4)};
  ReducedState b = a;
  ReducedIntegrator ia(det), ib(sto);
  for (int i = 0; i < 50; ++i) {
    ia.step(a, r1);
    ib.step(b, r2);
  }
  // sigma = 0 and e(t0) = 0: the stochastic model is the deterministic one.
  CHECK(a.X == b.X);
  CHECK(b.e.isZero());
}
