#include "l96/dynamics.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace l96 {

void ModelParams::validate() const {
  require(K >= 4, "K must be >= 4 (advection stencil needs 3 distinct neighbours)");
  require(J >= 1, "J must be >= 1");
  require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
  require(std::isfinite(c) && c > 0.0, "c must be positive");
  require(std::isfinite(b) && b != 0.0, "b must be non-zero");
  require(std::isfinite(F) && std::isfinite(h), "F and h must be finite");
}

VectorXd FullState::packed() const {
  VectorXd out(X.size() + Z.size());
  out << X, Z;
  return out;
}

FullState FullState::unpack(const VectorXd& packed, const ModelParams& p) {
  require(packed.size() == p.full_dim(), "packed state has wrong length");
  return {packed.head(p.K), packed.tail(p.fast_dim())};
}

void slow_tendency(const Eigen::Ref<const VectorXd>& X, double F, Eigen::Ref<VectorXd> out) {
  const Eigen::Index K = X.size();
  for (Eigen::Index k = 0; k < K; ++k) {
    const double xm2 = X[(k + K - 2) % K];
    const double xm1 = X[(k + K - 1) % K];
    const double xp1 = X[(k + 1) % K];
    out[k] = -xm1 * (xm2 - xp1) - X[k] + F;
  }
}

VectorXd coupling_forcing(const Eigen::Ref<const VectorXd>& Z, const ModelParams& p) {
  require(Z.size() == p.fast_dim(), "coupling_forcing: Z has wrong length");
  VectorXd U(p.K);
  const double scale = -p.coupling();
  for (int k = 0; k < p.K; ++k) U[k] = scale * Z.segment(k * p.J, p.J).sum();
  return U;
}

namespace {

inline double slow_component(const double* x, const double* z, const ModelParams& p, int k) {
  const int K = p.K;
  double fast = 0.0;
  for (int j = 0; j < p.J; ++j) fast += z[k * p.J + j];
  return -x[(k + K - 1) % K] * (x[(k + K - 2) % K] - x[(k + 1) % K]) - x[k] + p.F -
         p.coupling() * fast;
}

inline double fast_component(const double* x, const double* z, const ModelParams& p, int n) {
  const int N = p.fast_dim();
  const double cb = p.c * p.b;
  return -cb * z[(n + 1) % N] * (z[(n + 2) % N] - z[(n + N - 1) % N]) - p.c * z[n] +
         p.coupling() * x[n / p.J];
}

}  // namespace

void full_rhs(const Eigen::Ref<const VectorXd>& state, const ModelParams& p,
              Eigen::Ref<VectorXd> out, Exec exec) {
  if (state.size() != p.full_dim() || out.size() != p.full_dim())
    throw ConfigError("full_rhs: state length does not match K + J*K");
  const double* x = state.data();
  const double* z = state.data() + p.K;
  double* dx = out.data();
  double* dz = out.data() + p.K;
  const int K = p.K;
  const int N = p.fast_dim();
  if (exec == Exec::parallel) {
#pragma omp parallel
    {
#pragma omp for nowait
      for (int k = 0; k < K; ++k) dx[k] = slow_component(x, z, p, k);
#pragma omp for
      for (int n = 0; n < N; ++n) dz[n] = fast_component(x, z, p, n);
    }
  } else {
    for (int k = 0; k < K; ++k) dx[k] = slow_component(x, z, p, k);
    for (int n = 0; n < N; ++n) dz[n] = fast_component(x, z, p, n);
  }
}

FullState full_rhs(const FullState& s, const ModelParams& p, Exec exec) {
  if (s.X.size() != p.K || s.Z.size() != p.fast_dim())
    throw ConfigError("full_rhs: state dimensions do not match parameters");
  VectorXd out(p.full_dim());
  full_rhs(s.packed(), p, out, exec);
  return FullState::unpack(out, p);
}

SharedPolynomial::SharedPolynomial(std::vector<double> coefficients)
    : coefficients_(std::move(coefficients)) {}

double SharedPolynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

void SharedPolynomial::evaluate(const Eigen::Ref<const VectorXd>& X,
                                Eigen::Ref<VectorXd> out) const {
  for (Eigen::Index k = 0; k < X.size(); ++k) out[k] = (*this)(X[k]);
}

void reduced_rhs(const ReducedState& s, const ModelParams& p, const Parameterization& closure,
                 Eigen::Ref<VectorXd> out) {
  if (s.X.size() != p.K || out.size() != p.K)
    throw ConfigError("reduced_rhs: state length does not match K");
  slow_tendency(s.X, p.F, out);
  VectorXd f(p.K);
  closure.evaluate(s.X, f);
  if (!f.allFinite()) throw NumericalError("reduced_rhs: parameterization returned non-finite value");
  out += f;
  if (s.e.size() == p.K) out += s.e;
}

VectorXd reduced_rhs(const ReducedState& s, const ModelParams& p, const Parameterization& closure) {
  VectorXd out(p.K);
  reduced_rhs(s, p, closure, out);
  return out;
}

namespace detail {
void throw_nonfinite_stage(int stage) {
  throw NumericalError("rk4: non-finite value in stage " + std::to_string(stage));
}
}  // namespace detail

void Rk4::resize(Eigen::Index n) {
  k1_.resize(n);
  k2_.resize(n);
  k3_.resize(n);
  k4_.resize(n);
  tmp_.resize(n);
}

VectorXd rk4_step(const VectorField& rhs, const VectorXd& x, double dt) {
  if (!(dt > 0.0)) throw ConfigError("rk4_step: dt must be positive");
  Rk4 rk(x.size());
  VectorXd out = x;
  rk.step(rhs, out, dt);
  return out;
}

long steps_between(double t0, double t1, double dt) {
  return std::lround((t1 - t0) / dt);
}

namespace {

bool out_of_bounds(const VectorXd& x, double guard) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(std::abs(x[i]) <= guard)) return true;
  return false;
}

[[noreturn]] void blow_up(double t_valid) {
  std::ostringstream os;
  os.precision(10);
  os << "trajectory blew up; last valid time " << t_valid;
  throw BlowUpError(os.str(), t_valid);
}

Trajectory allocate(long steps, int record_every, Eigen::Index dim) {
  Trajectory traj;
  const long rows = steps / record_every + 1;
  traj.times.reserve(rows);
  traj.states.resize(rows, dim);
  return traj;
}

}  // namespace

Trajectory simulate(const FullState& initial, const ModelParams& p, double t0, double t1,
                    const SimulateOptions& opt) {
  p.validate();
  require(t1 >= t0, "simulate: t1 must not precede t0");
  require(opt.record_every >= 1, "simulate: record_every must be >= 1");
  require(initial.X.size() == p.K && initial.Z.size() == p.fast_dim(),
          "simulate: initial state does not match parameters");

  const long steps = steps_between(t0, t1, p.dt);
  Trajectory traj = allocate(steps, opt.record_every, p.full_dim());
  VectorXd x = initial.packed();
  Rk4 rk(x.size());
  auto rhs = [&](const Eigen::Ref<const VectorXd>& s, Eigen::Ref<VectorXd> d) {
    full_rhs(s, p, d, opt.exec);
  };

  Eigen::Index row = 0;
  traj.times.push_back(t0);
  traj.states.row(row++) = x.transpose();
  for (long i = 1; i <= steps; ++i) {
    const double t_prev = t0 + (i - 1) * p.dt;
    try {
      rk.step(rhs, x, p.dt);
    } catch (const NumericalError&) {
      blow_up(t_prev);
    }
    if (out_of_bounds(x, opt.overflow_guard)) blow_up(t_prev);
    if (i % opt.record_every == 0) {
      traj.times.push_back(t0 + i * p.dt);
      traj.states.row(row++) = x.transpose();
    }
  }
  return traj;
}

ReducedIntegrator::ReducedIntegrator(const ReducedModel& model) : model_(model) {
  model_.params.validate();
  require(model_.closure != nullptr, "reduced model needs a closure");
  require(model_.residual.empty() || model_.residual.size() == 1 ||
              static_cast<int>(model_.residual.size()) == model_.params.K,
          "reduced model residual must be empty, shared, or per component");
  rk_.resize(model_.params.K);
  stage_.X.resize(model_.params.K);
}

void ReducedIntegrator::step(ReducedState& s, Rng& rng) {
  const ModelParams& p = model_.params;
  if (s.e.size() != p.K) s.e = VectorXd::Zero(p.K);
  stage_.e = s.e;
  auto rhs = [&](const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> d) {
    stage_.X = x;
    reduced_rhs(stage_, p, *model_.closure, d);
  };
  rk_.step(rhs, s.X, p.dt);
  if (!model_.stochastic()) return;
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool shared = model_.residual.size() == 1;
  for (int k = 0; k < p.K; ++k) {
    const ARModel& ar = shared ? model_.residual.front() : model_.residual[k];
    s.e[k] = ar.phi * s.e[k] + ar.sigma * normal(rng);
  }
}

Trajectory simulate_reduced(const ReducedModel& model, const ReducedState& initial, double t0,
                            double t1, Rng& rng, const SimulateOptions& opt) {
  const ModelParams& p = model.params;
  require(t1 >= t0, "simulate_reduced: t1 must not precede t0");
  require(opt.record_every >= 1, "simulate_reduced: record_every must be >= 1");
  require(initial.X.size() == p.K, "simulate_reduced: initial state does not match K");

  ReducedIntegrator integ(model);
  ReducedState s = initial;
  if (s.e.size() != p.K) s.e = VectorXd::Zero(p.K);
  const long steps = steps_between(t0, t1, p.dt);
  Trajectory traj = allocate(steps, opt.record_every, p.K);
  Eigen::Index row = 0;
  traj.times.push_back(t0);
  traj.states.row(row++) = s.X.transpose();
  for (long i = 1; i <= steps; ++i) {
    const double t_prev = t0 + (i - 1) * p.dt;
    try {
      integ.step(s, rng);
    } catch (const NumericalError&) {
      blow_up(t_prev);
    }
    if (out_of_bounds(s.X, opt.overflow_guard)) blow_up(t_prev);
    if (i % opt.record_every == 0) {
      traj.times.push_back(t0 + i * p.dt);
      traj.states.row(row++) = s.X.transpose();
    }
  }
  return traj;
}

FullState random_initial_state(const ModelParams& p, Rng& rng) {
  p.validate();
  std::uniform_real_distribution<double> slow(-1.0, 1.0);
  std::uniform_real_distribution<double> fast(-0.1, 0.1);
  FullState s{VectorXd(p.K), VectorXd(p.fast_dim())};
  for (int k = 0; k < p.K; ++k) s.X[k] = slow(rng);
  for (int n = 0; n < p.fast_dim(); ++n) s.Z[n] = fast(rng);
  if ((s.X.array() == s.X[0]).all()) s.X[0] += p.F / 10.0;
  return s;
}

}  // namespace l96
