#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "l96/ar.hpp"
#include "l96/errors.hpp"
#include "l96/parallel.hpp"
#include "l96/rng.hpp"

namespace l96 {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Two-scale Lorenz-96 parameters.
struct ModelParams {
  int K = 40;        // sectors (slow variables)
  int J = 10;        // subsectors per sector
  double F = 10.0;   // forcing
  double h = 1.0;    // coupling strength
  double c = 10.0;   // fast time-scale ratio
  double b = 10.0;   // fast amplitude ratio
  double dt = 0.01;  // integration step

  // Throws ConfigError naming the offending field.
  void validate() const;
  int fast_dim() const { return J * K; }
  int full_dim() const { return K + J * K; }
  double coupling() const { return h * c / b; }
};

// Slow block X (length K) and fast block Z (length J*K). Z is flattened
// sector-major: Z_{j,k} lives at index k*J + j (zero-based j, k), so the
// cyclic rule Z_{j+J,k} = Z_{j,k+1} is plain wrap-around of the flat index.
struct FullState {
  VectorXd X;
  VectorXd Z;

  VectorXd packed() const;
  static FullState unpack(const VectorXd& packed, const ModelParams& p);
};

struct ReducedState {
  VectorXd X;
  VectorXd e;  // AR residual per component; zero for deterministic runs
};

// Recorded states at uniform spacing. `states` has one row per time.
struct Trajectory {
  std::vector<double> times;
  MatrixXd states;

  Eigen::Index size() const { return states.rows(); }
  // Columns [0, K): the slow block.
  MatrixXd slow(int K) const { return states.leftCols(K); }
};

// ---- vector fields -------------------------------------------------------

// G_k(X) = -X_{k-1}(X_{k-2} - X_{k+1}) - X_k + F
void slow_tendency(const Eigen::Ref<const VectorXd>& X, double F, Eigen::Ref<VectorXd> out);

// U_k = -(h c / b) sum_j Z_{j,k}
VectorXd coupling_forcing(const Eigen::Ref<const VectorXd>& Z, const ModelParams& p);

// d/dt of the packed state [X; Z].
void full_rhs(const Eigen::Ref<const VectorXd>& state, const ModelParams& p,
              Eigen::Ref<VectorXd> out, Exec exec = Exec::serial);
FullState full_rhs(const FullState& s, const ModelParams& p, Exec exec = Exec::serial);

// f_k(X): closure for the unresolved forcing.
class Parameterization {
 public:
  virtual ~Parameterization() = default;
  virtual void evaluate(const Eigen::Ref<const VectorXd>& X, Eigen::Ref<VectorXd> out) const = 0;
};

class ZeroParameterization final : public Parameterization {
 public:
  void evaluate(const Eigen::Ref<const VectorXd>&, Eigen::Ref<VectorXd> out) const override {
    out.setZero();
  }
};

// f_k = P(X_k) with one polynomial shared by every component.
// coefficients[d] multiplies X_k^d.
class SharedPolynomial final : public Parameterization {
 public:
  explicit SharedPolynomial(std::vector<double> coefficients);
  void evaluate(const Eigen::Ref<const VectorXd>& X, Eigen::Ref<VectorXd> out) const override;
  double operator()(double x) const;
  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  std::vector<double> coefficients_;
};

class FunctionParameterization final : public Parameterization {
 public:
  using Fn = std::function<void(const Eigen::Ref<const VectorXd>&, Eigen::Ref<VectorXd>)>;
  explicit FunctionParameterization(Fn fn) : fn_(std::move(fn)) {}
  void evaluate(const Eigen::Ref<const VectorXd>& X, Eigen::Ref<VectorXd> out) const override {
    fn_(X, out);
  }

 private:
  Fn fn_;
};

// dX_k = G_k(X) + f_k(X) + e_k. Throws NumericalError if f is non-finite.
void reduced_rhs(const ReducedState& s, const ModelParams& p, const Parameterization& closure,
                 Eigen::Ref<VectorXd> out);
VectorXd reduced_rhs(const ReducedState& s, const ModelParams& p, const Parameterization& closure);

// ---- integration ---------------------------------------------------------

using VectorField = std::function<void(const Eigen::Ref<const VectorXd>&, Eigen::Ref<VectorXd>)>;

// Classical four-stage Runge-Kutta with reusable stage buffers.
class Rk4 {
 public:
  explicit Rk4(Eigen::Index n = 0) { resize(n); }
  void resize(Eigen::Index n);

  // Advances x in place. Throws NumericalError if any stage is non-finite.
  template <class Rhs>
  void step(Rhs&& rhs, VectorXd& x, double dt);

 private:
  VectorXd k1_, k2_, k3_, k4_, tmp_;
};

VectorXd rk4_step(const VectorField& rhs, const VectorXd& x, double dt);

struct SimulateOptions {
  int record_every = 1;
  double overflow_guard = 1e8;
  Exec exec = Exec::serial;
};

// Number of dt steps between t0 and t1 (rounded to the nearest integer).
long steps_between(double t0, double t1, double dt);

// Integrates the full two-scale model. Records the initial state and every
// `record_every` steps after it. Throws BlowUpError past the overflow guard.
Trajectory simulate(const FullState& initial, const ModelParams& p, double t0, double t1,
                    const SimulateOptions& opt = {});

// Reduced model: slow dynamics plus a closure and optional AR residual forcing.
// `residual` is empty (deterministic), one shared model, or one per component.
struct ReducedModel {
  ModelParams params;
  std::shared_ptr<const Parameterization> closure;
  std::vector<ARModel> residual;

  bool stochastic() const { return !residual.empty(); }
};

// Steps the reduced model. The residual e is held fixed over each dt step and
// then advanced once by its AR recursion.
class ReducedIntegrator {
 public:
  explicit ReducedIntegrator(const ReducedModel& model);
  void step(ReducedState& s, Rng& rng);
  void advance(ReducedState& s, long steps, Rng& rng) {
    for (long i = 0; i < steps; ++i) step(s, rng);
  }

 private:
  const ReducedModel& model_;
  Rk4 rk_;
  ReducedState stage_;
};

// Records the slow block only.
Trajectory simulate_reduced(const ReducedModel& model, const ReducedState& initial, double t0,
                            double t1, Rng& rng, const SimulateOptions& opt = {});

// X ~ U(-1, 1), Z ~ U(-0.1, 0.1); if every X_k is equal, X_0 += F / 10.
FullState random_initial_state(const ModelParams& p, Rng& rng);

// ---- template implementation ----------------------------------------------

namespace detail {
[[noreturn]] void throw_nonfinite_stage(int stage);
}

template <class Rhs>
void Rk4::step(Rhs&& rhs, VectorXd& x, double dt) {
  if (k1_.size() != x.size()) resize(x.size());
  rhs(x, k1_);
  if (!k1_.allFinite()) detail::throw_nonfinite_stage(1);
  tmp_ = x + (0.5 * dt) * k1_;
  rhs(tmp_, k2_);
  if (!k2_.allFinite()) detail::throw_nonfinite_stage(2);
  tmp_ = x + (0.5 * dt) * k2_;
  rhs(tmp_, k3_);
  if (!k3_.allFinite()) detail::throw_nonfinite_stage(3);
  tmp_ = x + dt * k3_;
  rhs(tmp_, k4_);
  if (!k4_.allFinite()) detail::throw_nonfinite_stage(4);
  x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
}

}  // namespace l96
