#pragma once

#include <Eigen/Dense>
#include <functional>

#include "l96/dynamics.hpp"

namespace l96 {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LyapunovConfig {
  double spinup = 500.0;          // time integrated before tangent accumulation starts
  double renorm_interval = 0.2;   // tau between re-orthonormalizations
  double total_time = 1500.0;     // absolute end time; accumulation spans total - spinup
  double dt = 0.01;
  Exec exec = Exec::serial;       // tangent-vector propagation

  void validate() const;
  long steps_per_renorm() const;
};

struct LyapunovResult {
  Eigen::VectorXd exponents;  // sorted descending
  // One row per re-orthonormalization: [time, running estimates...] in
  // Gram-Schmidt column order (unsorted).
  Eigen::MatrixXd history;
  int dimension = 0;
};

// Jacobian of G(X) = -X_{k-1}(X_{k-2} - X_{k+1}) - X_k + F (slow system, h = 0).
Eigen::MatrixXd slow_jacobian(const Eigen::Ref<const Eigen::VectorXd>& X, const ModelParams& p);

// out = J(X) V without forming J; V and out are K x d, one tangent vector per column.
void slow_jacobian_apply(const Eigen::Ref<const Eigen::VectorXd>& X, const RowMatrixXd& V,
                         RowMatrixXd& out, Exec exec = Exec::serial);

// A flow with its variational equation: state rhs and tangent product J(x) V.
struct TangentSystem {
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> rhs;
  std::function<void(const Eigen::VectorXd&, const RowMatrixXd&, RowMatrixXd&)> tangent;
};

// Modified Gram-Schmidt on the columns of V, in place. Returns the diagonal of
// R (all positive). Throws NumericalError on a zero-norm column.
Eigen::VectorXd modified_gram_schmidt(RowMatrixXd& V);

// Integrates state and an identity-initialised tangent basis with RK4 (the
// Jacobian is evaluated at each stage's state), re-orthonormalising every
// renorm_interval and accumulating log R_ii.
LyapunovResult lyapunov_spectrum(const TangentSystem& system, Eigen::VectorXd x0,
                                 const LyapunovConfig& cfg);

// Slow Lorenz-96 system (coupling ignored) from a random initial state.
LyapunovResult lyapunov_spectrum(const ModelParams& p, const LyapunovConfig& cfg, Rng& rng);

struct KaplanYorke {
  double dimension = 0.0;
  int r = 0;
  bool saturated = false;  // every partial sum positive; dimension = d
};

// Throws ConfigError on empty or unsorted input.
KaplanYorke kaplan_yorke(const Eigen::Ref<const Eigen::VectorXd>& sorted_exponents);

// Pesin: sum of strictly positive exponents.
double ks_entropy(const Eigen::Ref<const Eigen::VectorXd>& exponents);

// ln 2 / lambda1; throws ConfigError for lambda1 <= 0.
double error_doubling_time(double lambda1);

struct SpectrumClasses {
  int positive = 0;
  int neutral = 0;
  int negative = 0;
};

// Neutral band is [-band, band]; positive/negative are outside it.
SpectrumClasses classify_spectrum(const Eigen::Ref<const Eigen::VectorXd>& exponents,
                                  double band = 1e-2);

}  // namespace l96
