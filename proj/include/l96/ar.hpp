#pragma once

#include <Eigen/Dense>
#include <vector>

#include "l96/rng.hpp"

namespace l96 {

// First-order autoregressive residual process e(t_i) = phi e(t_{i-1}) + sigma z_i.
struct ARModel {
  double phi = 0.0;
  double sigma = 0.0;    // innovation std
  double sigma_e = 0.0;  // stationary process std, sigma / sqrt(1 - phi^2)
  bool stationary = true;
};

// Builds a model from (phi, sigma), deriving sigma_e. Non-stationary models
// (|phi| >= 1) keep sigma_e = NaN and stationary = false.
ARModel make_ar_model(double phi, double sigma);

// Pooled least-squares fit over all components. `residuals` is I x K: one row
// per time t_i, one column per component k.
//   phi     = sum e_k(t_i) e_k(t_{i-1}) / sum e_k(t_{i-1})^2
//   sigma^2 = C(phi) / (K (I - 1) - 1)
// Throws ConfigError when I < 2 and NumericalError when every lagged residual
// is zero.
ARModel fit_ar1(const Eigen::MatrixXd& residuals);

// One independent fit per column.
std::vector<ARModel> fit_ar1_per_component(const Eigen::MatrixXd& residuals);

// Least-squares cost C(phi) summed over components.
double ar1_cost(const Eigen::MatrixXd& residuals, double phi);

// Returns e(t_1), ..., e(t_n) starting from e(t_0) = e0.
Eigen::VectorXd simulate_ar1(const ARModel& model, int n_steps, Rng& rng, double e0 = 0.0);

}  // namespace l96
