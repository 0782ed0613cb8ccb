#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>

#include "l96/dynamics.hpp"

namespace l96 {

// P(x) = a0 + a1 x + a2 x^2 + a3 x^3 + a4 x^4, shared by every component.
struct WilksModel {
  std::array<double, 5> a{};
  double train_t0 = 0.0, train_t1 = 0.0;
  double condition = 0.0;  // of the scaled design

  std::shared_ptr<SharedPolynomial> closure() const;
};

double eval_poly(const WilksModel& m, double x);

// Least squares over the pooled pairs (X_k(t_i), U_k(t_i)). The Vandermonde
// columns are scaled by their max-abs value and solved by Householder QR.
// Throws NumericalError when the scaled design's condition number exceeds
// max_condition (e.g. constant X data).
WilksModel fit_wilks(const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& U_train,
                     double max_condition = 1e12);

// U - P(X), elementwise; same layout as the inputs.
Eigen::MatrixXd wilks_residuals(const WilksModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U);

}  // namespace l96
