#include "l96/ar.hpp"

#include <cmath>
#include <limits>

#include "l96/errors.hpp"

namespace l96 {

ARModel make_ar_model(double phi, double sigma) {
  ARModel m;
  m.phi = phi;
  m.sigma = sigma;
  m.stationary = std::abs(phi) < 1.0;
  m.sigma_e = m.stationary ? sigma / std::sqrt(1.0 - phi * phi)
                           : std::numeric_limits<double>::quiet_NaN();
  return m;
}

double ar1_cost(const Eigen::MatrixXd& e, double phi) {
  const Eigen::Index I = e.rows();
  if (I < 2) return 0.0;
  return (e.bottomRows(I - 1) - phi * e.topRows(I - 1)).squaredNorm();
}

ARModel fit_ar1(const Eigen::MatrixXd& e) {
  const Eigen::Index I = e.rows();
  const Eigen::Index K = e.cols();
  require(I >= 2, "fit_ar1: need at least two time samples");
  require(K >= 1, "fit_ar1: need at least one component");
  const auto lagged = e.topRows(I - 1);
  const auto current = e.bottomRows(I - 1);
  const double denom = lagged.squaredNorm();
  if (denom == 0.0) throw NumericalError("fit_ar1: all lagged residuals are zero");
  const double phi = lagged.cwiseProduct(current).sum() / denom;
  const double dof = static_cast<double>(K * (I - 1) - 1);
  require(dof > 0.0, "fit_ar1: not enough samples for the degrees of freedom");
  const double cost = (current - phi * lagged).squaredNorm();
  return make_ar_model(phi, std::sqrt(cost / dof));
}

std::vector<ARModel> fit_ar1_per_component(const Eigen::MatrixXd& e) {
  std::vector<ARModel> out;
  out.reserve(e.cols());
  for (Eigen::Index k = 0; k < e.cols(); ++k) out.push_back(fit_ar1(e.col(k)));
  return out;
}

Eigen::VectorXd simulate_ar1(const ARModel& model, int n_steps, Rng& rng, double e0) {
  require(n_steps >= 0, "simulate_ar1: n_steps must be non-negative");
  require(model.stationary, "simulate_ar1: model is not stationary");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd out(n_steps);
  double e = e0;
  for (int i = 0; i < n_steps; ++i) {
    e = model.phi * e + model.sigma * normal(rng);
    out[i] = e;
  }
  return out;
}

}  // namespace l96
