#include "l96/regression.hpp"

#include <cmath>

#include "l96/errors.hpp"

namespace l96 {

std::shared_ptr<SharedPolynomial> WilksModel::closure() const {
  return std::make_shared<SharedPolynomial>(std::vector<double>(a.begin(), a.end()));
}

double eval_poly(const WilksModel& m, double x) {
  double acc = 0.0;
  for (int d = 4; d >= 0; --d) acc = acc * x + m.a[d];
  return acc;
}

WilksModel fit_wilks(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U, double max_condition) {
  require(X.rows() == U.rows() && X.cols() == U.cols(), "fit_wilks: X and U shapes differ");
  require(X.size() >= 5, "fit_wilks: need at least five samples");
  require(X.allFinite() && U.allFinite(), "fit_wilks: non-finite data");

  const Eigen::Index n = X.size();
  const Eigen::Map<const Eigen::VectorXd> x(X.data(), n);
  const Eigen::Map<const Eigen::VectorXd> u(U.data(), n);
  Eigen::MatrixXd V(n, 5);
  V.col(0).setOnes();
  for (int d = 1; d < 5; ++d) V.col(d) = V.col(d - 1).cwiseProduct(x);
  Eigen::VectorXd scale(5);
  for (int d = 0; d < 5; ++d) {
    scale[d] = V.col(d).cwiseAbs().maxCoeff();
    if (scale[d] == 0.0) throw NumericalError("fit_wilks: rank-deficient design (zero column)");
    V.col(d) /= scale[d];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(5).triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  const auto sv = svd.singularValues();
  const double cond = sv[4] > 0.0 ? sv[0] / sv[4] : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition))
    throw NumericalError("fit_wilks: rank-deficient design (condition " + std::to_string(cond) + ")");
  const Eigen::VectorXd coef = qr.solve(u);

  WilksModel m;
  m.condition = cond;
  for (int d = 0; d < 5; ++d) m.a[d] = coef[d] / scale[d];
  return m;
}

Eigen::MatrixXd wilks_residuals(const WilksModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) {
  require(X.rows() == U.rows() && X.cols() == U.cols(), "wilks_residuals: shape mismatch");
  return U - X.unaryExpr([&](double v) { return eval_poly(m, v); });
}

}  // namespace l96
