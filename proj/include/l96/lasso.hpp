#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace l96 {

// Objective ||y - Theta s||_2^2 + lambda ||s||_1 (no 1/2 on the quadratic), so
// each coordinate update soft-thresholds at lambda / 2.
struct LassoOptions {
  // Converged when every coordinate change, measured as |delta s_j| sqrt(G_jj)
  // relative to ||y||, drops below tol.
  double tol = 1e-13;
  long max_sweeps = 1'000'000;
  // Once active-set sweeps change less than this, try an exact solve on the
  // current support and signs; it is accepted as converged when the KKT
  // violation is below polish_kkt * lambda.
  double polish_threshold = 1e-2;
  double polish_kkt = 1e-9;
  bool record_objective = false;
};

struct LassoSolution {
  Eigen::VectorXd coefficients;
  double objective = 0.0;
  long iterations = 0;  // full or active-set sweeps
  double max_kkt_violation = 0.0;
  bool converged = false;
  std::vector<double> objective_history;  // one entry per sweep when recorded
};

// Quadratic data of the objective: yy - 2 c's + s'Gs, with G = Theta'Theta,
// c = Theta'y, yy = y'y.
struct GramSystem {
  Eigen::MatrixXd G;
  Eigen::VectorXd c;
  double yy = 0.0;
};

double soft_threshold(double z, double gamma);

// 2 max_j |c_j|: smallest lambda with the all-zero solution.
double lambda_max(const Eigen::Ref<const Eigen::VectorXd>& c);

// Cyclic coordinate descent in covariance form with active-set passes.
LassoSolution lasso_gram(const GramSystem& sys, double lambda, const LassoOptions& opt = {},
                         const Eigen::VectorXd* warm_start = nullptr);

LassoSolution lasso(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& y, double lambda,
                    const LassoOptions& opt = {});

double lasso_objective(const GramSystem& sys, const Eigen::VectorXd& s, double lambda);

// Largest deviation from the subgradient optimality conditions of the
// objective, using g = 2 (c - G s):
//   s_j != 0: |g_j - lambda sign(s_j)|;  s_j = 0: max(|g_j| - lambda, 0).
double kkt_violation(const GramSystem& sys, const Eigen::VectorXd& s, double lambda);

// `count` log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, int count = 50, double ratio = 1e-4);

// Running sums over a block of samples for one design and several targets:
// sufficient to form centred Gram systems and held-out errors exactly.
struct SufficientStats {
  Eigen::MatrixXd xx;  // sum theta theta'
  Eigen::VectorXd x;   // sum theta
  Eigen::MatrixXd xy;  // sum theta y'  (p x q)
  Eigen::VectorXd y;   // sum y
  Eigen::VectorXd yy;  // sum y^2 per target
  double n = 0.0;

  static SufficientStats from_data(const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& Y);
  SufficientStats& operator+=(const SufficientStats& o);
  SufficientStats& operator-=(const SufficientStats& o);
  Eigen::Index features() const { return xx.rows(); }
  Eigen::Index targets() const { return xy.cols(); }
};

// Gram system for target t. With `intercept`, the data are centred so the
// intercept stays out of the penalty.
GramSystem gram_system(const SufficientStats& s, Eigen::Index target, bool intercept);

// Intercept that pairs with coefficients fitted on the centred system.
double intercept_for(const SufficientStats& s, Eigen::Index target, const Eigen::VectorXd& coef);

// Sum of squared errors of (intercept, coef) on the samples summarised by s.
double sse(const SufficientStats& s, Eigen::Index target, double intercept,
           const Eigen::VectorXd& coef);

struct CvResult {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_error;  // per grid value, mean held-out MSE over folds
  int folds_used = 0;
  std::vector<std::string> warnings;
};

// Contiguous-block K-fold CV. `blocks` are per-fold statistics in time order.
// Picks the lambda with minimum mean held-out error; exact ties go to the
// larger lambda. Folds whose training target is constant are skipped.
CvResult cross_validate_lambda(const std::vector<SufficientStats>& blocks, Eigen::Index target,
                               const std::vector<double>& grid, bool intercept,
                               const LassoOptions& opt = {});

// Convenience form over raw data; y is split into `folds` contiguous blocks.
CvResult cross_validate_lambda(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& y,
                               const std::vector<double>& grid, int folds, bool intercept = false,
                               const LassoOptions& opt = {});

// Splits rows into `folds` contiguous blocks and accumulates statistics.
std::vector<SufficientStats> block_stats(const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& Y,
                                         int folds);

}  // namespace l96
