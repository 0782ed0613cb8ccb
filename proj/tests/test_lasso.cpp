#include <doctest.h>

#include <cmath>

#include "l96/errors.hpp"
#include "l96/lasso.hpp"
#include "l96/rng.hpp"

using namespace l96;

namespace {

Eigen::MatrixXd gaussian(int m, int n, Rng& rng) {
  std::normal_distribution<double> d(0, 1);
  Eigen::MatrixXd A(m, n);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = d(rng);
  return A;
}

GramSystem gram(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
  return {A.transpose() * A, A.transpose() * y, y.squaredNorm()};
}

}  // namespace

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(3.0, 0.5) == 2.5);
  CHECK(soft_threshold(-3.0, 0.5) == -2.5);
  CHECK(soft_threshold(0.4, 0.5) == 0.0);
}

TEST_CASE("orthonormal design thresholds at lambda / 2") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  const LassoSolution s = lasso(I, Eigen::Vector2d(3.0, 0.4), 1.0);
  CHECK(s.converged);
  CHECK(s.coefficients[0] == doctest::Approx(2.5));
  CHECK(s.coefficients[1] == 0.0);
}

TEST_CASE("lambda = 0 gives least squares") {
  Rng rng(3);
  const Eigen::MatrixXd A = gaussian(60, 8, rng);
  const Eigen::VectorXd y = gaussian(60, 1, rng);
  const Eigen::VectorXd ls = A.colPivHouseholderQr().solve(y);
  const LassoSolution s = lasso(A, y, 0.0);
  CHECK((s.coefficients - ls).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("KKT conditions hold on random instances") {
  Rng rng(17);
  std::uniform_real_distribution<double> frac(0.01, 0.9);
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd A = gaussian(30, 12, rng);
    const Eigen::VectorXd y = gaussian(30, 1, rng);
    const GramSystem g = gram(A, y);
    const double lam = frac(rng) * lambda_max(g.c);
    const LassoSolution s = lasso_gram(g, lam);
    CHECK(s.converged);
    CHECK(kkt_violation(g, s.coefficients, lam) <= 1e-6 * lam);
  }
}

TEST_CASE("objective is non-increasing over sweeps") {
  Rng rng(19);
  const Eigen::MatrixXd A = gaussian(40, 30, rng);
  const Eigen::VectorXd y = gaussian(40, 1, rng);
  LassoOptions opt;
  opt.record_objective = true;
  const LassoSolution s = lasso(A, y, 0.1 * lambda_max(A.transpose() * y), opt);
  REQUIRE(s.objective_history.size() >= 2);
  for (std::size_t i = 1; i < s.objective_history.size(); ++i)
    CHECK(s.objective_history[i] <= s.objective_history[i - 1] + 1e-12 * std::abs(s.objective_history[0]));
}

TEST_CASE("lambda_max gives the zero solution") {
  Rng rng(23);
  const Eigen::MatrixXd A = gaussian(20, 10, rng);
  const Eigen::VectorXd y = gaussian(20, 1, rng);
  const GramSystem g = gram(A, y);
  const double lm = lambda_max(g.c);
  CHECK(lasso_gram(g, lm).coefficients.isZero());
  CHECK_FALSE(lasso_gram(g, 0.99 * lm).coefficients.isZero());
  const auto grid = lambda_grid(lm, 50, 1e-4);
  REQUIRE(grid.size() == 50);
  CHECK(grid.front() == doctest::Approx(lm));
  CHECK(grid.back() == doctest::Approx(1e-4 * lm));
  CHECK(grid[1] / grid[0] == doctest::Approx(grid[2] / grid[1]));
}

TEST_CASE("sparse support is recovered") {
  Rng rng(29);
  const Eigen::MatrixXd A = gaussian(200, 50, rng);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(50);
  truth[3] = 2.0;
  truth[17] = -1.5;
  truth[40] = 1.0;
  std::normal_distribution<double> noise(0, 0.01);
  Eigen::VectorXd y = A * truth;
  for (auto& v : y) v += noise(rng);
  const LassoSolution s = lasso(A, y, 5.0);
  for (int j = 0; j < 50; ++j) {
    if (truth[j] != 0.0)
      CHECK(s.coefficients[j] == doctest::Approx(truth[j]).epsilon(0.05));
    else
      CHECK(s.coefficients[j] == 0.0);
  }
}

TEST_CASE("sufficient statistics combine additively") {
  Rng rng(31);
  const Eigen::MatrixXd A = gaussian(30, 4, rng);
  const Eigen::MatrixXd Y = gaussian(30, 2, rng);
  auto blocks = block_stats(A, Y, 3);
  REQUIRE(blocks.size() == 3);
  SufficientStats total = blocks[0];
  total += blocks[1];
  total += blocks[2];
  const SufficientStats whole = SufficientStats::from_data(A, Y);
  CHECK((total.xx - whole.xx).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(total.n == 30.0);
  total -= blocks[2];
  CHECK(total.n == 20.0);

  // centred least squares reproduces an intercept fit
  const GramSystem g = gram_system(whole, 1, true);
  const LassoSolution s = lasso_gram(g, 0.0);
  const double b = intercept_for(whole, 1, s.coefficients);
  Eigen::MatrixXd D(30, 5);
  D << Eigen::VectorXd::Ones(30), A;
  const Eigen::VectorXd ls = D.colPivHouseholderQr().solve(Y.col(1));
  CHECK(b == doctest::Approx(ls[0]).epsilon(1e-8));
  CHECK((s.coefficients - ls.tail(4)).cwiseAbs().maxCoeff() < 1e-8);
  const double direct = (Y.col(1) - D * ls).squaredNorm();
  CHECK(sse(whole, 1, b, s.coefficients) == doctest::Approx(direct).epsilon(1e-8));
}

TEST_CASE("cross validation") {
  Rng rng(37);
  const Eigen::MatrixXd A = gaussian(100, 20, rng);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(20);
  truth[0] = 1.0;
  truth[5] = -2.0;
  std::normal_distribution<double> noise(0, 0.5);
  Eigen::VectorXd y = A * truth;
  for (auto& v : y) v += noise(rng);
  const auto grid = lambda_grid(lambda_max(A.transpose() * y), 50, 1e-4);
  const CvResult cv = cross_validate_lambda(A, y, grid, 5);
  CHECK(cv.folds_used == 5);
  CHECK(cv.mean_error.size() == 50);
  CHECK(cv.lambda < grid.front());
  CHECK(cv.lambda > grid.back());
  const auto best = std::min_element(cv.mean_error.begin(), cv.mean_error.end());
  CHECK(cv.lambda == grid[best - cv.mean_error.begin()]);

  // constant target: every fold is skipped
  CHECK_THROWS_AS(cross_validate_lambda(A, Eigen::VectorXd::Ones(100), grid, 5, true), NumericalError);
  CHECK_THROWS_AS(cross_validate_lambda(A, y, grid, 1), ConfigError);
}
