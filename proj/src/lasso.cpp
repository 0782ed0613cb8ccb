#include "l96/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "l96/errors.hpp"

namespace l96 {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double lambda_max(const Eigen::Ref<const Eigen::VectorXd>& c) {
  return c.size() ? 2.0 * c.cwiseAbs().maxCoeff() : 0.0;
}

double lasso_objective(const GramSystem& sys, const Eigen::VectorXd& s, double lambda) {
  return sys.yy - 2.0 * sys.c.dot(s) + s.dot(sys.G * s) + lambda * s.lpNorm<1>();
}

double kkt_violation(const GramSystem& sys, const Eigen::VectorXd& s, double lambda) {
  const Eigen::VectorXd g = 2.0 * (sys.c - sys.G * s);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double v = s[j] != 0.0 ? std::abs(g[j] - lambda * (s[j] > 0 ? 1.0 : -1.0))
                                 : std::max(std::abs(g[j]) - lambda, 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

// L L' += w w' for lower-triangular L, in place.
void cholesky_rank1_update(Eigen::MatrixXd& L, Eigen::VectorXd w) {
  const Eigen::Index n = L.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = L(j, j);
    const double rr = std::hypot(d, w[j]);
    const double c = rr / d, sn = w[j] / d;
    L(j, j) = rr;
    const Eigen::Index m = n - j - 1;
    if (m == 0) break;
    L.col(j).tail(m) = (L.col(j).tail(m) + sn * w.tail(m)) / c;
    w.tail(m) = c * w.tail(m) - sn * L.col(j).tail(m);
  }
}

// Cholesky factor of A with row and column k removed, from the factor of A.
void cholesky_delete(Eigen::MatrixXd& L, Eigen::Index k) {
  const Eigen::Index n = L.rows(), m = n - k - 1;
  const Eigen::VectorXd w = L.col(k).tail(m);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n - 1, n - 1);
  out.topLeftCorner(k, k) = L.topLeftCorner(k, k);
  out.bottomLeftCorner(m, k) = L.bottomLeftCorner(m, k);
  out.bottomRightCorner(m, m) = L.bottomRightCorner(m, m);
  Eigen::MatrixXd trail = out.bottomRightCorner(m, m);
  cholesky_rank1_update(trail, w);
  out.bottomRightCorner(m, m) = trail;
  L.swap(out);
}

}  // namespace

LassoSolution lasso_gram(const GramSystem& sys, double lambda, const LassoOptions& opt,
                         const Eigen::VectorXd* warm_start) {
  const Eigen::Index p = sys.c.size();
  require(sys.G.rows() == p && sys.G.cols() == p, "lasso: Gram matrix shape mismatch");
  require(lambda >= 0.0 && std::isfinite(lambda), "lasso: lambda must be non-negative");
  require(sys.G.allFinite() && sys.c.allFinite(), "lasso: non-finite design");

  LassoSolution sol;
  sol.coefficients = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd& s = sol.coefficients;
  // r = c - G s: half the negative gradient of the quadratic part.
  Eigen::VectorXd r = sys.c - sys.G * s;
  const double half = 0.5 * lambda;
  const double scale = std::sqrt(std::max(sys.yy, std::numeric_limits<double>::min()));
  const Eigen::VectorXd diag_sqrt = sys.G.diagonal().cwiseMax(0.0).cwiseSqrt();

  auto update = [&](Eigen::Index j) {
    const double gjj = sys.G(j, j);
    if (!(gjj > 0.0)) {
      const double old = s[j];
      if (old != 0.0) {
        s[j] = 0.0;
        r += old * sys.G.col(j);
      }
      return 0.0;
    }
    const double old = s[j];
    const double z = r[j] + gjj * old;
    const double next = soft_threshold(z, half) / gjj;
    if (next == old) return 0.0;
    s[j] = next;
    r -= (next - old) * sys.G.col(j);
    return std::abs(next - old) * diag_sqrt[j] / scale;
  };

  auto record = [&] {
    if (opt.record_objective) sol.objective_history.push_back(lasso_objective(sys, s, lambda));
  };

  // Feature-sign step: solve G_AA s_A = c_A - (lambda/2) sign(s_A) on the
  // current support. If a coordinate would flip sign, move to the first zero
  // crossing instead (the objective still decreases), drop it from the
  // Cholesky factor and re-solve.
  auto polish = [&](std::vector<Eigen::Index> act) {
    const Eigen::Index n0 = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd Gaa(n0, n0);
    for (Eigen::Index a = 0; a < n0; ++a)
      for (Eigen::Index b = 0; b < n0; ++b) Gaa(a, b) = sys.G(act[a], act[b]);
    const Eigen::LLT<Eigen::MatrixXd> llt(Gaa);
    if (llt.info() != Eigen::Success) return false;
    Eigen::MatrixXd L = llt.matrixL();
    while (!act.empty()) {
      const Eigen::Index n = static_cast<Eigen::Index>(act.size());
      Eigen::VectorXd rhs(n), cur(n);
      for (Eigen::Index a = 0; a < n; ++a) {
        cur[a] = s[act[a]];
        rhs[a] = sys.c[act[a]] - half * (cur[a] > 0 ? 1.0 : -1.0);
      }
      Eigen::VectorXd x = L.triangularView<Eigen::Lower>().solve(rhs);
      L.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
      if (!x.allFinite()) return false;
      double step = 1.0;
      Eigen::Index hit = -1;
      for (Eigen::Index a = 0; a < n; ++a) {
        if ((x[a] > 0) == (cur[a] > 0) && x[a] != 0.0) continue;
        const double t = cur[a] / (cur[a] - x[a]);
        if (t < step) {
          step = t;
          hit = a;
        }
      }
      const Eigen::VectorXd next = cur + step * (x - cur);
      std::vector<Eigen::Index> keep;
      for (Eigen::Index a = 0; a < n; ++a) {
        const bool drop = a == hit || (next[a] > 0) != (cur[a] > 0);
        s[act[a]] = drop ? 0.0 : next[a];
      }
      if (hit < 0) {
        r = sys.c - sys.G * s;
        return true;
      }
      for (Eigen::Index a = n - 1; a >= 0; --a) {
        if (s[act[a]] != 0.0) continue;
        cholesky_delete(L, a);
        act.erase(act.begin() + a);
      }
    }
    r = sys.c - sys.G * s;
    return true;
  };
  const double kkt_scale = std::max(lambda, 1e-12 * lambda_max(sys.c));

  std::vector<Eigen::Index> active;
  while (sol.iterations < opt.max_sweeps) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) change = std::max(change, update(j));
    ++sol.iterations;
    record();
    if (change < opt.tol) {
      sol.converged = true;
      break;
    }
    active.clear();
    for (Eigen::Index j = 0; j < p; ++j)
      if (s[j] != 0.0) active.push_back(j);
    bool polished = false;
    double polish_below = opt.polish_threshold;
    while (sol.iterations < opt.max_sweeps) {
      double ac = 0.0;
      for (Eigen::Index j : active) ac = std::max(ac, update(j));
      ++sol.iterations;
      record();
      if (ac < opt.tol) break;
      if (ac < polish_below && !active.empty()) {
        if (polish(active)) {
          record();
          polished = true;
          break;
        }
        polish_below = 0.1 * ac;  // back off after a sign flip
      }
    }
    if (polished && kkt_violation(sys, s, lambda) <= opt.polish_kkt * kkt_scale) {
      sol.converged = true;
      break;
    }
  }
  sol.objective = lasso_objective(sys, s, lambda);
  sol.max_kkt_violation = kkt_violation(sys, s, lambda);
  return sol;
}

LassoSolution lasso(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& y, double lambda,
                    const LassoOptions& opt) {
  require(Theta.rows() == y.size(), "lasso: Theta rows must match y");
  require(Theta.allFinite() && y.allFinite(), "lasso: non-finite input");
  GramSystem sys{Theta.transpose() * Theta, Theta.transpose() * y, y.squaredNorm()};
  return lasso_gram(sys, lambda, opt);
}

std::vector<double> lambda_grid(double lmax, int count, double ratio) {
  require(count >= 1 && ratio > 0.0 && ratio <= 1.0, "lambda_grid: invalid count or ratio");
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lmax;
    return g;
  }
  const double step = std::log(ratio) / (count - 1);
  for (int i = 0; i < count; ++i) g[i] = lmax * std::exp(step * i);
  return g;
}

SufficientStats SufficientStats::from_data(const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& Y) {
  require(Theta.rows() == Y.rows(), "SufficientStats: row mismatch");
  SufficientStats s;
  s.xx = Eigen::MatrixXd::Zero(Theta.cols(), Theta.cols());
  s.xx.selfadjointView<Eigen::Lower>().rankUpdate(Theta.transpose());
  s.xx.triangularView<Eigen::StrictlyUpper>() = s.xx.transpose();
  s.x = Theta.colwise().sum().transpose();
  s.xy = Theta.transpose() * Y;
  s.y = Y.colwise().sum().transpose();
  s.yy = Y.colwise().squaredNorm().transpose();
  s.n = static_cast<double>(Theta.rows());
  return s;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& o) {
  xx += o.xx;
  x += o.x;
  xy += o.xy;
  y += o.y;
  yy += o.yy;
  n += o.n;
  return *this;
}

SufficientStats& SufficientStats::operator-=(const SufficientStats& o) {
  xx -= o.xx;
  x -= o.x;
  xy -= o.xy;
  y -= o.y;
  yy -= o.yy;
  n -= o.n;
  return *this;
}

GramSystem gram_system(const SufficientStats& s, Eigen::Index t, bool intercept) {
  require(s.n > 0.0, "gram_system: empty statistics");
  GramSystem g;
  if (!intercept) {
    g.G = s.xx;
    g.c = s.xy.col(t);
    g.yy = s.yy[t];
    return g;
  }
  g.G = s.xx - s.x * s.x.transpose() / s.n;
  g.c = s.xy.col(t) - s.x * (s.y[t] / s.n);
  g.yy = std::max(s.yy[t] - s.y[t] * s.y[t] / s.n, 0.0);
  return g;
}

double intercept_for(const SufficientStats& s, Eigen::Index t, const Eigen::VectorXd& coef) {
  return (s.y[t] - s.x.dot(coef)) / s.n;
}

double sse(const SufficientStats& s, Eigen::Index t, double b, const Eigen::VectorXd& coef) {
  return s.yy[t] - 2.0 * b * s.y[t] - 2.0 * coef.dot(s.xy.col(t)) + s.n * b * b +
         2.0 * b * coef.dot(s.x) + coef.dot(s.xx * coef);
}

std::vector<SufficientStats> block_stats(const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& Y,
                                         int folds) {
  require(folds >= 1 && Theta.rows() >= folds, "block_stats: need at least one row per fold");
  std::vector<SufficientStats> out;
  const Eigen::Index m = Theta.rows();
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index lo = m * f / folds, hi = m * (f + 1) / folds;
    out.push_back(SufficientStats::from_data(Theta.middleRows(lo, hi - lo), Y.middleRows(lo, hi - lo)));
  }
  return out;
}

CvResult cross_validate_lambda(const std::vector<SufficientStats>& blocks, Eigen::Index t,
                               const std::vector<double>& grid, bool intercept,
                               const LassoOptions& opt) {
  require(blocks.size() >= 2, "cross_validate_lambda: need at least two folds");
  require(!grid.empty(), "cross_validate_lambda: empty lambda grid");
  SufficientStats total = blocks.front();
  for (std::size_t f = 1; f < blocks.size(); ++f) total += blocks[f];

  // Descending order lets each fold warm-start along the path.
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return grid[a] > grid[b]; });

  CvResult res;
  res.grid = grid;
  res.mean_error.assign(grid.size(), 0.0);
  for (std::size_t f = 0; f < blocks.size(); ++f) {
    SufficientStats train = total;
    train -= blocks[f];
    const GramSystem sys = gram_system(train, t, intercept);
    if (!(sys.yy > 1e-14 * std::max(1.0, train.yy[t]))) {
      res.warnings.push_back("fold " + std::to_string(f) + " skipped: constant target");
      continue;
    }
    ++res.folds_used;
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(sys.c.size());
    for (std::size_t i : order) {
      const LassoSolution sol = lasso_gram(sys, grid[i], opt, &warm);
      warm = sol.coefficients;
      const double b = intercept ? intercept_for(train, t, sol.coefficients) : 0.0;
      res.mean_error[i] += sse(blocks[f], t, b, sol.coefficients) / blocks[f].n;
    }
  }
  if (res.folds_used == 0) throw NumericalError("cross_validate_lambda: every fold was degenerate");
  for (double& e : res.mean_error) e /= res.folds_used;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double e = res.mean_error[i];
    const double tie = 1e-12 * std::max(std::abs(best), std::abs(e));
    if (e < best - tie || (std::abs(e - best) <= tie && grid[i] > res.lambda)) {
      best = std::min(best, e);
      res.lambda = grid[i];
    }
  }
  return res;
}

CvResult cross_validate_lambda(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& y,
                               const std::vector<double>& grid, int folds, bool intercept,
                               const LassoOptions& opt) {
  require(folds >= 2, "cross_validate_lambda: need at least two folds");
  return cross_validate_lambda(block_stats(Theta, y, folds), 0, grid, intercept, opt);
}

}  // namespace l96
