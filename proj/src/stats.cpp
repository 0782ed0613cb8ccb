#include "l96/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "l96/errors.hpp"

namespace l96 {

DensityEstimate kde(const Eigen::Ref<const Eigen::VectorXd>& samples,
                    const Eigen::Ref<const Eigen::VectorXd>& grid, double bandwidth, Exec exec) {
  require(samples.size() > 0, "kde: empty sample set");
  require(bandwidth > 0.0 && std::isfinite(bandwidth), "kde: bandwidth must be positive");
  DensityEstimate out{grid, Eigen::VectorXd(grid.size()), bandwidth};
  const double norm = 1.0 / (samples.size() * std::sqrt(2.0 * std::numbers::pi) * bandwidth);
  const double inv2 = 1.0 / (2.0 * bandwidth * bandwidth);
  const Eigen::Index G = grid.size();
  auto point = [&](Eigen::Index g) {
    const double x = grid[g];
    out.density[g] = norm * (-(samples.array() - x).square() * inv2).exp().sum();
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for
    for (Eigen::Index g = 0; g < G; ++g) point(g);
  } else {
    for (Eigen::Index g = 0; g < G; ++g) point(g);
  }
  return out;
}

double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  require(samples.size() > 0, "silverman_bandwidth: empty sample set");
  const double n = static_cast<double>(samples.size());
  const double mean = samples.mean();
  const double sd =
      samples.size() > 1 ? std::sqrt((samples.array() - mean).square().sum() / (n - 1.0)) : 0.0;
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  auto quantile = [&](double q) {
    const double pos = q * (s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - lo) * (s[hi] - s[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = 1.0;
  return 0.9 * spread * std::pow(n, -0.2);
}

Eigen::VectorXd uniform_grid(double lo, double hi, int points) {
  require(points >= 2 && hi > lo, "uniform_grid: need hi > lo and at least two points");
  return Eigen::VectorXd::LinSpaced(points, lo, hi);
}

Eigen::VectorXd acf(const Eigen::Ref<const Eigen::VectorXd>& x, int max_lag) {
  const Eigen::Index M = x.size();
  require(max_lag >= 0 && max_lag < M, "acf: max_lag must be in [0, M)");
  const Eigen::VectorXd d = x.array() - x.mean();
  Eigen::VectorXd out(max_lag + 1);
  for (int m = 0; m <= max_lag; ++m)
    out[m] = d.head(M - m).dot(d.tail(M - m)) / static_cast<double>(M - m);
  return out;
}

Eigen::VectorXd acf_normalized(const Eigen::Ref<const Eigen::VectorXd>& x, int max_lag) {
  Eigen::VectorXd c = acf(x, max_lag);
  if (!(c[0] > 0.0)) throw NumericalError("acf: constant series has zero variance");
  return c / c[0];
}

double kl_divergence(const Eigen::Ref<const Eigen::VectorXd>& P,
                     const Eigen::Ref<const Eigen::VectorXd>& Q, double floor) {
  require(P.size() == Q.size() && P.size() > 0, "kl_divergence: grids do not match");
  require((P.array() >= 0.0).all() && (Q.array() >= 0.0).all(),
          "kl_divergence: densities must be non-negative");
  const double ps = P.sum(), qs = Q.sum();
  require(ps > 0.0 && qs > 0.0, "kl_divergence: densities must have positive mass");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < P.size(); ++i) {
    const double p = P[i] / ps;
    if (p <= 0.0) continue;
    const double q = std::max(Q[i] / qs, floor);
    kl += p * std::log(p / q);
  }
  return kl;
}

double kl_from_samples(const Eigen::Ref<const Eigen::VectorXd>& ps,
                       const Eigen::Ref<const Eigen::VectorXd>& qs, const KlOptions& opt) {
  const double bp = opt.bandwidth > 0.0 ? opt.bandwidth : silverman_bandwidth(ps);
  const double bq = opt.bandwidth > 0.0 ? opt.bandwidth : silverman_bandwidth(qs);
  const double pad = opt.pad_bandwidths * std::max(bp, bq);
  const double lo = std::min(ps.minCoeff(), qs.minCoeff()) - pad;
  const double hi = std::max(ps.maxCoeff(), qs.maxCoeff()) + pad;
  const Eigen::VectorXd grid = uniform_grid(lo, hi, opt.grid_points);
  return kl_divergence(kde(ps, grid, bp).density, kde(qs, grid, bq).density, opt.floor);
}

double average_kl(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& model, const KlOptions& opt,
                  Exec exec) {
  require(truth.cols() == model.cols() && truth.cols() > 0, "average_kl: component mismatch");
  const Eigen::Index K = truth.cols();
  Eigen::VectorXd kl(K);
  if (exec == Exec::parallel) {
#pragma omp parallel for
    for (Eigen::Index k = 0; k < K; ++k) kl[k] = kl_from_samples(truth.col(k), model.col(k), opt);
  } else {
    for (Eigen::Index k = 0; k < K; ++k) kl[k] = kl_from_samples(truth.col(k), model.col(k), opt);
  }
  return kl.mean();
}

double mspe(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted) {
  require(truth.rows() == predicted.rows() && truth.cols() == predicted.cols() && truth.size() > 0,
          "mspe: shape mismatch");
  return (predicted - truth).squaredNorm() / static_cast<double>(truth.size());
}

double trapezoid(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  require(x.size() == y.size() && x.size() >= 2, "trapezoid: need matching vectors");
  double s = 0.0;
  for (Eigen::Index i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

}  // namespace l96
