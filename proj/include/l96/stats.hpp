#pragma once

#include <Eigen/Dense>

#include "l96/parallel.hpp"

namespace l96 {

struct DensityEstimate {
  Eigen::VectorXd grid;
  Eigen::VectorXd density;
  double bandwidth = 0.0;
};

// Univariate Gaussian-kernel density estimate evaluated on `grid`.
DensityEstimate kde(const Eigen::Ref<const Eigen::VectorXd>& samples,
                    const Eigen::Ref<const Eigen::VectorXd>& grid, double bandwidth,
                    Exec exec = Exec::serial);

// 0.9 min(std, IQR / 1.34) N^(-1/5). Falls back to std (or 1) when the IQR or
// std vanish.
double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& samples);

Eigen::VectorXd uniform_grid(double lo, double hi, int points);

// C(m dt) = 1/(M-m) sum_h (x_h - mean)(x_{h+m} - mean) for m = 0..max_lag.
Eigen::VectorXd acf(const Eigen::Ref<const Eigen::VectorXd>& series, int max_lag);

// acf / C(0); throws NumericalError for a constant series.
Eigen::VectorXd acf_normalized(const Eigen::Ref<const Eigen::VectorXd>& series, int max_lag);

// Discrete KL divergence sum P log(P / Q) (natural log). Both inputs are
// renormalised to sum 1; cells with P = 0 are skipped; Q is floored at `floor`.
double kl_divergence(const Eigen::Ref<const Eigen::VectorXd>& P,
                     const Eigen::Ref<const Eigen::VectorXd>& Q, double floor = 1e-12);

struct KlOptions {
  int grid_points = 512;
  double pad_bandwidths = 3.0;
  double bandwidth = 0.0;  // <= 0: Silverman's rule per sample set
  double floor = 1e-12;
};

// KL(P || Q) between KDEs of two sample sets on a shared grid spanning their
// joint range plus `pad_bandwidths` on each side.
double kl_from_samples(const Eigen::Ref<const Eigen::VectorXd>& p_samples,
                       const Eigen::Ref<const Eigen::VectorXd>& q_samples,
                       const KlOptions& opt = {});

// Mean over components of the per-column KL(P_k || Q_k).
double average_kl(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& model,
                  const KlOptions& opt = {}, Exec exec = Exec::serial);

// (1/K) sum_k (1/I) sum_i (pred - truth)^2; rows are times, columns components.
double mspe(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted);

double trapezoid(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

}  // namespace l96
