#include "l96/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace l96 {

void LyapunovConfig::validate() const {
  require(dt > 0.0, "lyapunov: dt must be positive");
  require(spinup >= 0.0, "lyapunov: spinup must be non-negative");
  require(total_time > spinup, "lyapunov: total_time must exceed spinup");
  const double ratio = renorm_interval / dt;
  require(renorm_interval > 0.0 && std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0,
          "lyapunov: renorm_interval must be a positive integer multiple of dt");
}

long LyapunovConfig::steps_per_renorm() const { return std::lround(renorm_interval / dt); }

Eigen::MatrixXd slow_jacobian(const Eigen::Ref<const Eigen::VectorXd>& X, const ModelParams& p) {
  require(X.size() == p.K, "slow_jacobian: X has wrong length");
  const int K = p.K;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(K, K);
  for (int k = 0; k < K; ++k) {
    const int km2 = (k + K - 2) % K, km1 = (k + K - 1) % K, kp1 = (k + 1) % K;
    J(k, km2) += -X[km1];
    J(k, km1) += -(X[km2] - X[kp1]);
    J(k, k) += -1.0;
    J(k, kp1) += X[km1];
  }
  return J;
}

void slow_jacobian_apply(const Eigen::Ref<const Eigen::VectorXd>& X, const RowMatrixXd& V,
                         RowMatrixXd& out, Exec exec) {
  const int K = static_cast<int>(X.size());
  out.resize(V.rows(), V.cols());
  auto row = [&](int k) {
    const int km2 = (k + K - 2) % K, km1 = (k + K - 1) % K, kp1 = (k + 1) % K;
    out.row(k) = -X[km1] * V.row(km2) - (X[km2] - X[kp1]) * V.row(km1) - V.row(k) +
                 X[km1] * V.row(kp1);
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for
    for (int k = 0; k < K; ++k) row(k);
  } else {
    for (int k = 0; k < K; ++k) row(k);
  }
}

Eigen::VectorXd modified_gram_schmidt(RowMatrixXd& V) {
  const Eigen::Index d = V.cols();
  Eigen::VectorXd norms(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double n = V.col(i).norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw NumericalError("gram-schmidt: degenerate tangent vector " + std::to_string(i));
    V.col(i) /= n;
    norms[i] = n;
    for (Eigen::Index j = i + 1; j < d; ++j) V.col(j) -= V.col(i).dot(V.col(j)) * V.col(i);
  }
  return norms;
}

LyapunovResult lyapunov_spectrum(const TangentSystem& sys, Eigen::VectorXd x,
                                 const LyapunovConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = x.size();
  const double dt = cfg.dt;

  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), xs(n);
  auto state_step = [&] {
    sys.rhs(x, k1);
    xs = x + 0.5 * dt * k1;
    sys.rhs(xs, k2);
    xs = x + 0.5 * dt * k2;
    sys.rhs(xs, k3);
    xs = x + dt * k3;
    sys.rhs(xs, k4);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw BlowUpError("lyapunov: state blew up", 0.0);
  };

  const long spin_steps = std::lround(cfg.spinup / dt);
  for (long i = 0; i < spin_steps; ++i) state_step();

  RowMatrixXd V = RowMatrixXd::Identity(n, n);
  RowMatrixXd K1, K2, K3, K4, Vs;
  auto coupled_step = [&] {
    sys.rhs(x, k1);
    sys.tangent(x, V, K1);
    xs = x + 0.5 * dt * k1;
    Vs = V + 0.5 * dt * K1;
    sys.rhs(xs, k2);
    sys.tangent(xs, Vs, K2);
    xs = x + 0.5 * dt * k2;
    Vs = V + 0.5 * dt * K2;
    sys.rhs(xs, k3);
    sys.tangent(xs, Vs, K3);
    xs = x + dt * k3;
    Vs = V + dt * K3;
    sys.rhs(xs, k4);
    sys.tangent(xs, Vs, K4);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    V += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    if (!x.allFinite() || !V.allFinite()) throw BlowUpError("lyapunov: tangent blew up", 0.0);
  };

  const long per = cfg.steps_per_renorm();
  const long renorms = std::lround((cfg.total_time - cfg.spinup) / cfg.renorm_interval);
  Eigen::VectorXd log_sum = Eigen::VectorXd::Zero(n);
  LyapunovResult res;
  res.dimension = static_cast<int>(n);
  res.history.resize(renorms, n + 1);
  for (long r = 0; r < renorms; ++r) {
    for (long s = 0; s < per; ++s) coupled_step();
    log_sum += modified_gram_schmidt(V).array().log().matrix();
    const double elapsed = (r + 1) * per * dt;
    res.history(r, 0) = cfg.spinup + elapsed;
    res.history.row(r).tail(n) = (log_sum / elapsed).transpose();
  }
  const double elapsed = renorms * per * dt;
  res.exponents = log_sum / elapsed;
  std::sort(res.exponents.begin(), res.exponents.end(), std::greater<>());
  return res;
}

LyapunovResult lyapunov_spectrum(const ModelParams& p, const LyapunovConfig& cfg, Rng& rng) {
  p.validate();
  TangentSystem sys;
  sys.rhs = [&](const Eigen::VectorXd& X, Eigen::VectorXd& out) { slow_tendency(X, p.F, out); };
  sys.tangent = [&](const Eigen::VectorXd& X, const RowMatrixXd& V, RowMatrixXd& out) {
    slow_jacobian_apply(X, V, out, cfg.exec);
  };
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x0(p.K);
  for (int k = 0; k < p.K; ++k) x0[k] = u(rng);
  return lyapunov_spectrum(sys, x0, cfg);
}

KaplanYorke kaplan_yorke(const Eigen::Ref<const Eigen::VectorXd>& ex) {
  require(ex.size() > 0, "kaplan_yorke: empty spectrum");
  for (Eigen::Index i = 1; i < ex.size(); ++i)
    require(ex[i] <= ex[i - 1], "kaplan_yorke: exponents must be sorted descending");
  KaplanYorke out;
  double partial = 0.0;
  for (Eigen::Index i = 0; i < ex.size(); ++i) {
    partial += ex[i];
    if (partial > 0.0) out.r = static_cast<int>(i + 1);
  }
  if (out.r == 0) return out;
  if (out.r == ex.size()) {
    out.saturated = true;
    out.dimension = static_cast<double>(ex.size());
    return out;
  }
  out.dimension = out.r + ex.head(out.r).sum() / std::abs(ex[out.r]);
  return out;
}

double ks_entropy(const Eigen::Ref<const Eigen::VectorXd>& ex) {
  return (ex.array() > 0.0).select(ex.array(), 0.0).sum();
}

double error_doubling_time(double lambda1) {
  require(lambda1 > 0.0, "error_doubling_time: largest exponent must be positive");
  return std::numbers::ln2 / lambda1;
}

SpectrumClasses classify_spectrum(const Eigen::Ref<const Eigen::VectorXd>& ex, double band) {
  SpectrumClasses c;
  for (double v : ex) {
    if (v > band)
      ++c.positive;
    else if (v < -band)
      ++c.negative;
    else
      ++c.neutral;
  }
  return c;
}

}  // namespace l96
