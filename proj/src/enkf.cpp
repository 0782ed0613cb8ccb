#include "l96/enkf.hpp"

#include <cmath>
#include <sstream>

#include "l96/stats.hpp"

namespace l96 {

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd gaussian_draw(const Eigen::MatrixXd& L, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd z(L.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = n(rng);
  return L * z;
}

}  // namespace

ObservationModel ObservationModel::identity(int K, double variance, int every) {
  return {Eigen::MatrixXd::Identity(K, K), variance * Eigen::MatrixXd::Identity(K, K), every};
}

void ObservationModel::validate() const {
  require(every >= 1, "observation schedule must be >= 1 step");
  require(H.rows() >= 1 && H.cols() >= 1, "observation operator is empty");
  require(Gamma.rows() == H.rows() && Gamma.cols() == H.rows(), "Gamma must be K_obs x K_obs");
  require((Gamma - Gamma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, Gamma.cwiseAbs().maxCoeff()),
          "Gamma must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Gamma, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > 0.0, "Gamma must be positive definite");
}

NoiseSpec NoiseSpec::gaussian(Eigen::MatrixXd Sigma) {
  NoiseSpec n;
  n.mode = Mode::gaussian;
  n.Sigma = std::move(Sigma);
  return n;
}

NoiseSpec NoiseSpec::autoregressive(std::vector<ARModel> models) {
  NoiseSpec n;
  n.mode = Mode::ar;
  n.ar = std::move(models);
  return n;
}

void NoiseSpec::validate(int K) const {
  if (mode == Mode::gaussian) {
    require(Sigma.rows() == K && Sigma.cols() == K, "noise Sigma must be K x K");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-12, "noise Sigma must be positive semidefinite");
  }
  if (mode == Mode::ar) {
    require(ar.size() == 1 || static_cast<int>(ar.size()) == K, "AR noise needs 1 or K models");
    for (const auto& m : ar) require(m.stationary, "AR noise model must be stationary");
  }
}

void EnsembleState::validate() const {
  require(members.rows() >= 2, "ensemble needs at least two members");
  require(residuals.rows() == members.rows() && residuals.cols() == members.cols(),
          "ensemble residuals must match members");
  require(static_cast<Eigen::Index>(streams.size()) == members.rows(), "one RNG stream per member");
  require(members.allFinite(), "ensemble has non-finite members");
}

EnsembleState make_ensemble(const Eigen::VectorXd& center, int N, double spread, std::uint64_t seed) {
  require(N >= 2, "ensemble needs at least two members");
  EnsembleState ens;
  ens.members.resize(N, center.size());
  ens.residuals = Eigen::MatrixXd::Zero(N, center.size());
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < N; ++i) {
    ens.streams.push_back(make_rng(sub_seed(seed, static_cast<std::uint64_t>(i))));
    for (Eigen::Index k = 0; k < center.size(); ++k)
      ens.members(i, k) = center[k] + spread * n(ens.streams.back());
  }
  return ens;
}

void ReducedPropagator::advance(Eigen::VectorXd& x, Eigen::VectorXd& e, int steps, Rng& rng,
                                Eigen::MatrixXd* path) const {
  ReducedIntegrator integ(model_);
  ReducedState s{x, e};
  if (path) path->resize(steps, x.size());
  for (int i = 0; i < steps; ++i) {
    integ.step(s, rng);
    if (path) path->row(i) = s.X.transpose();
  }
  x = s.X;
  e = s.e;
}

void MapPropagator::advance(Eigen::VectorXd& x, Eigen::VectorXd&, int steps, Rng& rng,
                            Eigen::MatrixXd* path) const {
  if (path) path->resize(steps, x.size());
  for (int i = 0; i < steps; ++i) {
    map_(x, rng);
    if (path) path->row(i) = x.transpose();
  }
}

Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& members) {
  return members.colwise().mean().transpose();
}

Eigen::MatrixXd ensemble_covariance(const Eigen::MatrixXd& members) {
  require(members.rows() >= 2, "ensemble covariance needs at least two members");
  const Eigen::MatrixXd D = members.rowwise() - members.colwise().mean();
  Eigen::MatrixXd C = (D.transpose() * D) / static_cast<double>(members.rows() - 1);
  return 0.5 * (C + C.transpose());
}

ForecastResult forecast(EnsembleState& ens, const Propagator& prop, int steps, const NoiseSpec& noise,
                        Exec exec) {
  ens.validate();
  require(steps >= 0, "forecast: steps must be non-negative");
  noise.validate(ens.dim());
  const int N = ens.size();
  const int K = ens.dim();
  std::vector<Eigen::MatrixXd> paths(N);
  std::vector<int> failed(N, 0);
  Eigen::MatrixXd L;
  if (noise.mode == NoiseSpec::Mode::gaussian) L = psd_sqrt(noise.Sigma);

  auto member = [&](int n) {
    Eigen::VectorXd x = ens.members.row(n).transpose();
    Eigen::VectorXd e = ens.residuals.row(n).transpose();
    try {
      prop.advance(x, e, steps, ens.streams[n], &paths[n]);
      if (noise.mode == NoiseSpec::Mode::gaussian) x += gaussian_draw(L, ens.streams[n]);
    } catch (const NumericalError&) {
      failed[n] = 1;
      return;
    }
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e8) failed[n] = 1;
    ens.members.row(n) = x.transpose();
    ens.residuals.row(n) = e.transpose();
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) member(n);
  } else {
    for (int n = 0; n < N; ++n) member(n);
  }
  for (int n = 0; n < N; ++n)
    if (failed[n]) throw NumericalError("forecast: ensemble member " + std::to_string(n) + " blew up");

  ForecastResult out;
  out.mean = ensemble_mean(ens.members);
  out.cov = ensemble_covariance(ens.members);
  out.mean_path = Eigen::MatrixXd::Zero(steps, K);
  for (int n = 0; n < N; ++n) out.mean_path += paths[n] / N;
  if (steps > 0) out.mean_path.bottomRows(1) = out.mean.transpose();
  return out;
}

AnalysisResult analysis(EnsembleState& ens, const Eigen::VectorXd& y, const ObservationModel& obs) {
  ens.validate();
  obs.validate();
  require(obs.H.cols() == ens.dim(), "analysis: H columns must match the state dimension");
  require(y.size() == obs.H.rows(), "analysis: observation length must match H rows");
  const Eigen::MatrixXd C = ensemble_covariance(ens.members);
  AnalysisResult res;
  res.S = obs.H * C * obs.H.transpose() + obs.Gamma;
  res.S = 0.5 * (res.S + res.S.transpose());
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(res.S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw NumericalError("analysis: innovation covariance is not positive definite");
  // K = C H' S^{-1}  <=>  K' = S^{-1} H C (C and S symmetric).
  res.gain = ldlt.solve(obs.H * C).transpose();
  const Eigen::MatrixXd L = psd_sqrt(obs.Gamma);
  for (int n = 0; n < ens.size(); ++n) {
    const Eigen::VectorXd v = ens.members.row(n).transpose();
    const Eigen::VectorXd yn = y + gaussian_draw(L, ens.streams[n]);
    ens.members.row(n) = (v + res.gain * (yn - obs.H * v)).transpose();
  }
  return res;
}

Observations generate_observations(const Trajectory& truth, const ObservationModel& obs, Rng& rng) {
  obs.validate();
  const Eigen::Index rows = truth.size();
  require(rows >= 1, "generate_observations: empty trajectory");
  require((rows - 1) % obs.every == 0, "generate_observations: schedule must divide the trajectory length");
  require(obs.H.cols() <= truth.states.cols(), "generate_observations: H wider than the state");
  const Eigen::MatrixXd L = psd_sqrt(obs.Gamma);
  Observations out;
  const Eigen::Index n_obs = (rows - 1) / obs.every;
  out.values.resize(n_obs, obs.H.rows());
  for (Eigen::Index j = 0; j < n_obs; ++j) {
    const long row = static_cast<long>((j + 1) * obs.every);
    const Eigen::VectorXd x = truth.states.row(row).head(obs.H.cols()).transpose();
    out.steps.push_back(row);
    out.times.push_back(truth.times[row]);
    out.values.row(j) = (obs.H * x + gaussian_draw(L, rng)).transpose();
  }
  return out;
}

AssimilationResult run_assimilation(const Trajectory& truth, const ReducedModel& reduced,
                                    const AssimilationConfig& cfg) {
  const int K = reduced.params.K;
  require(truth.states.cols() >= K, "run_assimilation: truth has fewer than K columns");
  cfg.obs.validate();
  require(cfg.obs.H.cols() == K, "run_assimilation: H must have K columns");
  cfg.noise.validate(K);

  ReducedModel model = reduced;
  if (cfg.noise.mode == NoiseSpec::Mode::ar) model.residual = cfg.noise.ar;
  const ReducedPropagator prop(model);
  NoiseSpec state_noise = cfg.noise.mode == NoiseSpec::Mode::gaussian ? cfg.noise : NoiseSpec::none();

  Rng obs_rng = make_rng(sub_seed(cfg.seed, "observations"));
  AssimilationResult res;
  res.observations = generate_observations(truth, cfg.obs, obs_rng);
  res.times = truth.times;
  res.truth = truth.states.leftCols(K);
  const Eigen::Index rows = truth.size();
  res.mean.resize(rows, K);

  EnsembleState ens = make_ensemble(res.truth.row(0).transpose(), cfg.members, cfg.initial_spread,
                                    sub_seed(cfg.seed, "members"));
  res.mean.row(0) = ensemble_mean(ens.members).transpose();
  for (std::size_t j = 0; j < res.observations.steps.size(); ++j) {
    const long end = res.observations.steps[j];
    const long start = end - cfg.obs.every;
    const ForecastResult fc = forecast(ens, prop, cfg.obs.every, state_noise, cfg.exec);
    res.mean.middleRows(start + 1, cfg.obs.every) = fc.mean_path;
    if (cfg.assimilate) {
      analysis(ens, res.observations.values.row(j).transpose(), cfg.obs);
      res.mean.row(end) = ensemble_mean(ens.members).transpose();
    }
  }
  res.l1_error = (res.mean - res.truth).cwiseAbs().rowwise().sum();
  res.mspe = mspe(res.truth.bottomRows(rows - 1), res.mean.bottomRows(rows - 1));
  return res;
}

}  // namespace l96
