#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "l96/dynamics.hpp"

namespace l96 {

struct ObservationModel {
  Eigen::MatrixXd H;      // K_obs x K
  Eigen::MatrixXd Gamma;  // K_obs x K_obs, symmetric positive definite
  int every = 20;         // observe every `every` integration steps

  static ObservationModel identity(int K, double variance, int every);
  // Throws ConfigError unless Gamma is symmetric with positive eigenvalues.
  void validate() const;
};

struct NoiseSpec {
  enum class Mode { none, gaussian, ar } mode = Mode::none;
  Eigen::MatrixXd Sigma;       // gaussian: additive state noise per forecast window
  std::vector<ARModel> ar;     // ar: residual forcing inside the reduced model

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(Eigen::MatrixXd Sigma);
  static NoiseSpec autoregressive(std::vector<ARModel> models);
  void validate(int K) const;
};

// Members are rows. Each member owns an AR residual vector and an RNG stream
// so results do not depend on scheduling or member order.
struct EnsembleState {
  Eigen::MatrixXd members;    // N x K
  Eigen::MatrixXd residuals;  // N x K
  std::vector<Rng> streams;

  int size() const { return static_cast<int>(members.rows()); }
  int dim() const { return static_cast<int>(members.cols()); }
  void validate() const;
};

// center + Normal(0, spread^2 I) per member; member n's stream is seeded from
// sub_seed(seed, n).
EnsembleState make_ensemble(const Eigen::VectorXd& center, int N, double spread, std::uint64_t seed);

// Advances one member by `steps` integration steps. If `path` is non-null it
// receives the state after each step (steps x K).
class Propagator {
 public:
  virtual ~Propagator() = default;
  virtual void advance(Eigen::VectorXd& x, Eigen::VectorXd& e, int steps, Rng& rng,
                       Eigen::MatrixXd* path) const = 0;
};

class ReducedPropagator final : public Propagator {
 public:
  explicit ReducedPropagator(ReducedModel model) : model_(std::move(model)) {}
  void advance(Eigen::VectorXd& x, Eigen::VectorXd& e, int steps, Rng& rng,
               Eigen::MatrixXd* path) const override;
  const ReducedModel& model() const { return model_; }

 private:
  ReducedModel model_;
};

// x -> step(x) applied `steps` times; for tests and linear models.
class MapPropagator final : public Propagator {
 public:
  using Map = std::function<void(Eigen::VectorXd&, Rng&)>;
  explicit MapPropagator(Map map) : map_(std::move(map)) {}
  void advance(Eigen::VectorXd& x, Eigen::VectorXd& e, int steps, Rng& rng,
               Eigen::MatrixXd* path) const override;

 private:
  Map map_;
};

struct ForecastResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;        // 1/(N-1) normalisation
  Eigen::MatrixXd mean_path;  // steps x K ensemble mean after each step
};

Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& members);
Eigen::MatrixXd ensemble_covariance(const Eigen::MatrixXd& members);

// Propagates each member independently, then adds gaussian noise if requested.
// Throws NumericalError naming the member on blow-up.
ForecastResult forecast(EnsembleState& ens, const Propagator& prop, int steps, const NoiseSpec& noise,
                        Exec exec = Exec::serial);

struct AnalysisResult {
  Eigen::MatrixXd gain;  // K x K_obs
  Eigen::MatrixXd S;     // innovation covariance H C H' + Gamma
};

// Perturbed-observation update v = (I - K H) v + K (y + eta), eta ~ N(0, Gamma)
// drawn from each member's stream. C is the ensemble covariance of `ens`.
AnalysisResult analysis(EnsembleState& ens, const Eigen::VectorXd& y, const ObservationModel& obs);

struct Observations {
  std::vector<long> steps;  // row index into the truth trajectory
  std::vector<double> times;
  Eigen::MatrixXd values;   // n_obs x K_obs
};

// y_j = H x(t_j) + v_j at rows every, 2 every, ... of `truth` (slow block, one
// row per integration step). Requires (rows - 1) divisible by obs.every.
Observations generate_observations(const Trajectory& truth, const ObservationModel& obs, Rng& rng);

struct AssimilationConfig {
  int members = 40;
  double initial_spread = 0.1;
  ObservationModel obs;
  NoiseSpec noise;  // gaussian or ar; ar is folded into the reduced model
  bool assimilate = true;  // false: free run of the same ensemble
  std::uint64_t seed = 0;
  Exec exec = Exec::serial;
};

struct AssimilationResult {
  std::vector<double> times;
  Eigen::MatrixXd truth;      // slow block
  Eigen::MatrixXd mean;       // ensemble-mean path (analysis mean at observation times)
  Eigen::VectorXd l1_error;   // sum_k |mean - truth| per time
  double mspe = 0.0;          // over every row after the initial one
  Observations observations;
};

// Forecast/analysis cycles of the reduced model against `truth` (slow block
// recorded every step, first row = window start).
AssimilationResult run_assimilation(const Trajectory& truth, const ReducedModel& reduced,
                                    const AssimilationConfig& cfg);

}  // namespace l96
