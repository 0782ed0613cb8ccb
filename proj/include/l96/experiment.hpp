#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "l96/chaos.hpp"
#include "l96/dynamics.hpp"
#include "l96/enkf.hpp"
#include "l96/io.hpp"
#include "l96/regression.hpp"
#include "l96/sparse_model.hpp"

namespace l96 {

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> m{"wilks", "cs-raw", "cs-zero-bias", "cs-avg-bias", "cs-noisy-bias"};
  return m;
}

struct ExperimentConfig {
  ModelParams model;
  double train_t0 = 500.0, train_t1 = 1000.0;
  double test_t0 = 1000.0, test_t1 = 2000.0;
  double horizon = 0.9;
  double kl_t0 = 500.0;  // KL compares [kl_t0, test_t1]
  std::vector<std::string> methods = all_methods();
  bool ar = true;

  // Compressed sensing.
  int cs_degree = 4;
  int cv_folds = 5;
  int lambda_grid = 50;
  double lambda_ratio = 1e-4;
  int fit_stride = 1;
  double bias_sigma = 0.07;
  int stage_stride = 5;         // training-row stride for the degree-2/3 stages
  int degree3_repetitions = 100;
  int degree3_random = 100;
  double relevance = 1e-3;

  // Density comparison.
  int kde_stride = 10;
  int kl_grid = 512;

  // Stochastic evaluation: the horizon MSPE of an AR model is the MSPE of the
  // mean over this many realizations.
  int ar_realizations = 20;

  // Assimilation.
  int enkf_members = 40;
  int enkf_every = 20;
  double obs_variance = 0.01;
  double enkf_t0 = 1000.0, enkf_t1 = 1100.0;
  double initial_spread = 0.1;

  LyapunovConfig lyapunov;
  int acf_max_lag = 1000;

  std::uint64_t seed = 2020;
  Exec exec = Exec::parallel;

  // Throws ConfigError naming the offending field.
  void validate() const;
  ModelParams lyapunov_params() const;  // model with h = 0
};

json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig base = {});

// Named sub-seeds of the master seed.
std::uint64_t stage_seed(const ExperimentConfig& c, const char* stage);

// Truth recorded every integration step from `t0` on: X and the coupling
// forcing U of the full model.
struct TruthData {
  ModelParams params;
  double t0 = 0.0;
  Eigen::MatrixXd X, U;  // rows = time

  Eigen::Index row(double t) const;
  double time(Eigen::Index i) const { return t0 + static_cast<double>(i) * params.dt; }
  Eigen::MatrixXd X_between(double a, double b) const;
  Eigen::MatrixXd U_between(double a, double b) const;
  Trajectory slow_trajectory(double a, double b) const;
};

// Spins the full model up from a random state at t = 0 and records [t0, t1].
TruthData generate_truth(const ModelParams& p, double t0, double t1, std::uint64_t seed, Exec exec);
TruthData generate_truth(const ExperimentConfig& c);

struct FittedModels {
  WilksModel wilks;
  CsFitDiagnostics cs_diag;
  std::map<std::string, SparseModel> cs;  // keyed by method name

  std::shared_ptr<const Parameterization> closure(const std::string& method) const;
};

FittedModels fit_models(const TruthData& truth, const ExperimentConfig& c);

// Training residuals U - f(X), one row per training time.
Eigen::MatrixXd training_residuals(const TruthData& truth, const Parameterization& f, const ExperimentConfig& c);

struct MethodMetrics {
  std::string method;
  double mspe = std::numeric_limits<double>::quiet_NaN();
  double avg_kl = std::numeric_limits<double>::quiet_NaN();
  std::optional<ARModel> ar;
  double mspe_deterministic = std::numeric_limits<double>::quiet_NaN();
  double enkf_mspe = std::numeric_limits<double>::quiet_NaN();
  double free_run_mspe = std::numeric_limits<double>::quiet_NaN();
  bool blew_up = false;
  std::string note;
};

struct MetricsReport {
  std::string experiment;
  std::vector<MethodMetrics> rows;
  json extra = json::object();
  json seeds = json::object();

  const MethodMetrics& row(const std::string& method) const;
};

json to_json(const MetricsReport& r, const ExperimentConfig& c);

// MSPE over [test_t0, test_t0 + horizon] from X(test_t0), deterministic model.
double horizon_mspe(const TruthData& truth, const ReducedModel& model, const ExperimentConfig& c);
// Mean over realizations for stochastic models.
double horizon_mspe_stochastic(const TruthData& truth, const ReducedModel& model, const ExperimentConfig& c,
                               std::uint64_t seed);
// Average per-component KL between truth and a model run from X(kl_t0) to test_t1.
double long_run_kl(const TruthData& truth, const ReducedModel& model, const ExperimentConfig& c, std::uint64_t seed);

struct Table1Result {
  LyapunovResult spectrum;
  json summary;
};
Table1Result run_table1(const ExperimentConfig& c);

MetricsReport run_table2(const TruthData& truth, const FittedModels& fits, const ExperimentConfig& c);

struct ArFits {
  ARModel wilks, cs;
};
ArFits fit_residual_models(const TruthData& truth, const FittedModels& fits, const ExperimentConfig& c);
MetricsReport run_table3(const TruthData& truth, const FittedModels& fits, const ArFits& ar,
                         const ExperimentConfig& c);

// Variants: wilks, cs, ar-wilks, ar-cs. The cs model is the noisy-bias model.
struct EnkfRun {
  std::string variant;
  AssimilationResult assimilated;
  AssimilationResult free_run;
};
std::vector<EnkfRun> run_enkf_variants(const TruthData& truth, const FittedModels& fits, const ArFits& ar,
                                       const ExperimentConfig& c, const std::vector<std::string>& variants);
MetricsReport run_table4(const std::vector<EnkfRun>& runs);

// Degree-2 locality, degree-3 subset stage and the restricted degree-4 average.
struct CsStagesReport {
  AveragedModel degree2;
  LocalityReport locality;
  AveragedModel degree3;
  std::vector<std::vector<MultiIndex>> degree3_relevant;
  AveragedModel degree4;  // raw biases
};
CsStagesReport run_cs_stages(const TruthData& truth, const FittedModels& fits, const ExperimentConfig& c);
json to_json(const AveragedModel& m);

// Writes plot-ready CSVs for figures 2-9 into `dir`. Throws ConfigError for an
// unknown figure id.
void emit_figure_data(int figure, const ExperimentConfig& c, const std::string& dir);

}  // namespace l96
