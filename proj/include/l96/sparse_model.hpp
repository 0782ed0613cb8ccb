#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "l96/dictionary.hpp"
#include "l96/dynamics.hpp"
#include "l96/lasso.hpp"

namespace l96 {

enum class BiasMode { raw, zero, average, average_plus_noise };

std::string to_string(BiasMode m);
BiasMode bias_mode_from_string(const std::string& s);

struct SparseTerm {
  MultiIndex monomial;
  double coefficient = 0.0;  // raw data scale
};

// Per-component sparse closure f_k(X) = bias_k + sum_q s_{k,q} theta_q(X).
class SparseModel final : public Parameterization {
 public:
  int K = 0;
  std::vector<std::vector<SparseTerm>> terms;  // nonzeros only, per component
  std::vector<double> bias;
  BiasMode bias_mode = BiasMode::raw;
  double sigma_bias = 0.0;
  std::vector<double> lambda;  // per component, normalised-problem scale
  double train_t0 = 0.0, train_t1 = 0.0;
  std::uint64_t seed = 0;

  void evaluate(const Eigen::Ref<const Eigen::VectorXd>& X, Eigen::Ref<Eigen::VectorXd> out) const override;
  double coefficient(int k, const MultiIndex& m) const;  // 0 when absent
  void validate() const;
};

// Columns used by the fit for component k.
struct CsDictionarySpec {
  enum class Kind { shared, own_powers } kind = Kind::own_powers;
  std::vector<MultiIndex> shared;  // Kind::shared: identical columns for every component
  int degree = 4;                  // Kind::own_powers: X_k, ..., X_k^degree

  static CsDictionarySpec own_powers(int degree);
  static CsDictionarySpec shared_columns(std::vector<MultiIndex> cols);
  std::vector<MultiIndex> columns_for(int k) const;
};

struct CsFitOptions {
  bool intercept = true;   // unpenalised bias per component
  double lambda = -1.0;    // > 0: fixed lambda on the normalised problem; otherwise CV
  int cv_folds = 5;
  int grid_size = 50;
  double grid_ratio = 1e-4;
  int stride = 1;          // use every stride-th training row
  LassoOptions lasso{};
  Exec exec = Exec::serial;  // across components
};

struct CsFitDiagnostics {
  std::vector<double> u_norms;                  // ||U_k|| over training rows
  std::vector<Eigen::VectorXd> normalized_coef; // per component, aligned with columns_for(k)
  std::vector<Eigen::VectorXd> column_norms;    // per component, raw column L2 norms
  std::vector<bool> converged;
  std::vector<std::string> warnings;
};

// Per-component Lasso on L2-normalised columns and targets, with coefficients
// and biases mapped back to raw scale. Biases are left in raw mode; use
// apply_bias_mode afterwards.
SparseModel fit_cs_parameterization(const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& U_train,
                                    const CsDictionarySpec& spec, const CsFitOptions& opt,
                                    CsFitDiagnostics* diag = nullptr);

// zero: all 0. average: the mean of the raw biases. average_plus_noise:
// independent Normal(mean, sigma^2) draws, one seeded stream per component.
SparseModel apply_bias_mode(const SparseModel& model, BiasMode mode, double sigma_bias,
                            std::uint64_t seed);

// Monomials keyed relative to the component they belong to: for component k,
// X_{k+o} maps to X_o (cyclic), so X_k^2 of every k becomes X_0^2.
MultiIndex relative_monomial(const MultiIndex& m, int k, int K);

struct AveragedModel {
  std::map<MultiIndex, double> coefficients;  // relative monomial -> mean coefficient
  double bias = 0.0;

  double coefficient(const MultiIndex& rel) const;
  // Ascending coefficients of the own-component polynomial a_0 + a_1 x + ...;
  // throws if any cross-component term survives.
  std::vector<double> own_polynomial(int degree) const;
};

// Arithmetic mean across components; a missing term counts as 0.
AveragedModel average_coefficients(const SparseModel& model);

// Degree-3 subset exploration: `repetitions` fits, each on base columns plus the
// forced X_k^3 set plus `k_random` random degree-3 monomials.
struct SubsetStageOptions {
  int repetitions = 100;
  int k_random = 100;
  std::vector<MultiIndex> base;  // e.g. {X_m, X_m^2}
  double relevance = 1e-3;       // relative to the largest mean |coefficient|
  CsFitOptions fit;
};

struct SubsetStageResult {
  // Mean raw coefficient per component across repetitions (absent = 0).
  std::vector<std::map<MultiIndex, double>> mean_coefficients;
  std::vector<std::vector<MultiIndex>> relevant;  // per component
  AveragedModel averaged;
};

SubsetStageResult degree3_subset_stage(const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& U_train,
                                       const SubsetStageOptions& opt, std::uint64_t seed);

struct LocalityReport {
  int components_without_cross_terms = 0;  // no X_i X_j (i != j) term is relevant
  int components_own_dominant = 0;          // |coef X_k| > every cross-term |coef|
  double fraction_without_cross_terms = 0.0;
};

// Relevance is measured on the normalised scale: |s~| > relevance * max |s~|.
LocalityReport locality_report(const SparseModel& model, const CsFitDiagnostics& diag,
                               const CsDictionarySpec& spec, double relevance);

}  // namespace l96
