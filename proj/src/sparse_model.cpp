#include "l96/sparse_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "l96/errors.hpp"

namespace l96 {

std::string to_string(BiasMode m) {
  switch (m) {
    case BiasMode::raw: return "raw";
    case BiasMode::zero: return "zero";
    case BiasMode::average: return "average";
    case BiasMode::average_plus_noise: return "average_plus_noise";
  }
  return "raw";
}

BiasMode bias_mode_from_string(const std::string& s) {
  if (s == "raw") return BiasMode::raw;
  if (s == "zero") return BiasMode::zero;
  if (s == "average") return BiasMode::average;
  if (s == "average_plus_noise") return BiasMode::average_plus_noise;
  throw ConfigError("unknown bias mode '" + s + "'");
}

void SparseModel::evaluate(const Eigen::Ref<const Eigen::VectorXd>& X,
                           Eigen::Ref<Eigen::VectorXd> out) const {
  for (int k = 0; k < K; ++k) {
    double v = bias[k];
    for (const auto& t : terms[k]) v += t.coefficient * t.monomial.evaluate(X);
    out[k] = v;
  }
}

double SparseModel::coefficient(int k, const MultiIndex& m) const {
  for (const auto& t : terms.at(k))
    if (t.monomial == m) return t.coefficient;
  return 0.0;
}

void SparseModel::validate() const {
  require(K >= 1, "SparseModel: K must be positive");
  require(static_cast<int>(terms.size()) == K && static_cast<int>(bias.size()) == K,
          "SparseModel: per-component arrays must have length K");
  for (int k = 0; k < K; ++k) {
    require(std::isfinite(bias[k]), "SparseModel: non-finite bias");
    for (const auto& t : terms[k]) {
      require(std::isfinite(t.coefficient), "SparseModel: non-finite coefficient");
      require(t.monomial.max_component() < K, "SparseModel: monomial references missing component");
    }
  }
  if (bias_mode == BiasMode::zero)
    for (double b : bias) require(b == 0.0, "SparseModel: zero bias mode with non-zero bias");
  if (bias_mode == BiasMode::average)
    for (double b : bias) require(b == bias.front(), "SparseModel: average bias mode with unequal biases");
}

CsDictionarySpec CsDictionarySpec::own_powers(int degree) {
  CsDictionarySpec s;
  s.kind = Kind::own_powers;
  s.degree = degree;
  return s;
}

CsDictionarySpec CsDictionarySpec::shared_columns(std::vector<MultiIndex> cols) {
  CsDictionarySpec s;
  s.kind = Kind::shared;
  s.shared = std::move(cols);
  return s;
}

std::vector<MultiIndex> CsDictionarySpec::columns_for(int k) const {
  if (kind == Kind::shared) return shared;
  std::vector<MultiIndex> out;
  for (int d = 1; d <= degree; ++d) out.push_back(MultiIndex::power(k, d));
  return out;
}

namespace {

struct ComponentFit {
  Eigen::VectorXd normalized;  // coefficients on the normalised problem
  double normalized_bias = 0.0;
  double lambda = 0.0;
  bool converged = true;
  std::vector<std::string> warnings;
};

ComponentFit fit_component(const std::vector<SufficientStats>& blocks, Eigen::Index t,
                           const CsFitOptions& opt, double fixed_lambda) {
  SufficientStats total = blocks.front();
  for (std::size_t f = 1; f < blocks.size(); ++f) total += blocks[f];
  ComponentFit fit;
  const GramSystem sys = gram_system(total, t, opt.intercept);
  fit.normalized = Eigen::VectorXd::Zero(sys.c.size());
  if (!(sys.yy > 1e-14 * std::max(1.0, total.yy[t]))) {
    fit.normalized_bias = opt.intercept ? total.y[t] / total.n : 0.0;
    fit.warnings.push_back("constant target; fitted intercept only");
    return fit;
  }
  if (fixed_lambda > 0.0) {
    fit.lambda = fixed_lambda;
  } else {
    const auto grid = lambda_grid(lambda_max(sys.c), opt.grid_size, opt.grid_ratio);
    CvResult cv = cross_validate_lambda(blocks, t, grid, opt.intercept, opt.lasso);
    fit.lambda = cv.lambda;
    for (auto& w : cv.warnings) fit.warnings.push_back(std::move(w));
  }
  const LassoSolution sol = lasso_gram(sys, fit.lambda, opt.lasso);
  fit.converged = sol.converged;
  fit.normalized = sol.coefficients;
  fit.normalized_bias = opt.intercept ? intercept_for(total, t, sol.coefficients) : 0.0;
  return fit;
}

Eigen::MatrixXd stride_rows(const Eigen::MatrixXd& M, int stride) {
  if (stride == 1) return M;
  const Eigen::Index rows = (M.rows() + stride - 1) / stride;
  Eigen::MatrixXd out(rows, M.cols());
  for (Eigen::Index i = 0; i < rows; ++i) out.row(i) = M.row(i * stride);
  return out;
}

}  // namespace

SparseModel fit_cs_parameterization(const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& U_train,
                                    const CsDictionarySpec& spec, const CsFitOptions& opt,
                                    CsFitDiagnostics* diag) {
  require(X_train.rows() == U_train.rows(), "fit_cs: dictionary/data row mismatch");
  require(X_train.cols() == U_train.cols(), "fit_cs: X and U must have K columns each");
  require(opt.stride >= 1, "fit_cs: stride must be >= 1");
  require(X_train.allFinite() && U_train.allFinite(), "fit_cs: non-finite training data");
  const Eigen::MatrixXd X = stride_rows(X_train, opt.stride);
  const Eigen::MatrixXd U = stride_rows(U_train, opt.stride);
  const int K = static_cast<int>(X.cols());
  const int folds = opt.lambda > 0.0 ? 1 : opt.cv_folds;
  require(folds >= 1 && X.rows() >= std::max(2, folds), "fit_cs: not enough training rows");
  if (spec.kind == CsDictionarySpec::Kind::own_powers) require(spec.degree >= 1, "fit_cs: degree >= 1");

  Eigen::VectorXd unorm = U.colwise().norm().transpose();
  Eigen::MatrixXd Y = U;
  for (int k = 0; k < K; ++k)
    if (unorm[k] > 0.0) Y.col(k) /= unorm[k];

  SparseModel model;
  model.K = K;
  model.terms.assign(K, {});
  model.bias.assign(K, 0.0);
  model.lambda.assign(K, 0.0);
  model.bias_mode = BiasMode::raw;

  std::vector<ComponentFit> fits(K);
  std::vector<std::vector<MultiIndex>> columns(K);
  std::vector<Eigen::VectorXd> colnorms(K);

  if (spec.kind == CsDictionarySpec::Kind::shared) {
    const Dictionary dict = build_dictionary(X, spec.shared, true, opt.exec);
    const auto blocks = block_stats(dict.matrix, Y, folds);
    for (int k = 0; k < K; ++k) {
      columns[k] = dict.descriptors;
      colnorms[k] = dict.norms;
    }
    auto run = [&](int k) { fits[k] = fit_component(blocks, k, opt, opt.lambda); };
    if (opt.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
      for (int k = 0; k < K; ++k) run(k);
    } else {
      for (int k = 0; k < K; ++k) run(k);
    }
    if (diag)
      for (const auto& w : dict.warnings) diag->warnings.push_back(w);
  } else {
    auto run = [&](int k) {
      const Dictionary dict = build_dictionary(X, spec.columns_for(k), true, Exec::serial);
      columns[k] = dict.descriptors;
      colnorms[k] = dict.norms;
      if (dict.matrix.cols() == 0) {
        fits[k].normalized = Eigen::VectorXd(0);
        return;
      }
      const auto blocks = block_stats(dict.matrix, Y.col(k), folds);
      fits[k] = fit_component(blocks, 0, opt, opt.lambda);
    };
    if (opt.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
      for (int k = 0; k < K; ++k) run(k);
    } else {
      for (int k = 0; k < K; ++k) run(k);
    }
  }

  for (int k = 0; k < K; ++k) {
    const ComponentFit& f = fits[k];
    model.lambda[k] = f.lambda;
    if (unorm[k] > 0.0) {
      for (Eigen::Index j = 0; j < f.normalized.size(); ++j) {
        if (f.normalized[j] == 0.0) continue;
        model.terms[k].push_back({columns[k][j], f.normalized[j] * unorm[k] / colnorms[k][j]});
      }
      model.bias[k] = f.normalized_bias * unorm[k];
    }
  }
  if (diag) {
    diag->u_norms.assign(unorm.begin(), unorm.end());
    diag->normalized_coef.clear();
    diag->column_norms = colnorms;
    diag->converged.clear();
    for (int k = 0; k < K; ++k) {
      diag->normalized_coef.push_back(fits[k].normalized);
      diag->converged.push_back(fits[k].converged);
      for (const auto& w : fits[k].warnings)
        diag->warnings.push_back("component " + std::to_string(k + 1) + ": " + w);
    }
  }
  return model;
}

SparseModel apply_bias_mode(const SparseModel& model, BiasMode mode, double sigma_bias,
                            std::uint64_t seed) {
  require(model.bias_mode == BiasMode::raw, "apply_bias_mode: model must carry raw biases");
  require(sigma_bias >= 0.0, "apply_bias_mode: sigma_bias must be non-negative");
  SparseModel out = model;
  out.bias_mode = mode;
  out.sigma_bias = mode == BiasMode::average_plus_noise ? sigma_bias : 0.0;
  out.seed = seed;
  double mean = 0.0;
  for (double b : model.bias) mean += b;
  mean /= std::max(1, model.K);
  switch (mode) {
    case BiasMode::raw: break;
    case BiasMode::zero: std::fill(out.bias.begin(), out.bias.end(), 0.0); break;
    case BiasMode::average: std::fill(out.bias.begin(), out.bias.end(), mean); break;
    case BiasMode::average_plus_noise:
      for (int k = 0; k < model.K; ++k) {
        Rng rng = make_rng(sub_seed(seed, static_cast<std::uint64_t>(k)));
        out.bias[k] = mean + sigma_bias * standard_normal(rng);
      }
      break;
  }
  return out;
}

MultiIndex relative_monomial(const MultiIndex& m, int k, int K) {
  std::vector<std::pair<int, int>> f;
  for (const auto& [c, p] : m.factors()) f.emplace_back(((c - k) % K + K) % K, p);
  return MultiIndex(std::move(f));
}

double AveragedModel::coefficient(const MultiIndex& rel) const {
  auto it = coefficients.find(rel);
  return it == coefficients.end() ? 0.0 : it->second;
}

std::vector<double> AveragedModel::own_polynomial(int degree) const {
  std::vector<double> a(degree + 1, 0.0);
  a[0] = bias;
  for (const auto& [m, c] : coefficients) {
    const auto& f = m.factors();
    if (f.size() != 1 || f.front().first != 0 || f.front().second > degree) {
      if (c == 0.0) continue;
      throw ConfigError("own_polynomial: model has non-own term " + m.to_string());
    }
    a[f.front().second] += c;
  }
  return a;
}

AveragedModel average_coefficients(const SparseModel& model) {
  require(model.K >= 1, "average_coefficients: empty model");
  AveragedModel avg;
  for (int k = 0; k < model.K; ++k) {
    for (const auto& t : model.terms[k])
      avg.coefficients[relative_monomial(t.monomial, k, model.K)] += t.coefficient / model.K;
    avg.bias += model.bias[k] / model.K;
  }
  return avg;
}

SubsetStageResult degree3_subset_stage(const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& U_train,
                                       const SubsetStageOptions& opt, std::uint64_t seed) {
  require(opt.repetitions >= 1, "degree3_subset_stage: need at least one repetition");
  const int K = static_cast<int>(X_train.cols());
  const auto pool = enumerate_monomials(K, 3, DegreeMode::exact);
  std::vector<MultiIndex> forced = opt.base;
  for (int k = 0; k < K; ++k) forced.push_back(MultiIndex::power(k, 3));

  SubsetStageResult res;
  res.mean_coefficients.assign(K, {});
  std::vector<double> mean_bias(K, 0.0);
  CsFitOptions fit = opt.fit;
  std::vector<double> lambdas;
  for (int r = 0; r < opt.repetitions; ++r) {
    Rng rng = make_rng(sub_seed(seed, static_cast<std::uint64_t>(r)));
    const auto cols = random_column_subset(pool, forced, opt.k_random, rng);
    // Lambda chosen by CV on the first repetition, then held per component.
    SparseModel m;
    if (r == 0 || fit.lambda > 0.0) {
      m = fit_cs_parameterization(X_train, U_train, CsDictionarySpec::shared_columns(cols), fit);
      lambdas = m.lambda;
    } else {
      // Per-component lambdas: refit each component with its own fixed value.
      m.K = K;
      m.terms.assign(K, {});
      m.bias.assign(K, 0.0);
      std::map<double, std::vector<int>> by_lambda;
      for (int k = 0; k < K; ++k) by_lambda[lambdas[k]].push_back(k);
      for (const auto& [lam, comps] : by_lambda) {
        CsFitOptions fixed = fit;
        fixed.lambda = lam > 0.0 ? lam : 1e-300;
        const SparseModel part =
            fit_cs_parameterization(X_train, U_train, CsDictionarySpec::shared_columns(cols), fixed);
        for (int k : comps) {
          m.terms[k] = part.terms[k];
          m.bias[k] = part.bias[k];
        }
      }
    }
    for (int k = 0; k < K; ++k) {
      for (const auto& t : m.terms[k]) res.mean_coefficients[k][t.monomial] += t.coefficient / opt.repetitions;
      mean_bias[k] += m.bias[k] / opt.repetitions;
    }
  }
  res.relevant.assign(K, {});
  SparseModel avg_input;
  avg_input.K = K;
  avg_input.terms.assign(K, {});
  avg_input.bias = mean_bias;
  for (int k = 0; k < K; ++k) {
    double largest = 0.0;
    for (const auto& [m, c] : res.mean_coefficients[k]) largest = std::max(largest, std::abs(c));
    for (const auto& [m, c] : res.mean_coefficients[k]) {
      if (std::abs(c) > opt.relevance * largest) {
        res.relevant[k].push_back(m);
        avg_input.terms[k].push_back({m, c});
      }
    }
  }
  res.averaged = average_coefficients(avg_input);
  return res;
}

LocalityReport locality_report(const SparseModel& model, const CsFitDiagnostics& diag,
                               const CsDictionarySpec& spec, double relevance) {
  LocalityReport rep;
  for (int k = 0; k < model.K; ++k) {
    const auto cols = spec.columns_for(k);
    const Eigen::VectorXd& s = diag.normalized_coef.at(k);
    require(static_cast<Eigen::Index>(cols.size()) == s.size(),
            "locality_report: diagnostics do not match the dictionary spec");
    const double largest = s.size() ? s.cwiseAbs().maxCoeff() : 0.0;
    bool any_cross = false;
    double max_cross_raw = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& f = cols[j].factors();
      const bool cross = f.size() >= 2;
      if (!cross) continue;
      if (std::abs(s[j]) > relevance * largest) any_cross = true;
      max_cross_raw = std::max(max_cross_raw, std::abs(model.coefficient(k, cols[j])));
    }
    if (!any_cross) ++rep.components_without_cross_terms;
    if (std::abs(model.coefficient(k, MultiIndex::power(k, 1))) > max_cross_raw)
      ++rep.components_own_dominant;
  }
  rep.fraction_without_cross_terms =
      model.K ? static_cast<double>(rep.components_without_cross_terms) / model.K : 0.0;
  return rep;
}

}  // namespace l96
