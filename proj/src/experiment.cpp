#include "l96/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "l96/ar.hpp"
#include "l96/errors.hpp"
#include "l96/stats.hpp"

namespace l96 {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool on_grid(double t, double dt) { return std::abs(t / dt - std::round(t / dt)) < 1e-6; }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

// ---- configuration ----------------------------------------------------------

void ExperimentConfig::validate() const {
  model.validate();
  const double dt = model.dt;
  require(train_t0 >= 0.0, "train_t0: must be >= 0");
  require(train_t0 < train_t1, "train_t1: must exceed train_t0");
  require(train_t1 <= test_t0, "test_t0: training and test windows may share only an endpoint");
  require(test_t0 < test_t1, "test_t1: must exceed test_t0");
  require(horizon > 0.0, "horizon: must be positive");
  require(test_t0 + horizon <= test_t1, "horizon: must fit inside the test window");
  require(kl_t0 >= 0.0 && kl_t0 < test_t1, "kl_t0: must lie before test_t1");
  for (double t : {train_t0, train_t1, test_t0, test_t1, horizon, kl_t0, enkf_t0, enkf_t1})
    require(on_grid(t, dt), "windows: every time must be a multiple of dt");
  require(!methods.empty(), "methods: at least one method is required");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    require(std::find(all_methods().begin(), all_methods().end(), m) != all_methods().end(),
            "methods: unknown method '" + m + "'");
    require(seen.insert(m).second, "methods: duplicate method '" + m + "'");
  }
  require(cs_degree >= 1 && cs_degree <= 8, "cs_degree: must be in [1, 8]");
  require(cv_folds >= 2, "cv_folds: must be >= 2");
  require(lambda_grid >= 1, "lambda_grid: must be >= 1");
  require(lambda_ratio > 0.0 && lambda_ratio < 1.0, "lambda_ratio: must be in (0, 1)");
  require(fit_stride >= 1, "fit_stride: must be >= 1");
  require(stage_stride >= 1, "stage_stride: must be >= 1");
  require(bias_sigma >= 0.0, "bias_sigma: must be >= 0");
  require(degree3_repetitions >= 1, "degree3_repetitions: must be >= 1");
  require(degree3_random >= 0, "degree3_random: must be >= 0");
  require(relevance > 0.0 && relevance < 1.0, "relevance: must be in (0, 1)");
  require(kde_stride >= 1, "kde_stride: must be >= 1");
  require(kl_grid >= 16, "kl_grid: must be >= 16");
  require(ar_realizations >= 1, "ar_realizations: must be >= 1");
  require(enkf_members >= 2, "enkf_members: must be >= 2");
  require(enkf_every >= 1, "enkf_every: must be >= 1");
  require(obs_variance > 0.0, "obs_variance: must be positive");
  require(initial_spread >= 0.0, "initial_spread: must be >= 0");
  require(enkf_t0 < enkf_t1, "enkf_t1: must exceed enkf_t0");
  require(enkf_t0 >= std::min({train_t0, kl_t0}) && enkf_t1 <= test_t1,
          "enkf window: must lie inside the simulated truth");
  require(steps_between(enkf_t0, enkf_t1, dt) % enkf_every == 0,
          "enkf_every: must divide the number of steps in the enkf window");
  require(acf_max_lag >= 1, "acf_max_lag: must be >= 1");
  lyapunov.validate();
}

ModelParams ExperimentConfig::lyapunov_params() const {
  ModelParams p = model;
  p.h = 0.0;
  return p;
}

json to_json(const ExperimentConfig& c) {
  return json{{"model", to_json(c.model)},
              {"train_t0", c.train_t0},
              {"train_t1", c.train_t1},
              {"test_t0", c.test_t0},
              {"test_t1", c.test_t1},
              {"horizon", c.horizon},
              {"kl_t0", c.kl_t0},
              {"methods", c.methods},
              {"ar", c.ar},
              {"cs_degree", c.cs_degree},
              {"cv_folds", c.cv_folds},
              {"lambda_grid", c.lambda_grid},
              {"lambda_ratio", c.lambda_ratio},
              {"fit_stride", c.fit_stride},
              {"bias_sigma", c.bias_sigma},
              {"stage_stride", c.stage_stride},
              {"degree3_repetitions", c.degree3_repetitions},
              {"degree3_random", c.degree3_random},
              {"relevance", c.relevance},
              {"kde_stride", c.kde_stride},
              {"kl_grid", c.kl_grid},
              {"ar_realizations", c.ar_realizations},
              {"enkf_members", c.enkf_members},
              {"enkf_every", c.enkf_every},
              {"obs_variance", c.obs_variance},
              {"enkf_t0", c.enkf_t0},
              {"enkf_t1", c.enkf_t1},
              {"initial_spread", c.initial_spread},
              {"lyapunov",
               {{"spinup", c.lyapunov.spinup},
                {"renorm_interval", c.lyapunov.renorm_interval},
                {"total_time", c.lyapunov.total_time},
                {"dt", c.lyapunov.dt}}},
              {"acf_max_lag", c.acf_max_lag},
              {"seed", c.seed},
              {"parallel", c.exec == Exec::parallel}};
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "model") c.model = params_from_json(v, c.model);
      else if (key == "train_t0") c.train_t0 = v.get<double>();
      else if (key == "train_t1") c.train_t1 = v.get<double>();
      else if (key == "test_t0") c.test_t0 = v.get<double>();
      else if (key == "test_t1") c.test_t1 = v.get<double>();
      else if (key == "horizon") c.horizon = v.get<double>();
      else if (key == "kl_t0") c.kl_t0 = v.get<double>();
      else if (key == "methods") c.methods = v.get<std::vector<std::string>>();
      else if (key == "ar") c.ar = v.get<bool>();
      else if (key == "cs_degree") c.cs_degree = v.get<int>();
      else if (key == "cv_folds") c.cv_folds = v.get<int>();
      else if (key == "lambda_grid") c.lambda_grid = v.get<int>();
      else if (key == "lambda_ratio") c.lambda_ratio = v.get<double>();
      else if (key == "fit_stride") c.fit_stride = v.get<int>();
      else if (key == "bias_sigma") c.bias_sigma = v.get<double>();
      else if (key == "stage_stride") c.stage_stride = v.get<int>();
      else if (key == "degree3_repetitions") c.degree3_repetitions = v.get<int>();
      else if (key == "degree3_random") c.degree3_random = v.get<int>();
      else if (key == "relevance") c.relevance = v.get<double>();
      else if (key == "kde_stride") c.kde_stride = v.get<int>();
      else if (key == "kl_grid") c.kl_grid = v.get<int>();
      else if (key == "ar_realizations") c.ar_realizations = v.get<int>();
      else if (key == "enkf_members") c.enkf_members = v.get<int>();
      else if (key == "enkf_every") c.enkf_every = v.get<int>();
      else if (key == "obs_variance") c.obs_variance = v.get<double>();
      else if (key == "enkf_t0") c.enkf_t0 = v.get<double>();
      else if (key == "enkf_t1") c.enkf_t1 = v.get<double>();
      else if (key == "initial_spread") c.initial_spread = v.get<double>();
      else if (key == "acf_max_lag") c.acf_max_lag = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "parallel") c.exec = v.get<bool>() ? Exec::parallel : Exec::serial;
      else if (key == "lyapunov") {
        if (!v.is_object()) throw ConfigError("lyapunov: expected an object");
        for (const auto& [lk, lv] : v.items()) {
          if (lk == "spinup") c.lyapunov.spinup = lv.get<double>();
          else if (lk == "renorm_interval") c.lyapunov.renorm_interval = lv.get<double>();
          else if (lk == "total_time") c.lyapunov.total_time = lv.get<double>();
          else if (lk == "dt") c.lyapunov.dt = lv.get<double>();
          else throw ConfigError("lyapunov." + lk + ": unknown field");
        }
      } else {
        throw ConfigError(key + ": unknown field");
      }
    } catch (const json::exception&) {
      throw ConfigError(key + ": wrong type");
    }
  }
  c.validate();
  return c;
}

std::uint64_t stage_seed(const ExperimentConfig& c, const char* stage) { return sub_seed(c.seed, stage); }

// ---- truth ---------------------------------------------------------------------

Eigen::Index TruthData::row(double t) const {
  const long r = std::lround((t - t0) / params.dt);
  require(r >= 0 && r < X.rows(), "truth: time outside the recorded window");
  return r;
}

Eigen::MatrixXd TruthData::X_between(double a, double b) const {
  const Eigen::Index i0 = row(a), i1 = row(b);
  return X.middleRows(i0, i1 - i0 + 1);
}

Eigen::MatrixXd TruthData::U_between(double a, double b) const {
  const Eigen::Index i0 = row(a), i1 = row(b);
  return U.middleRows(i0, i1 - i0 + 1);
}

Trajectory TruthData::slow_trajectory(double a, double b) const {
  Trajectory tr;
  const Eigen::Index i0 = row(a), i1 = row(b);
  tr.states = X.middleRows(i0, i1 - i0 + 1);
  for (Eigen::Index i = i0; i <= i1; ++i) tr.times.push_back(time(i));
  return tr;
}

TruthData generate_truth(const ModelParams& p, double t0, double t1, std::uint64_t seed, Exec exec) {
  p.validate();
  require(t0 >= 0.0 && t0 < t1, "generate_truth: need 0 <= t0 < t1");
  Rng rng = make_rng(seed);
  Eigen::VectorXd x = random_initial_state(p, rng).packed();
  Rk4 rk(x.size());
  auto rhs = [&](const Eigen::VectorXd& s, Eigen::VectorXd& out) { full_rhs(s, p, out, exec); };
  const long spin = steps_between(0.0, t0, p.dt);
  const long n = steps_between(t0, t1, p.dt);
  auto guarded_step = [&](long i) {
    rk.step(rhs, x, p.dt);
    if (x.cwiseAbs().maxCoeff() > 1e8)
      throw BlowUpError("truth integration diverged", static_cast<double>(i) * p.dt);
  };
  for (long i = 0; i < spin; ++i) guarded_step(i + 1);
  TruthData td;
  td.params = p;
  td.t0 = t0;
  td.X.resize(n + 1, p.K);
  td.U.resize(n + 1, p.K);
  auto record = [&](long r) {
    td.X.row(r) = x.head(p.K).transpose();
    td.U.row(r) = coupling_forcing(x.tail(p.fast_dim()), p).transpose();
  };
  record(0);
  for (long i = 1; i <= n; ++i) {
    guarded_step(spin + i);
    record(i);
  }
  return td;
}

TruthData generate_truth(const ExperimentConfig& c) {
  c.validate();
  const double a = std::min({c.train_t0, c.kl_t0, c.enkf_t0});
  const double b = std::max(c.test_t1, c.enkf_t1);
  return generate_truth(c.model, a, b, stage_seed(c, "truth"), c.exec);
}

// ---- fits ------------------------------------------------------------------------

std::shared_ptr<const Parameterization> FittedModels::closure(const std::string& method) const {
  if (method == "wilks") return wilks.closure();
  const auto it = cs.find(method);
  if (it == cs.end()) throw ConfigError("no fitted model for method '" + method + "'");
  return std::make_shared<SparseModel>(it->second);
}

FittedModels fit_models(const TruthData& truth, const ExperimentConfig& c) {
  const Eigen::MatrixXd X = truth.X_between(c.train_t0, c.train_t1);
  const Eigen::MatrixXd U = truth.U_between(c.train_t0, c.train_t1);
  FittedModels f;
  f.wilks = fit_wilks(X, U);
  f.wilks.train_t0 = c.train_t0;
  f.wilks.train_t1 = c.train_t1;

  CsFitOptions opt;
  opt.cv_folds = c.cv_folds;
  opt.grid_size = c.lambda_grid;
  opt.grid_ratio = c.lambda_ratio;
  opt.stride = c.fit_stride;
  opt.exec = c.exec;
  SparseModel raw = fit_cs_parameterization(X, U, CsDictionarySpec::own_powers(c.cs_degree), opt, &f.cs_diag);
  raw.train_t0 = c.train_t0;
  raw.train_t1 = c.train_t1;
  const std::uint64_t bias_seed = stage_seed(c, "bias-noise");
  f.cs["cs-raw"] = raw;
  f.cs["cs-zero-bias"] = apply_bias_mode(raw, BiasMode::zero, 0.0, bias_seed);
  f.cs["cs-avg-bias"] = apply_bias_mode(raw, BiasMode::average, 0.0, bias_seed);
  f.cs["cs-noisy-bias"] = apply_bias_mode(raw, BiasMode::average_plus_noise, c.bias_sigma, bias_seed);
  return f;
}

Eigen::MatrixXd training_residuals(const TruthData& truth, const Parameterization& f, const ExperimentConfig& c) {
  const Eigen::MatrixXd X = truth.X_between(c.train_t0, c.train_t1);
  Eigen::MatrixXd R = truth.U_between(c.train_t0, c.train_t1);
  Eigen::VectorXd out(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    f.evaluate(X.row(i).transpose(), out);
    R.row(i) -= out.transpose();
  }
  return R;
}

// ---- scoring -------------------------------------------------------------------

namespace {

Eigen::MatrixXd run_reduced(const ReducedModel& model, const Eigen::VectorXd& x0, long steps, int every, Rng& rng) {
  ReducedIntegrator integ(model);
  ReducedState s{x0, Eigen::VectorXd::Zero(x0.size())};
  Eigen::MatrixXd out(steps / every + 1, x0.size());
  out.row(0) = x0.transpose();
  for (long i = 1; i <= steps; ++i) {
    integ.step(s, rng);
    if (s.X.cwiseAbs().maxCoeff() > 1e8)
      throw BlowUpError("reduced model diverged", static_cast<double>(i) * model.params.dt);
    if (i % every == 0) out.row(i / every) = s.X.transpose();
  }
  return out;
}

Eigen::MatrixXd stride_rows(const Eigen::MatrixXd& M, int stride) {
  Eigen::MatrixXd out((M.rows() + stride - 1) / stride, M.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = M.row(i * stride);
  return out;
}

}  // namespace

double horizon_mspe(const TruthData& truth, const ReducedModel& model, const ExperimentConfig& c) {
  const long steps = steps_between(0.0, c.horizon, c.model.dt);
  Rng unused = make_rng(0);
  const Eigen::MatrixXd pred = run_reduced(model, truth.X.row(truth.row(c.test_t0)).transpose(), steps, 1, unused);
  return mspe(truth.X_between(c.test_t0, c.test_t0 + c.horizon), pred);
}

double horizon_mspe_stochastic(const TruthData& truth, const ReducedModel& model, const ExperimentConfig& c,
                               std::uint64_t seed) {
  const long steps = steps_between(0.0, c.horizon, c.model.dt);
  const Eigen::VectorXd x0 = truth.X.row(truth.row(c.test_t0)).transpose();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(steps + 1, x0.size());
  for (int r = 0; r < c.ar_realizations; ++r) {
    Rng rng = make_rng(sub_seed(seed, static_cast<std::uint64_t>(r)));
    mean += run_reduced(model, x0, steps, 1, rng);
  }
  mean /= c.ar_realizations;
  return mspe(truth.X_between(c.test_t0, c.test_t0 + c.horizon), mean);
}

double long_run_kl(const TruthData& truth, const ReducedModel& model, const ExperimentConfig& c, std::uint64_t seed) {
  const long steps = steps_between(c.kl_t0, c.test_t1, c.model.dt);
  Rng rng = make_rng(seed);
  const Eigen::MatrixXd pred =
      run_reduced(model, truth.X.row(truth.row(c.kl_t0)).transpose(), steps, c.kde_stride, rng);
  const Eigen::MatrixXd ref = stride_rows(truth.X_between(c.kl_t0, c.test_t1), c.kde_stride);
  KlOptions opt;
  opt.grid_points = c.kl_grid;
  return average_kl(ref, pred.topRows(ref.rows()), opt, c.exec);
}

const MethodMetrics& MetricsReport::row(const std::string& method) const {
  for (const auto& r : rows)
    if (r.method == method) return r;
  throw ConfigError(experiment + ": no row for '" + method + "'");
}

json to_json(const MetricsReport& r, const ExperimentConfig& c) {
  json rows = json::array();
  for (const auto& m : r.rows) {
    json j{{"method", m.method}};
    if (!std::isnan(m.mspe)) j["mspe"] = number_or_null(m.mspe);
    if (!std::isnan(m.avg_kl)) j["avg_kl"] = number_or_null(m.avg_kl);
    if (m.ar) {
      j["phi"] = m.ar->phi;
      j["sigma"] = m.ar->sigma;
      j["sigma_e"] = number_or_null(m.ar->sigma_e);
    }
    if (!std::isnan(m.mspe_deterministic)) j["mspe_deterministic"] = number_or_null(m.mspe_deterministic);
    if (!std::isnan(m.enkf_mspe)) j["enkf_mspe"] = number_or_null(m.enkf_mspe);
    if (!std::isnan(m.free_run_mspe)) j["free_run_mspe"] = number_or_null(m.free_run_mspe);
    j["blew_up"] = m.blew_up;
    if (!m.note.empty()) j["note"] = m.note;
    rows.push_back(j);
  }
  json seeds{{"master", c.seed}};
  for (const char* s : {"truth", "bias-noise", "ar", "enkf", "lyapunov", "degree3"}) seeds[s] = stage_seed(c, s);
  for (const auto& [k, v] : r.seeds.items()) seeds[k] = v;
  json out{{"experiment", r.experiment}, {"rows", rows}, {"seeds", seeds}, {"config", to_json(c)}};
  if (!r.extra.empty()) out["extra"] = r.extra;
  return out;
}

// ---- tables ---------------------------------------------------------------------

Table1Result run_table1(const ExperimentConfig& c) {
  c.validate();
  LyapunovConfig lc = c.lyapunov;
  lc.exec = c.exec;
  Rng rng = make_rng(stage_seed(c, "lyapunov"));
  Table1Result t;
  t.spectrum = lyapunov_spectrum(c.lyapunov_params(), lc, rng);
  t.summary = lyapunov_summary(t.spectrum);
  return t;
}

MetricsReport run_table2(const TruthData& truth, const FittedModels& fits, const ExperimentConfig& c) {
  MetricsReport rep;
  rep.experiment = "table2";
  for (const auto& method : c.methods) {
    MethodMetrics m;
    m.method = method;
    const ReducedModel model{c.model, fits.closure(method), {}};
    try {
      m.mspe = horizon_mspe(truth, model, c);
    } catch (const BlowUpError& e) {
      m.mspe = kInf;
      m.blew_up = true;
      m.note = "horizon run diverged at t+" + format_double(e.time());
    }
    try {
      m.avg_kl = long_run_kl(truth, model, c, 0);
    } catch (const BlowUpError& e) {
      m.avg_kl = kInf;
      m.blew_up = true;
      m.note += (m.note.empty() ? "" : "; ") + std::string("long run diverged at t+") + format_double(e.time());
    }
    rep.rows.push_back(m);
  }
  return rep;
}

ArFits fit_residual_models(const TruthData& truth, const FittedModels& fits, const ExperimentConfig& c) {
  ArFits a;
  a.wilks = fit_ar1(training_residuals(truth, *fits.closure("wilks"), c));
  a.cs = fit_ar1(training_residuals(truth, *fits.closure("cs-noisy-bias"), c));
  return a;
}

MetricsReport run_table3(const TruthData& truth, const FittedModels& fits, const ArFits& ar,
                         const ExperimentConfig& c) {
  MetricsReport rep;
  rep.experiment = "table3";
  const std::uint64_t seed = stage_seed(c, "ar");
  const std::pair<const char*, const char*> methods[] = {{"wilks", "wilks"}, {"cs", "cs-noisy-bias"}};
  for (const auto& [name, source] : methods) {
    MethodMetrics m;
    m.method = name;
    m.ar = std::string(name) == "wilks" ? ar.wilks : ar.cs;
    const auto closure = fits.closure(source);
    const ReducedModel det{c.model, closure, {}};
    ReducedModel sto{c.model, closure, {*m.ar}};
    try {
      m.mspe_deterministic = horizon_mspe(truth, det, c);
    } catch (const BlowUpError&) {
      m.mspe_deterministic = kInf;
      m.blew_up = true;
    }
    if (!m.ar->stationary) {
      m.note = "non-stationary AR fit; stochastic runs skipped";
      rep.rows.push_back(m);
      continue;
    }
    try {
      m.mspe = horizon_mspe_stochastic(truth, sto, c, sub_seed(seed, std::string(name) + "/horizon"));
      m.avg_kl = long_run_kl(truth, sto, c, sub_seed(seed, std::string(name) + "/long"));
    } catch (const BlowUpError& e) {
      m.blew_up = true;
      m.note = "stochastic run diverged at t+" + format_double(e.time());
    }
    rep.rows.push_back(m);
  }
  rep.extra["mspe_definition"] = "mean over ar_realizations stochastic runs, then MSPE";
  return rep;
}

std::vector<EnkfRun> run_enkf_variants(const TruthData& truth, const FittedModels& fits, const ArFits& ar,
                                       const ExperimentConfig& c, const std::vector<std::string>& variants) {
  const Trajectory tr = truth.slow_trajectory(c.enkf_t0, c.enkf_t1);
  std::vector<EnkfRun> runs;
  for (const auto& v : variants) {
    const bool is_ar = v.rfind("ar-", 0) == 0;
    const std::string base = is_ar ? v.substr(3) : v;
    require(base == "wilks" || base == "cs", "enkf variant: expected wilks, cs, ar-wilks or ar-cs, got '" + v + "'");
    const ARModel& fitted = base == "wilks" ? ar.wilks : ar.cs;
    const ReducedModel model{c.model, fits.closure(base == "wilks" ? "wilks" : "cs-noisy-bias"), {}};
    AssimilationConfig ac;
    ac.members = c.enkf_members;
    ac.initial_spread = c.initial_spread;
    ac.obs = ObservationModel::identity(c.model.K, c.obs_variance, c.enkf_every);
    ac.noise = is_ar ? NoiseSpec::autoregressive({fitted})
                     : NoiseSpec::gaussian(fitted.sigma * fitted.sigma *
                                           Eigen::MatrixXd::Identity(c.model.K, c.model.K));
    ac.seed = stage_seed(c, "enkf");
    ac.exec = c.exec;
    EnkfRun run;
    run.variant = v;
    run.assimilated = run_assimilation(tr, model, ac);
    ac.assimilate = false;
    try {
      run.free_run = run_assimilation(tr, model, ac);
    } catch (const NumericalError&) {
      run.free_run.mspe = kInf;
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

MetricsReport run_table4(const std::vector<EnkfRun>& runs) {
  MetricsReport rep;
  rep.experiment = "table4";
  for (const auto& r : runs) {
    MethodMetrics m;
    m.method = r.variant;
    m.enkf_mspe = r.assimilated.mspe;
    m.free_run_mspe = r.free_run.mspe;
    rep.rows.push_back(m);
  }
  return rep;
}

// ---- compressed-sensing stages ---------------------------------------------------

json to_json(const AveragedModel& m) {
  json terms = json::object();
  for (const auto& [mono, coef] : m.coefficients) terms[mono.to_string()] = coef;
  return json{{"bias", m.bias}, {"terms", terms}};
}

CsStagesReport run_cs_stages(const TruthData& truth, const FittedModels& fits, const ExperimentConfig& c) {
  const Eigen::MatrixXd X = truth.X_between(c.train_t0, c.train_t1);
  const Eigen::MatrixXd U = truth.U_between(c.train_t0, c.train_t1);
  const int K = c.model.K;
  CsFitOptions opt;
  opt.cv_folds = c.cv_folds;
  opt.grid_size = c.lambda_grid;
  opt.grid_ratio = c.lambda_ratio;
  opt.stride = c.stage_stride;
  opt.exec = c.exec;

  CsStagesReport rep;
  const auto spec2 = CsDictionarySpec::shared_columns(enumerate_monomials(K, 2, DegreeMode::up_to));
  CsFitDiagnostics diag2;
  const SparseModel deg2 = fit_cs_parameterization(X, U, spec2, opt, &diag2);
  rep.degree2 = average_coefficients(deg2);
  rep.locality = locality_report(deg2, diag2, spec2, c.relevance);

  SubsetStageOptions so;
  so.repetitions = c.degree3_repetitions;
  so.k_random = c.degree3_random;
  so.relevance = c.relevance;
  so.fit = opt;
  for (int m = 0; m < K; ++m) so.base.push_back(MultiIndex::power(m, 1));
  for (int m = 0; m < K; ++m) so.base.push_back(MultiIndex::power(m, 2));
  const SubsetStageResult s3 = degree3_subset_stage(X, U, so, stage_seed(c, "degree3"));
  rep.degree3 = s3.averaged;
  rep.degree3_relevant = s3.relevant;

  rep.degree4 = average_coefficients(fits.cs.at("cs-raw"));
  return rep;
}

// ---- figures ---------------------------------------------------------------------

namespace {

std::vector<std::string> numbered(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void write_enkf_panels(const EnkfRun& run, const std::string& dir, const std::string& stem, int components) {
  const auto& a = run.assimilated;
  const int K = static_cast<int>(a.truth.cols());
  const int n = std::min(components, K);
  const Eigen::Index rows = a.truth.rows();
  std::vector<std::string> header{"t"};
  for (const auto& h : numbered("truth_", n)) header.push_back(h);
  for (const auto& h : numbered("mean_", n)) header.push_back(h);
  header.push_back("l1_error");
  Eigen::MatrixXd data(rows, 2 * n + 2);
  for (Eigen::Index i = 0; i < rows; ++i) data(i, 0) = a.times[i];
  data.middleCols(1, n) = a.truth.leftCols(n);
  data.middleCols(1 + n, n) = a.mean.leftCols(n);
  data.col(2 * n + 1) = a.l1_error;
  write_csv(dir + "/" + stem + ".csv", header, data);

  std::vector<std::string> oh{"t"};
  for (const auto& h : numbered("y_", n)) oh.push_back(h);
  const auto& obs = a.observations;
  Eigen::MatrixXd od(obs.values.rows(), n + 1);
  for (Eigen::Index j = 0; j < od.rows(); ++j) od(j, 0) = obs.times[j];
  od.rightCols(n) = obs.values.leftCols(n);
  write_csv(dir + "/" + stem + "_observations.csv", oh, od);
}

}  // namespace

void emit_figure_data(int figure, const ExperimentConfig& c, const std::string& dir) {
  require(figure >= 2 && figure <= 9, "figure: expected an id in 2..9 (figure 1 is a schematic)");
  c.validate();
  ensure_directory(dir);
  if (figure == 2) {
    const Table1Result t = run_table1(c);
    std::vector<std::string> header{"t"};
    for (const auto& h : numbered("lambda_", t.spectrum.dimension)) header.push_back(h);
    write_csv(dir + "/fig2_lyapunov_history.csv", header, t.spectrum.history);
    return;
  }
  const TruthData truth = generate_truth(c);
  if (figure == 4) {
    const Eigen::VectorXd x1 = truth.X_between(c.kl_t0, c.test_t1).col(0);
    const Eigen::VectorXd r = acf_normalized(x1, c.acf_max_lag);
    Eigen::MatrixXd data(r.size(), 2);
    for (Eigen::Index m = 0; m < r.size(); ++m) data(m, 0) = static_cast<double>(m) * c.model.dt;
    data.col(1) = r;
    write_csv(dir + "/fig4_acf_X1.csv", {"lag", "acf"}, data);
    return;
  }
  const FittedModels fits = fit_models(truth, c);
  if (figure == 3) {
    const Eigen::MatrixXd ref = stride_rows(truth.X_between(c.kl_t0, c.test_t1), c.kde_stride);
    std::vector<std::pair<std::string, Eigen::MatrixXd>> runs;
    const long steps = steps_between(c.kl_t0, c.test_t1, c.model.dt);
    for (const auto& method : c.methods) {
      Rng rng = make_rng(0);
      try {
        runs.emplace_back(method, run_reduced({c.model, fits.closure(method), {}},
                                              truth.X.row(truth.row(c.kl_t0)).transpose(), steps, c.kde_stride,
                                              rng));
      } catch (const BlowUpError&) {
        // Diverged models have no density to draw.
      }
    }
    for (int comp : {1, 8, 19, 31}) {
      if (comp > c.model.K) continue;
      const Eigen::VectorXd truth_samples = ref.col(comp - 1);
      const double bw = silverman_bandwidth(truth_samples);
      const Eigen::VectorXd grid =
          uniform_grid(truth_samples.minCoeff() - 3 * bw, truth_samples.maxCoeff() + 3 * bw, c.kl_grid);
      std::vector<std::string> header{"x", "truth"};
      Eigen::MatrixXd data(grid.size(), 2 + runs.size());
      data.col(0) = grid;
      data.col(1) = kde(truth_samples, grid, bw, c.exec).density;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        const Eigen::VectorXd s = runs[r].second.col(comp - 1);
        data.col(2 + r) = kde(s, grid, silverman_bandwidth(s), c.exec).density;
        header.push_back(runs[r].first);
      }
      write_csv(dir + "/fig3_pdf_X" + std::to_string(comp) + ".csv", header, data);
    }
    return;
  }
  const ArFits ar = fit_residual_models(truth, fits, c);
  if (figure == 5 || figure == 7) {
    const auto runs = run_enkf_variants(truth, fits, ar, c, {"ar-wilks"});
    write_enkf_panels(runs[0], dir, figure == 5 ? "fig5_ar_wilks_first3" : "fig7_ar_wilks_all",
                      figure == 5 ? 3 : c.model.K);
    return;
  }
  if (figure == 6 || figure == 8) {
    const auto runs = run_enkf_variants(truth, fits, ar, c, {"ar-cs"});
    write_enkf_panels(runs[0], dir, figure == 6 ? "fig6_ar_cs_first3" : "fig8_ar_cs_all", figure == 6 ? 3 : c.model.K);
    return;
  }
  // figure 9: L1 error of every variant, assimilated and free-running.
  const auto runs = run_enkf_variants(truth, fits, ar, c, {"wilks", "cs", "ar-wilks", "ar-cs"});
  std::vector<std::string> header{"t"};
  const Eigen::Index rows = runs[0].assimilated.truth.rows();
  Eigen::MatrixXd data(rows, 1 + 2 * runs.size());
  for (Eigen::Index i = 0; i < rows; ++i) data(i, 0) = runs[0].assimilated.times[i];
  for (std::size_t r = 0; r < runs.size(); ++r) {
    header.push_back(runs[r].variant + "_enkf");
    header.push_back(runs[r].variant + "_free");
    data.col(1 + 2 * r) = runs[r].assimilated.l1_error;
    if (runs[r].free_run.l1_error.size() == rows)
      data.col(2 + 2 * r) = runs[r].free_run.l1_error;
    else
      data.col(2 + 2 * r).setConstant(kNaN);
  }
  write_csv(dir + "/fig9_l1_errors.csv", header, data);
}

}  // namespace l96
