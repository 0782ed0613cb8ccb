#include <CLI11.hpp>
#include <chrono>
#include <iostream>

#include "l96/experiment.hpp"
#include "l96/stats.hpp"

using namespace l96;

namespace {

struct Common {
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool serial = false;
};

ExperimentConfig load_config(const Common& g) {
  ExperimentConfig c;
  if (!g.config_path.empty()) c = experiment_config_from_json(read_json(g.config_path));
  if (g.seed) c.seed = *g.seed;
  if (g.serial) c.exec = Exec::serial;
  c.validate();
  return c;
}

void echo_config(const ExperimentConfig& c, const std::string& dir) {
  ensure_directory(dir);
  write_json(dir + "/config.json", to_json(c));
}

void print_report(const json& j) { std::cout << j.dump(2) << '\n'; }

void write_timing(const std::string& dir, const char* what, std::chrono::steady_clock::time_point start) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(dir + "/timing_" + std::string(what) + ".json", json{{"seconds", s}});
}

ReducedModel reduced_from_files(const ExperimentConfig& c, const std::string& model_path, const std::string& ar_path) {
  ReducedModel m{c.model, closure_from_json(read_json(model_path)), {}};
  if (!ar_path.empty()) m.residual.push_back(ar_model_from_json(read_json(ar_path)));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale Lorenz-96 closures: simulation, sparse fits, AR residuals and EnKF"};
  app.require_subcommand(1);
  Common g;
  app.add_option("-c,--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("-o,--out", g.out, "output directory");
  app.add_option("-s,--seed", g.seed, "master seed (overrides config)");
  app.add_flag("--serial", g.serial, "use the serial kernels");

  auto* sim = app.add_subcommand("simulate", "integrate the two-scale model and write a trajectory CSV");
  double sim_t0 = 0.0, sim_t1 = 10.0;
  int record_every = 1;
  bool with_fast = false;
  sim->add_option("--t0", sim_t0, "start of the recorded window")->capture_default_str();
  sim->add_option("--t1", sim_t1, "end time")->capture_default_str();
  sim->add_option("--record-every", record_every, "record every n steps")->capture_default_str();
  sim->add_flag("--fast", with_fast, "include the fast variables");

  auto* lyap = app.add_subcommand("lyapunov", "Lyapunov spectrum of the single-scale model (h = 0)");

  auto* fit = app.add_subcommand("fit", "fit a closure on the training window");
  fit->require_subcommand(1);
  auto* fit_wilks_cmd = fit->add_subcommand("wilks", "pooled degree-4 polynomial");
  auto* fit_cs_cmd = fit->add_subcommand("cs", "per-component sparse fit");
  std::string bias_mode = "average_plus_noise";
  std::string stage = "degree4";
  fit_cs_cmd->add_option("--bias-mode", bias_mode, "raw | zero | average | average_plus_noise")
      ->capture_default_str();
  fit_cs_cmd->add_option("--stage", stage, "degree4 | stages (degree-2 locality and degree-3 subsets too)")
      ->capture_default_str();

  auto* fit_ar = app.add_subcommand("fit-ar", "AR(1) fit of training residuals of a closure");
  std::string model_path, ar_path;
  fit_ar->add_option("--model", model_path, "closure JSON")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("evaluate", "horizon MSPE and average KL of a closure");
  eval->add_option("--model", model_path, "closure JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--ar", ar_path, "AR residual JSON")->check(CLI::ExistingFile);

  auto* enkf = app.add_subcommand("enkf", "assimilate truth observations into a reduced model");
  std::string noise = "none";
  bool free_run = false;
  enkf->add_option("--model", model_path, "closure JSON")->required()->check(CLI::ExistingFile);
  enkf->add_option("--ar", ar_path, "AR residual JSON (noise ar or gaussian)")->check(CLI::ExistingFile);
  enkf->add_option("--noise", noise, "none | gaussian | ar")->check(CLI::IsMember({"none", "gaussian", "ar"}))
      ->capture_default_str();
  enkf->add_flag("--free-run", free_run, "skip the analysis step");

  auto* repro = app.add_subcommand("reproduce", "table1..table4, cs-stages or fig2..fig9");
  std::string target;
  repro->add_option("target", target, "what to reproduce")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    const ExperimentConfig c = load_config(g);
    echo_config(c, g.out);

    if (*sim) {
      require(sim_t1 > sim_t0 && sim_t0 >= 0.0, "simulate: need 0 <= t0 < t1");
      require(record_every >= 1, "simulate: record-every must be >= 1");
      Rng rng = make_rng(stage_seed(c, "truth"));
      FullState s = random_initial_state(c.model, rng);
      SimulateOptions so;
      so.exec = c.exec;
      if (sim_t0 > 0.0) {
        SimulateOptions spin;
        spin.record_every = static_cast<int>(steps_between(0.0, sim_t0, c.model.dt));
        spin.exec = c.exec;
        const Trajectory warm = simulate(s, c.model, 0.0, sim_t0, spin);
        s = FullState::unpack(warm.states.bottomRows(1).transpose(), c.model);
      }
      so.record_every = record_every;
      const Trajectory tr = simulate(s, c.model, sim_t0, sim_t1, so);
      Trajectory out = tr;
      if (!with_fast) out.states = tr.slow(c.model.K);
      write_trajectory_csv(g.out + "/trajectory.csv", out, c.model.K);
    } else if (*lyap) {
      const Table1Result t = run_table1(c);
      std::vector<std::string> header{"t"};
      for (int i = 1; i <= t.spectrum.dimension; ++i) header.push_back("lambda_" + std::to_string(i));
      write_csv(g.out + "/lyapunov_history.csv", header, t.spectrum.history);
      write_json(g.out + "/lyapunov.json", t.summary);
      print_report(t.summary);
    } else if (*fit) {
      const TruthData truth = generate_truth(c);
      if (*fit_wilks_cmd) {
        const WilksModel w = fit_wilks(truth.X_between(c.train_t0, c.train_t1), truth.U_between(c.train_t0, c.train_t1));
        WilksModel wm = w;
        wm.train_t0 = c.train_t0;
        wm.train_t1 = c.train_t1;
        write_json(g.out + "/wilks.json", to_json(wm));
        print_report(to_json(wm));
      } else {
        const BiasMode mode = bias_mode_from_string(bias_mode);
        require(stage == "degree4" || stage == "stages", "fit cs --stage: expected degree4 or stages");
        const FittedModels fits = fit_models(truth, c);
        const char* key = mode == BiasMode::raw      ? "cs-raw"
                          : mode == BiasMode::zero   ? "cs-zero-bias"
                          : mode == BiasMode::average ? "cs-avg-bias"
                                                      : "cs-noisy-bias";
        write_json(g.out + "/cs_" + to_string(mode) + ".json", to_json(fits.cs.at(key)));
        json summary{{"averaged", to_json(average_coefficients(fits.cs.at(key)))}};
        if (stage == "stages") {
          const CsStagesReport r = run_cs_stages(truth, fits, c);
          summary["degree2"] = to_json(r.degree2);
          summary["locality"] = {{"components_without_cross_terms", r.locality.components_without_cross_terms},
                                 {"components_own_dominant", r.locality.components_own_dominant},
                                 {"fraction_without_cross_terms", r.locality.fraction_without_cross_terms}};
          summary["degree3"] = to_json(r.degree3);
          summary["degree4_raw"] = to_json(r.degree4);
        }
        write_json(g.out + "/cs_summary.json", summary);
        print_report(summary);
      }
    } else if (*fit_ar) {
      const TruthData truth = generate_truth(c);
      const auto closure = closure_from_json(read_json(model_path));
      const ARModel m = fit_ar1(training_residuals(truth, *closure, c));
      write_json(g.out + "/ar.json", to_json(m));
      print_report(to_json(m));
    } else if (*eval) {
      const TruthData truth = generate_truth(c);
      const ReducedModel m = reduced_from_files(c, model_path, ar_path);
      const std::uint64_t seed = stage_seed(c, "ar");
      const double e = m.stochastic() ? horizon_mspe_stochastic(truth, m, c, sub_seed(seed, "evaluate/horizon"))
                                      : horizon_mspe(truth, m, c);
      const double kl = long_run_kl(truth, m, c, sub_seed(seed, "evaluate/long"));
      const json j{{"mspe", e}, {"avg_kl", kl}, {"stochastic", m.stochastic()}, {"seed", c.seed}};
      write_json(g.out + "/metrics.json", j);
      print_report(j);
    } else if (*enkf) {
      const TruthData truth = generate_truth(c);
      ReducedModel m{c.model, closure_from_json(read_json(model_path)), {}};
      AssimilationConfig ac;
      ac.members = c.enkf_members;
      ac.initial_spread = c.initial_spread;
      ac.obs = ObservationModel::identity(c.model.K, c.obs_variance, c.enkf_every);
      ac.seed = stage_seed(c, "enkf");
      ac.exec = c.exec;
      ac.assimilate = !free_run;
      if (noise != "none") {
        require(!ar_path.empty(), "enkf: --noise " + noise + " needs --ar");
        const ARModel a = ar_model_from_json(read_json(ar_path));
        ac.noise = noise == "ar" ? NoiseSpec::autoregressive({a})
                                 : NoiseSpec::gaussian(a.sigma * a.sigma *
                                                       Eigen::MatrixXd::Identity(c.model.K, c.model.K));
      }
      const AssimilationResult r = run_assimilation(truth.slow_trajectory(c.enkf_t0, c.enkf_t1), m, ac);
      const int K = c.model.K;
      std::vector<std::string> header{"t"};
      for (int k = 1; k <= K; ++k) header.push_back("truth_" + std::to_string(k));
      for (int k = 1; k <= K; ++k) header.push_back("mean_" + std::to_string(k));
      header.push_back("l1_error");
      Eigen::MatrixXd data(r.truth.rows(), 2 * K + 2);
      for (Eigen::Index i = 0; i < data.rows(); ++i) data(i, 0) = r.times[i];
      data.middleCols(1, K) = r.truth;
      data.middleCols(1 + K, K) = r.mean;
      data.col(2 * K + 1) = r.l1_error;
      write_csv(g.out + "/enkf.csv", header, data);
      const json j{{"mspe", r.mspe}, {"noise", noise}, {"assimilate", !free_run}, {"seed", c.seed},
                   {"config", to_json(c)}};
      write_json(g.out + "/enkf.json", j);
      std::cout << "mspe " << format_double(r.mspe) << '\n';
    } else if (*repro) {
      if (target == "table1") {
        const Table1Result t = run_table1(c);
        write_json(g.out + "/table1.json", t.summary);
        print_report(t.summary);
      } else if (target == "table2" || target == "table3" || target == "table4" || target == "cs-stages") {
        const TruthData truth = generate_truth(c);
        const FittedModels fits = fit_models(truth, c);
        write_json(g.out + "/model_wilks.json", to_json(fits.wilks));
        for (const auto& [name, m] : fits.cs) write_json(g.out + "/model_" + name + ".json", to_json(m));
        json report;
        if (target == "table2") {
          report = to_json(run_table2(truth, fits, c), c);
        } else if (target == "cs-stages") {
          const CsStagesReport r = run_cs_stages(truth, fits, c);
          report = {{"degree2", to_json(r.degree2)},
                    {"locality",
                     {{"components_without_cross_terms", r.locality.components_without_cross_terms},
                      {"components_own_dominant", r.locality.components_own_dominant},
                      {"fraction_without_cross_terms", r.locality.fraction_without_cross_terms}}},
                    {"degree3", to_json(r.degree3)},
                    {"degree4_raw", to_json(r.degree4)}};
        } else {
          const ArFits ar = fit_residual_models(truth, fits, c);
          write_json(g.out + "/ar_wilks.json", to_json(ar.wilks));
          write_json(g.out + "/ar_cs.json", to_json(ar.cs));
          if (target == "table3") {
            report = to_json(run_table3(truth, fits, ar, c), c);
          } else {
            const auto runs = run_enkf_variants(truth, fits, ar, c, {"wilks", "cs", "ar-wilks", "ar-cs"});
            report = to_json(run_table4(runs), c);
          }
        }
        write_json(g.out + "/" + target + ".json", report);
        print_report(report);
      } else if (target.rfind("fig", 0) == 0) {
        int id = 0;
        try {
          id = std::stoi(target.substr(3));
        } catch (const std::exception&) {
          throw ConfigError("reproduce: bad figure id '" + target + "'");
        }
        emit_figure_data(id, c, g.out);
      } else {
        throw ConfigError("reproduce: unknown target '" + target + "'");
      }
    }
    write_timing(g.out, app.get_subcommands().front()->get_name().c_str(), start);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
