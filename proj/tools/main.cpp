// arsid: simulate / analyze / fit / sweep / validate / plot for order-p
// linear autoregressive systems. Exit codes: 0 ok, 1 usage error,
// 2 validation failure.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "arsid/estimators.hpp"
#include "arsid/harness.hpp"
#include "arsid/io.hpp"
#include "arsid/operators.hpp"
#include "arsid/plot.hpp"
#include "arsid/selfcheck.hpp"
#include "arsid/simulate.hpp"
#include "arsid/types.hpp"

namespace {

using namespace arsid;

struct ModelSource {
  std::string model_path;
  int gen_p = 0;
  int gen_d = 0;
  double gen_alpha = 0.5;
  int gen_rank = 0;
  std::uint64_t gen_seed = 0;
  double gen_sigma = 1.0;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--model", model_path, "model JSON file");
    cmd->add_option("--gen-p", gen_p, "generate ground truth: context length");
    cmd->add_option("--gen-d", gen_d, "generate ground truth: dimension");
    cmd->add_option("--gen-alpha", gen_alpha, "ground truth scale (default 0.5)");
    cmd->add_option("--gen-rank", gen_rank, "ground truth rank (0: full rank)");
    cmd->add_option("--gen-seed", gen_seed, "ground truth seed");
    cmd->add_option("--gen-sigma", gen_sigma, "ground truth noise scale");
  }

  ARModel resolve() const {
    if (!model_path.empty()) return load_model(model_path);
    if (gen_p < 1 || gen_d < 1) {
      throw CLI::ValidationError("model", "pass --model or --gen-p/--gen-d");
    }
    GroundTruthSpec spec;
    spec.p = gen_p;
    spec.d = gen_d;
    spec.alpha = gen_alpha;
    if (gen_rank > 0) spec.rank = gen_rank;
    spec.seed = gen_seed;
    spec.sigma = gen_sigma;
    return generate_ground_truth(spec);
  }
};

int default_workers() {
  if (const char* env = std::getenv("ARSID_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;  // library default
}

SeriesBy series_from_string(const std::string& s) {
  if (s == "config") return SeriesBy::config;
  if (s == "p_student") return SeriesBy::p_student;
  if (s == "lambda") return SeriesBy::lambda;
  if (s == "estimator") return SeriesBy::estimator;
  throw CLI::ValidationError("--series", "unknown series key: " + s);
}

XQuantity x_from_string(const std::string& s) {
  if (s == "beta") return XQuantity::beta_over_gamma;
  if (s == "beta_tilde") return XQuantity::beta_tilde_over_gamma;
  throw CLI::ValidationError("--x", "unknown x quantity: " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"order-p linear system simulation, estimation and scaling sweeps"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "generate a dataset from a model");
  ModelSource sim_model;
  sim_model.add_flags(sim);
  int sim_N = 1, sim_T = 100;
  std::uint64_t sim_seed = 0;
  std::string sim_family = "gaussian";
  double sim_sigma = -1.0;
  std::string sim_out = "dataset.csv";
  sim->add_option("--N", sim_N, "number of trajectories")->required();
  sim->add_option("--T", sim_T, "trajectory length")->required();
  sim->add_option("--seed", sim_seed, "noise seed")->required();
  sim->add_option("--family", sim_family, "gaussian | rademacher | uniform");
  sim->add_option("--sigma", sim_sigma, "noise scale (default: model sigma)");
  sim->add_option("--out", sim_out, "dataset CSV path")->required();

  // ---- analyze ----
  auto* ana = app.add_subcommand("analyze", "operator diagnostics as JSON");
  ModelSource ana_model;
  ana_model.add_flags(ana);
  int ana_T = 100;
  int ana_p_student = 0;
  double ana_tol = 1e-8;
  int ana_iters = 10000;
  std::string ana_out;
  ana->add_option("--T", ana_T, "horizon for the operators")->required();
  ana->add_option("--p-student", ana_p_student, "student context (adds eta, d_prime)");
  ana->add_option("--tol", ana_tol, "power iteration tolerance");
  ana->add_option("--iters", ana_iters, "power iteration cap");
  ana->add_option("--out", ana_out, "write JSON here instead of stdout");

  // ---- fit ----
  auto* fitc = app.add_subcommand("fit", "fit an estimator to a dataset");
  std::string fit_data, fit_estimator = "ols", fit_range = "full";
  std::string fit_out = "report.json", fit_blocks_out = "blocks.csv";
  std::string fit_truth;
  int fit_p_student = 1, fit_r = 0, fit_iters = 5000;
  double fit_D = 2.0, fit_lambda = 0.0, fit_step = 0.0, fit_tol = 1e-10, fit_eps = 0.0;
  bool fit_project_ball = false, fit_recipe_init = false;
  std::uint64_t fit_init_seed = 0;
  fitc->add_option("--data", fit_data, "dataset CSV (with sidecar)")->required();
  fitc->add_option("--estimator", fit_estimator,
                   "ols | constrained_pgd | iht_low_rank | group_nuclear_prox");
  fitc->add_option("--p-student", fit_p_student, "fitted context length")->required();
  fitc->add_option("--D", fit_D, "operator-norm budget");
  fitc->add_option("--r", fit_r, "target rank (iht)");
  fitc->add_option("--lambda", fit_lambda, "group-nuclear weight");
  fitc->add_option("--step", fit_step, "gradient step (0: auto)");
  fitc->add_option("--iters", fit_iters, "iteration cap");
  fitc->add_option("--tol", fit_tol, "relative objective decrease tolerance");
  fitc->add_option("--range", fit_range, "full | from_p");
  fitc->add_flag("--project-ball", fit_project_ball,
                 "project prox iterates onto the D-ball");
  fitc->add_flag("--recipe-init", fit_recipe_init,
                 "initialize from the scaled-orthogonal recipe");
  fitc->add_option("--init-seed", fit_init_seed, "seed for --recipe-init");
  fitc->add_option("--truth", fit_truth, "truth model JSON: adds certificates");
  fitc->add_option("--eps-tr", fit_eps, "surplus tolerance for the certificate");
  fitc->add_option("--out", fit_out, "report JSON path");
  fitc->add_option("--blocks-out", fit_blocks_out, "fitted blocks CSV path");

  // ---- sweep ----
  auto* swp = app.add_subcommand("sweep", "run a scaling-law sweep to CSV");
  std::string swp_preset, swp_config, swp_out = "results.csv", swp_svg;
  std::string swp_series = "config", swp_x = "beta";
  int swp_workers = default_workers();
  swp->add_option("--preset", swp_preset,
                  "appendix-e-full | appendix-e-desk | misspec-desk | lowrank-desk");
  swp->add_option("--config", swp_config, "sweep spec JSON file");
  swp->add_option("--out", swp_out, "results CSV path")->required();
  swp->add_option("--svg", swp_svg, "also render an SVG scatter");
  swp->add_option("--workers", swp_workers, "worker threads (env ARSID_WORKERS)");
  swp->add_option("--series", swp_series, "plot series key");
  swp->add_option("--x", swp_x, "plot x quantity: beta | beta_tilde");

  // ---- validate ----
  auto* val = app.add_subcommand("validate", "run the property suites");
  bool val_quick = false;
  val->add_flag("--quick", val_quick, "smaller instance counts");

  // ---- plot ----
  auto* plt = app.add_subcommand("plot", "render a results CSV as SVG");
  std::string plt_in, plt_out = "plot.svg", plt_series = "config", plt_x = "beta";
  std::string plt_title;
  bool plt_no_reference = false;
  plt->add_option("--in", plt_in, "results CSV")->required();
  plt->add_option("--out", plt_out, "SVG path")->required();
  plt->add_option("--series", plt_series, "series key");
  plt->add_option("--x", plt_x, "x quantity: beta | beta_tilde");
  plt->add_option("--title", plt_title, "plot title");
  plt->add_flag("--no-reference", plt_no_reference, "omit the gamma/beta line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  // Only sweep fans out across workers; everything else runs one thread.
  if (!*swp) omp_set_num_threads(1);

  try {
    if (*sim) {
      const ARModel m = sim_model.resolve();
      NoiseSpec spec;
      spec.family = noise_family_from_string(sim_family);
      spec.sigma = sim_sigma >= 0.0 ? sim_sigma : m.sigma;
      auto [ds, e] = simulate(m, spec, sim_N, sim_T, sim_seed);
      save_dataset(ds, sim_out);
      std::cout << "wrote " << sim_out << " and " << sidecar_path(sim_out) << "\n";
    } else if (*ana) {
      const ARModel m = ana_model.resolve();
      std::optional<int> p_student;
      if (ana_p_student > 0) p_student = ana_p_student;
      const Diagnostics diag =
          analyze(m, ana_T, p_student, PowerBudget{ana_tol, ana_iters});
      const std::string text = diagnostics_to_json(diag);
      if (ana_out.empty()) {
        std::cout << text;
      } else {
        write_text_atomic(ana_out, text);
      }
    } else if (*fitc) {
      const Dataset ds = load_dataset(fit_data);
      EstimatorConfig cfg;
      cfg.kind = estimator_kind_from_string(fit_estimator);
      cfg.p_student = fit_p_student;
      cfg.D = fit_D;
      if (fit_r > 0) cfg.r = fit_r;
      cfg.lambda = fit_lambda;
      if (fit_step > 0.0) cfg.step_size = fit_step;
      cfg.max_iters = fit_iters;
      cfg.tol = fit_tol;
      cfg.loss_range = loss_range_from_string(fit_range);
      cfg.project_ball = fit_project_ball;
      if (fit_recipe_init) {
        cfg.init = student_init(fit_p_student, ds.d, 1.0, fit_init_seed);
      }
      EstimateReport rep = fit(ds, cfg);
      if (!fit_truth.empty()) {
        const ARModel truth = load_model(fit_truth);
        const EstimateReport reference = ols(ds, fit_p_student, cfg.loss_range);
        attach_certificates(rep, ds, truth, reference.blocks, fit_eps, cfg.loss_range);
      }
      save_blocks(rep.blocks, fit_blocks_out);
      write_text_atomic(fit_out, estimate_report_to_json(rep, fit_blocks_out));
      std::cout << "wrote " << fit_out << " and " << fit_blocks_out << "\n";
    } else if (*swp) {
      if (swp_preset.empty() == swp_config.empty()) {
        std::cerr << "sweep: pass exactly one of --preset or --config\n";
        return 1;
      }
      const SweepSpec spec = !swp_preset.empty() ? preset_sweep(swp_preset)
                                                 : load_sweep_spec(swp_config);
      const ResultTable table = run_sweep(spec, swp_workers);
      export_csv(table, swp_out);
      std::cout << "wrote " << swp_out << " (" << table.rows.size() << " rows)\n";
      if (!swp_svg.empty()) {
        PlotOptions opt;
        opt.series = series_from_string(swp_series);
        opt.x = x_from_string(swp_x);
        export_plot(table, swp_svg, opt);
        std::cout << "wrote " << swp_svg << "\n";
      }
    } else if (*val) {
      const std::vector<CheckResult> results = run_validation(val_quick);
      bool all_passed = true;
      std::printf("%-24s %-6s %s\n", "suite", "result", "detail");
      for (const CheckResult& r : results) {
        std::printf("%-24s %-6s %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                    r.detail.c_str());
        all_passed = all_passed && r.passed;
      }
      return all_passed ? 0 : 2;
    } else if (*plt) {
      const ResultTable table = load_csv(plt_in);
      PlotOptions opt;
      opt.series = series_from_string(plt_series);
      opt.x = x_from_string(plt_x);
      opt.title = plt_title;
      opt.reference_line = !plt_no_reference;
      export_plot(table, plt_out, opt);
      std::cout << "wrote " << plt_out << "\n";
    }
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
