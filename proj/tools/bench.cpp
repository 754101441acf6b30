// Compares the OpenMP kernels against their serial reference
// implementations: same inputs, timing and max deviation per kernel.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "arsid/estimators.hpp"
#include "arsid/harness.hpp"
#include "arsid/simulate.hpp"

using namespace arsid;

namespace {

double time_ms(const std::function<void()>& fn, int reps = 3) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-18s %12.2f %12.2f %9.2fx %12.3g\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
  const int N = 32, T = 4000, d = 8, p = 4;
  std::printf("threads: %d   problem: N=%d T=%d d=%d p=%d\n", omp_get_max_threads(),
              N, T, d, p);
  std::printf("%-18s %12s %12s %9s %12s\n", "kernel", "serial ms", "omp ms", "speedup",
              "max |diff|");

  GroundTruthSpec gt;
  gt.p = p;
  gt.d = d;
  gt.alpha = 0.5;
  gt.seed = 42;
  const ARModel truth = generate_ground_truth(gt);
  NoiseSpec spec;
  spec.sigma = 1.0;

  NoiseTensor e_serial, e_parallel;
  const double t_noise_s =
      time_ms([&] { e_serial = ref::sample_noise(spec, N, T, d, 7); });
  const double t_noise_p = time_ms([&] { e_parallel = sample_noise(spec, N, T, d, 7); });
  row("sample_noise", t_noise_s, t_noise_p,
      (e_serial.values - e_parallel.values).cwiseAbs().maxCoeff());

  Dataset ds_serial, ds_parallel;
  const double t_sim_s =
      time_ms([&] { ds_serial = ref::simulate_from_noise(truth, e_serial); });
  const double t_sim_p =
      time_ms([&] { ds_parallel = simulate_from_noise(truth, e_parallel); });
  double sim_diff = 0.0;
  for (int n = 0; n < N; ++n) {
    sim_diff = std::max(
        sim_diff, (ds_serial.traj[static_cast<size_t>(n)] -
                   ds_parallel.traj[static_cast<size_t>(n)]).cwiseAbs().maxCoeff());
  }
  row("simulate", t_sim_s, t_sim_p, sim_diff);

  LagStats st_serial, st_parallel;
  const double t_stats_s =
      time_ms([&] { st_serial = ref::build_lag_stats(ds_serial, p, LossRange::full); });
  const double t_stats_p =
      time_ms([&] { st_parallel = build_lag_stats(ds_parallel, p, LossRange::full); });
  row("lag_stats", t_stats_s, t_stats_p,
      (st_serial.gram - st_parallel.gram).cwiseAbs().maxCoeff());

  double loss_serial = 0.0, loss_parallel = 0.0;
  const double t_loss_s =
      time_ms([&] { loss_serial = ref::loss(truth.blocks, ds_serial, LossRange::full); });
  const double t_loss_p =
      time_ms([&] { loss_parallel = loss(truth.blocks, ds_parallel, LossRange::full); });
  row("loss", t_loss_s, t_loss_p, std::abs(loss_serial - loss_parallel));

  SweepSpec sweep_spec;
  sweep_spec.d = {5};
  sweep_spec.p = {5};
  sweep_spec.N = {4};
  sweep_spec.T_multipliers = {5, 10};
  sweep_spec.seeds = {1, 2};
  ResultTable table_serial, table_parallel;
  const double t_sweep_s = time_ms([&] { table_serial = run_sweep(sweep_spec, 1); }, 1);
  const double t_sweep_p =
      time_ms([&] { table_parallel = run_sweep(sweep_spec, 0); }, 1);
  double sweep_diff = 0.0;
  for (size_t i = 0; i < table_serial.rows.size(); ++i) {
    sweep_diff = std::max(sweep_diff,
                          std::abs(table_serial.rows[i].error_frob_sq -
                                   table_parallel.rows[i].error_frob_sq));
  }
  row("sweep", t_sweep_s, t_sweep_p, sweep_diff);
  return 0;
}
