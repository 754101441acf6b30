#include "arsid/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "arsid/rng.hpp"

namespace arsid {

namespace {

double draw(NoiseFamily family, double sigma, std::uint64_t key, std::uint64_t k) {
  switch (family) {
    case NoiseFamily::gaussian:
      return sigma * rng::standard_normal(key, k);
    case NoiseFamily::rademacher:
      return sigma * rng::rademacher(key, k);
    case NoiseFamily::uniform:
      return sigma * std::sqrt(3.0) * rng::symmetric_uniform(key, k);
  }
  return 0.0;
}

void fill_noise_column(NoiseTensor& e, const NoiseSpec& spec, std::uint64_t key,
                       int n) {
  const std::uint64_t base = static_cast<std::uint64_t>(n) *
                             static_cast<std::uint64_t>(e.T) * e.d;
  for (int j = 0; j < e.T * e.d; ++j) {
    e.values(j, n) = draw(spec.family, spec.sigma, key, base + j);
  }
}

void run_recursion(const ARModel& m, const NoiseTensor& e, Dataset& ds, int n) {
  Mat& x = ds.traj[static_cast<size_t>(n)];
  const int d = m.d;
  for (int t = 0; t < ds.T; ++t) {  // 0-based; x.row(t) is x_{t+1}
    Eigen::RowVectorXd acc = e.values.col(n).segment(t * d, d).transpose();
    const int lags = std::min(t, m.p);
    for (int k = 1; k <= lags; ++k) {
      acc.noalias() += x.row(t - k) * m.blocks[static_cast<size_t>(k - 1)].transpose();
    }
    x.row(t) = acc;
  }
}

NoiseTensor make_noise_shell(int N, int T, int d) {
  if (N < 1 || T < 1 || d < 1) {
    throw std::invalid_argument("sample_noise: N, T, d must be >= 1");
  }
  NoiseTensor e;
  e.N = N;
  e.T = T;
  e.d = d;
  e.values = Mat::Zero(static_cast<Eigen::Index>(T) * d, N);
  return e;
}

Dataset make_dataset_shell(const ARModel& m, const NoiseTensor& e) {
  validate_model(m);
  if (e.d != m.d || e.values.rows() != static_cast<Eigen::Index>(e.T) * e.d ||
      e.values.cols() != e.N || e.T < 1) {
    throw std::invalid_argument("simulate_from_noise: noise shape mismatch");
  }
  Dataset ds;
  ds.N = e.N;
  ds.T = e.T;
  ds.d = e.d;
  ds.traj.assign(static_cast<size_t>(e.N), Mat::Zero(e.T, e.d));
  return ds;
}

}  // namespace

NoiseTensor sample_noise(const NoiseSpec& spec, int N, int T, int d,
                         std::uint64_t seed) {
  NoiseTensor e = make_noise_shell(N, T, d);
  const std::uint64_t key = rng::derive(seed, rng::kStreamNoise);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    fill_noise_column(e, spec, key, n);
  }
  return e;
}

Dataset simulate_from_noise(const ARModel& m, const NoiseTensor& e) {
  Dataset ds = make_dataset_shell(m, e);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < ds.N; ++n) {
    run_recursion(m, e, ds, n);
  }
  return ds;
}

std::pair<Dataset, NoiseTensor> simulate(const ARModel& m, const NoiseSpec& spec,
                                         int N, int T, std::uint64_t seed) {
  NoiseTensor e = sample_noise(spec, N, T, m.d, seed);
  Dataset ds = simulate_from_noise(m, e);
  ds.seed = seed;
  ds.noise = spec;
  return {std::move(ds), std::move(e)};
}

namespace ref {

NoiseTensor sample_noise(const NoiseSpec& spec, int N, int T, int d,
                         std::uint64_t seed) {
  NoiseTensor e = make_noise_shell(N, T, d);
  const std::uint64_t key = rng::derive(seed, rng::kStreamNoise);
  for (int n = 0; n < N; ++n) {
    fill_noise_column(e, spec, key, n);
  }
  return e;
}

Dataset simulate_from_noise(const ARModel& m, const NoiseTensor& e) {
  Dataset ds = make_dataset_shell(m, e);
  for (int n = 0; n < ds.N; ++n) {
    run_recursion(m, e, ds, n);
  }
  return ds;
}

}  // namespace ref

}  // namespace arsid
