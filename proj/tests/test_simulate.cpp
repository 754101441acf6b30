#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arsid/operators.hpp"
#include "arsid/selfcheck.hpp"
#include "arsid/simulate.hpp"

using namespace arsid;

TEST_CASE("sigma = 0 gives an all-zero noise tensor") {
  NoiseSpec spec;
  spec.sigma = 0.0;
  const NoiseTensor e = sample_noise(spec, 2, 5, 3, 7);
  CHECK(e.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rademacher noise is supported on {-1, +1}") {
  NoiseSpec spec;
  spec.family = NoiseFamily::rademacher;
  spec.sigma = 1.0;
  const NoiseTensor e = sample_noise(spec, 3, 10, 2, 9);
  for (int j = 0; j < e.values.rows(); ++j) {
    for (int n = 0; n < e.N; ++n) {
      CHECK(std::abs(std::abs(e.values(j, n)) - 1.0) == 0.0);
    }
  }
}

TEST_CASE("gaussian sample moments match sigma^2 at Monte-Carlo scale") {
  NoiseSpec spec;
  spec.sigma = 2.0;
  const int N = 10, T = 1000, d = 10;  // N*T*d = 1e5 draws
  const NoiseTensor e = sample_noise(spec, N, T, d, 2024);
  const double count = static_cast<double>(N) * T * d;
  const double mean = e.values.sum() / count;
  const double var = (e.values.array() - mean).square().sum() / count;
  CHECK(std::abs(mean) <= 0.02);
  CHECK(std::abs(var - 4.0) <= 0.1);
}

TEST_CASE("sampled noise is isotropic within 5 standard errors") {
  for (NoiseFamily family :
       {NoiseFamily::gaussian, NoiseFamily::rademacher, NoiseFamily::uniform}) {
    NoiseSpec spec;
    spec.family = family;
    spec.sigma = 1.5;
    const int N = 4, T = 5000, d = 5;  // 1e5 coordinates
    const NoiseTensor e = sample_noise(spec, N, T, d, 33);
    const double samples = static_cast<double>(N) * T;
    Mat cov = Mat::Zero(d, d);
    Mat second = Mat::Zero(d, d);  // mean of squared products, for the SE
    for (int n = 0; n < N; ++n) {
      for (int t = 0; t < T; ++t) {
        const Vec xi = e.values.col(n).segment(t * d, d);
        const Mat outer = xi * xi.transpose();
        cov += outer;
        second += outer.cwiseProduct(outer);
      }
    }
    cov /= samples;
    second /= samples;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double target = i == j ? spec.sigma * spec.sigma : 0.0;
        const double se =
            std::sqrt(std::max(0.0, second(i, j) - cov(i, j) * cov(i, j)) / samples);
        CHECK(std::abs(cov(i, j) - target) <= 5.0 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("zero blocks reproduce the noise") {
  ARModel m;
  m.p = 2;
  m.d = 3;
  m.blocks = {Mat::Zero(3, 3), Mat::Zero(3, 3)};
  NoiseSpec spec;
  spec.sigma = 1.0;
  const NoiseTensor e = sample_noise(spec, 2, 6, 3, 5);
  const Dataset ds = simulate_from_noise(m, e);
  for (int n = 0; n < 2; ++n) {
    CHECK((ds.stacked(n) - e.values.col(n)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("scalar unit-root recursion accumulates the noise") {
  ARModel m;
  m.p = 1;
  m.d = 1;
  m.blocks = {Mat::Ones(1, 1)};
  NoiseTensor e;
  e.N = 1;
  e.T = 3;
  e.d = 1;
  e.values = Mat::Ones(3, 1);
  const Dataset ds = simulate_from_noise(m, e);
  CHECK(ds.traj[0](0, 0) == 1.0);
  CHECK(ds.traj[0](1, 0) == 2.0);
  CHECK(ds.traj[0](2, 0) == 3.0);
}

TEST_CASE("simulation equals the data-operator image of the noise") {
  for (int i = 0; i < 8; ++i) {
    const ARModel m = random_model(100 + i, i, 1 + i % 3, 1 + (i / 2) % 3, 0.9);
    NoiseSpec spec;
    spec.sigma = 1.0;
    auto [ds, e] = simulate(m, spec, 2, 12, 55 + i);
    const LBlocks l = build_L_blocks(m, ds.T);
    for (int n = 0; n < ds.N; ++n) {
      const Vec via_l = apply_L(l, e.values.col(n));
      const Vec x = ds.stacked(n);
      CHECK((via_l - x).norm() <= 1e-10 * std::max(1.0, x.norm()));
    }
  }
}

TEST_CASE("same seed reproduces the dataset bit-exactly") {
  const ARModel m = random_model(200, 0, 3, 2, 0.8);
  NoiseSpec spec;
  spec.sigma = 1.0;
  auto [ds1, e1] = simulate(m, spec, 3, 20, 99);
  auto [ds2, e2] = simulate(m, spec, 3, 20, 99);
  for (int n = 0; n < 3; ++n) {
    CHECK((ds1.traj[n] - ds2.traj[n]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((e1.values - e2.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("different seeds give different data") {
  const ARModel m = random_model(201, 0, 2, 2, 0.8);
  NoiseSpec spec;
  spec.sigma = 1.0;
  auto [ds1, e1] = simulate(m, spec, 2, 10, 1);
  auto [ds2, e2] = simulate(m, spec, 2, 10, 2);
  CHECK((ds1.traj[0] - ds2.traj[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("sigma = 0 with zero initial conditions keeps every state at zero") {
  const ARModel m = random_model(202, 0, 3, 3, 0.9);
  NoiseSpec spec;
  spec.sigma = 0.0;
  auto [ds, e] = simulate(m, spec, 2, 15, 4);
  for (int n = 0; n < 2; ++n) {
    CHECK(ds.traj[n].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("parallel kernels agree bit-for-bit with the serial reference") {
  const ARModel m = random_model(203, 0, 4, 3, 0.8);
  NoiseSpec spec;
  spec.sigma = 1.3;
  spec.family = NoiseFamily::uniform;
  const NoiseTensor e_par = sample_noise(spec, 7, 40, 4, 321);
  const NoiseTensor e_ser = ref::sample_noise(spec, 7, 40, 4, 321);
  CHECK((e_par.values - e_ser.values).cwiseAbs().maxCoeff() == 0.0);

  const Dataset ds_par = simulate_from_noise(m, e_par);
  const Dataset ds_ser = ref::simulate_from_noise(m, e_ser);
  for (int n = 0; n < 7; ++n) {
    CHECK((ds_par.traj[n] - ds_ser.traj[n]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("noise sampling validates its dimensions") {
  NoiseSpec spec;
  CHECK_THROWS_AS(sample_noise(spec, 0, 5, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_noise(spec, 1, 0, 2, 1), std::invalid_argument);

  ARModel m;
  m.p = 1;
  m.d = 2;
  m.blocks = {Mat::Zero(2, 2)};
  NoiseTensor e;
  e.N = 1;
  e.T = 3;
  e.d = 3;  // mismatch with m.d
  e.values = Mat::Zero(9, 1);
  CHECK_THROWS_AS(simulate_from_noise(m, e), std::invalid_argument);
}
