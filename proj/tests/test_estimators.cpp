#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arsid/estimators.hpp"
#include "arsid/harness.hpp"
#include "arsid/operators.hpp"
#include "arsid/rng.hpp"
#include "arsid/selfcheck.hpp"
#include "arsid/simulate.hpp"

using namespace arsid;

namespace {

Dataset tiny_dataset(std::initializer_list<double> values) {
  Dataset ds;
  ds.N = 1;
  ds.T = static_cast<int>(values.size());
  ds.d = 1;
  Mat traj(ds.T, 1);
  int t = 0;
  for (double v : values) traj(t++, 0) = v;
  ds.traj = {traj};
  return ds;
}

Dataset random_dataset(std::uint64_t seed, int d, int p, int N, int T,
                       double sigma = 1.0) {
  const ARModel truth = random_model(9000 + seed, seed, d, p, 0.85);
  NoiseSpec spec;
  spec.sigma = sigma;
  return simulate(truth, spec, N, T, seed).first;
}

Mat random_square(int d, std::uint64_t key) {
  Mat a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = rng::standard_normal(key, i * d + j);
  }
  return a;
}

}  // namespace

TEST_CASE("loss of the zero predictor is the mean squared state norm") {
  const Dataset ds = random_dataset(1, 2, 2, 2, 9);
  const std::vector<Mat> zero = {Mat::Zero(2, 2), Mat::Zero(2, 2)};
  double full_sum = 0.0, tail_sum = 0.0;
  for (int n = 0; n < ds.N; ++n) {
    for (int t = 1; t <= ds.T; ++t) {
      const double sq = ds.traj[n].row(t - 1).squaredNorm();
      full_sum += sq;
      if (t >= 2) tail_sum += sq;
    }
  }
  const double nt = static_cast<double>(ds.N) * ds.T;
  CHECK(loss(zero, ds, LossRange::full) == doctest::Approx(full_sum / nt).epsilon(1e-12));
  CHECK(loss(zero, ds, LossRange::from_p) == doctest::Approx(tail_sum / nt).epsilon(1e-12));
}

TEST_CASE("full-range loss matches the operator form") {
  const Dataset ds = random_dataset(2, 2, 2, 3, 8);
  const ARModel cand = random_model(42, 1, 2, 2, 0.9);
  const double direct = loss(cand.blocks, ds, LossRange::full);
  double acc = 0.0;
  for (int n = 0; n < ds.N; ++n) {
    const Vec x = ds.stacked(n);
    acc += (x - apply_M(cand.blocks, x, ds.T)).squaredNorm();
  }
  const double via_op = acc / (static_cast<double>(ds.N) * ds.T);
  CHECK(direct == doctest::Approx(via_op).epsilon(1e-12));
}

TEST_CASE("hand-computed scalar loss") {
  const Dataset ds = tiny_dataset({1.0, 0.5});
  const std::vector<Mat> a = {Mat::Constant(1, 1, 0.5)};
  CHECK(loss(a, ds, LossRange::full) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("lag statistics reproduce the streaming loss and gradient") {
  const Dataset ds = random_dataset(3, 3, 2, 2, 12);
  const ARModel cand = random_model(43, 2, 3, 2, 1.0);
  for (LossRange range : {LossRange::full, LossRange::from_p}) {
    const LagStats st = build_lag_stats(ds, 2, range);
    const Mat concat = concat_blocks(cand.blocks);
    CHECK(st.loss(concat) ==
          doctest::Approx(loss(cand.blocks, ds, range)).epsilon(1e-11));
    const Mat grad_stats = st.grad(concat);
    const Mat grad_stream = concat_blocks(grad_loss(cand.blocks, ds, range));
    CHECK((grad_stats - grad_stream).cwiseAbs().maxCoeff() <=
          1e-11 * std::max(1.0, grad_stream.cwiseAbs().maxCoeff()));
  }
  const LagStats serial = ref::build_lag_stats(ds, 2, LossRange::full);
  const LagStats parallel = build_lag_stats(ds, 2, LossRange::full);
  CHECK((serial.gram - parallel.gram).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.cross - parallel.cross).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ref::loss(cand.blocks, ds, LossRange::full) ==
        loss(cand.blocks, ds, LossRange::full));
}

TEST_CASE("gradient vanishes at the OLS solution and on zero data") {
  const Dataset ds = random_dataset(4, 2, 2, 2, 15);
  const EstimateReport rep = ols(ds, 2, LossRange::full);
  double data_norm = 0.0;
  for (const Mat& traj : ds.traj) data_norm += traj.squaredNorm();
  const Mat g = concat_blocks(grad_loss(rep.blocks, ds, LossRange::full));
  CHECK(g.norm() <= 1e-8 * (1.0 + std::sqrt(data_norm)));

  Dataset zeros = ds;
  for (Mat& traj : zeros.traj) traj.setZero();
  const Mat gz = concat_blocks(
      grad_loss({Mat::Zero(2, 2), Mat::Zero(2, 2)}, zeros, LossRange::full));
  CHECK(gz.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar OLS minimizes the hand-computed objective") {
  const Dataset ds = tiny_dataset({1.0, 0.5});
  const EstimateReport rep = ols(ds, 1, LossRange::full);
  CHECK(rep.blocks[0](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("OLS recovers the truth exactly from noise-free excitation") {
  const int d = 2, p = 2, T = 25, N = 3;
  const ARModel truth = random_model(500, 0, d, p, 0.9);
  NoiseTensor e;
  e.N = N;
  e.T = T;
  e.d = d;
  e.values = Mat::Zero(T * d, N);
  const std::uint64_t key = rng::derive(123, 5);
  for (int n = 0; n < N; ++n) {  // one initial shock per trajectory
    for (int i = 0; i < d; ++i) e.values(i, n) = rng::standard_normal(key, n * d + i);
  }
  const Dataset ds = simulate_from_noise(truth, e);
  const LagStats st = build_lag_stats(ds, p, LossRange::full);
  Eigen::SelfAdjointEigenSolver<Mat> es(st.gram, Eigen::EigenvaluesOnly);
  REQUIRE(es.eigenvalues().minCoeff() > 1e-12 * es.eigenvalues().maxCoeff());

  const EstimateReport rep = ols(ds, p, LossRange::full);
  for (int k = 0; k < p; ++k) {
    CHECK((rep.blocks[k] - truth.blocks[k]).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("OLS of all-zero data is the zero solution") {
  Dataset ds;
  ds.N = 2;
  ds.T = 6;
  ds.d = 2;
  ds.traj = {Mat::Zero(6, 2), Mat::Zero(6, 2)};
  const EstimateReport rep = ols(ds, 2, LossRange::full);
  for (const Mat& b : rep.blocks) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("operator-ball projection clips singular values") {
  const std::vector<Mat> scalar = {Mat::Constant(1, 1, 3.0)};
  CHECK(project_op_ball(scalar, 2.0)[0](0, 0) == doctest::Approx(2.0));

  Mat inside(2, 2);
  inside << 0.5, 0.1, -0.2, 0.3;
  const std::vector<Mat> kept = project_op_ball({inside}, 2.0);
  CHECK((kept[0] - inside).cwiseAbs().maxCoeff() == 0.0);

  Mat diag = Mat::Zero(2, 2);
  diag(0, 0) = 3.0;
  diag(1, 1) = 1.0;
  const std::vector<Mat> clipped = project_op_ball({diag}, 2.0);
  CHECK(clipped[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(clipped[0](1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("projection beats a dense grid of feasible candidates") {
  const double radius = 2.0;
  Mat target(2, 2);
  target << 2.4, -0.6, 0.8, 1.9;
  const std::vector<Mat> projected = project_op_ball({target}, radius);
  CHECK(block_op_norm(projected[0]) <= radius + 1e-10);
  const double dist = (projected[0] - target).squaredNorm();

  Eigen::JacobiSVD<Mat> svd(target, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double best = 1e300;
  for (double s1 = 0.0; s1 <= radius + 1e-12; s1 += 0.01) {
    for (double s2 = 0.0; s2 <= radius + 1e-12; s2 += 0.01) {
      Vec s(2);
      s << s1, s2;
      const Mat cand = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
      if (block_op_norm(cand) > radius + 1e-9) continue;
      best = std::min(best, (cand - target).squaredNorm());
    }
  }
  const std::uint64_t key = rng::derive(808, 3);
  for (int i = 0; i < 2000; ++i) {  // random feasible candidates
    Mat cand = random_square(2, rng::at(key, i));
    const double norm = block_op_norm(cand);
    if (norm > radius) cand *= radius / norm;
    best = std::min(best, (cand - target).squaredNorm());
  }
  CHECK(dist <= best + 1e-8);
}

TEST_CASE("rank truncation follows Eckart-Young") {
  Mat diag = Mat::Zero(2, 2);
  diag(0, 0) = 3.0;
  diag(1, 1) = 1.0;
  const std::vector<Mat> r1 = truncate_rank({diag}, 1);
  CHECK(r1[0](0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(r1[0](1, 1)) <= 1e-12);

  const Mat a = random_square(3, rng::derive(9, 9));
  const std::vector<Mat> full = truncate_rank({a}, 3);
  CHECK((full[0] - a).cwiseAbs().maxCoeff() == 0.0);

  Eigen::JacobiSVD<Mat> svd(a);
  const std::vector<Mat> r2 = truncate_rank({a}, 2);
  CHECK((r2[0] - a).norm() ==
        doctest::Approx(svd.singularValues()(2)).epsilon(1e-10));
}

TEST_CASE("singular-value soft thresholding") {
  Mat rank1 = Mat::Zero(2, 2);
  rank1(0, 0) = 0.7;
  const std::vector<Mat> shrunk = svt_block({rank1}, 0.2);
  CHECK(block_op_norm(shrunk[0]) == doctest::Approx(0.5).epsilon(1e-12));

  const Mat a = random_square(2, rng::derive(10, 2));
  const std::vector<Mat> same = svt_block({a}, 0.0);
  CHECK((same[0] - a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("svt output minimizes the prox objective over scaled SVD candidates") {
  Mat a(2, 2);
  a << 1.2, -0.4, 0.3, 0.9;
  const double tau = 0.35;
  auto prox_obj = [&](const Mat& x) {
    Eigen::JacobiSVD<Mat> svd(x);
    return 0.5 * (x - a).squaredNorm() + tau * svd.singularValues().sum();
  };
  const std::vector<Mat> out = svt_block({a}, tau);
  const double ours = prox_obj(out[0]);

  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  double best = 1e300;
  for (double s1 = 0.0; s1 <= smax + 1e-12; s1 += 0.005) {
    for (double s2 = 0.0; s2 <= smax + 1e-12; s2 += 0.005) {
      Vec s(2);
      s << s1, s2;
      const Mat cand = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
      best = std::min(best, prox_obj(cand));
    }
  }
  CHECK(ours <= best + 1e-8);
}

TEST_CASE("projection and prox primitives are idempotent and non-expansive") {
  const std::uint64_t key = rng::derive(77, 4);
  for (int i = 0; i < 10; ++i) {
    const Mat a = random_square(3, rng::at(key, 2 * i));
    const Mat b = random_square(3, rng::at(key, 2 * i + 1));

    const std::vector<Mat> pa = project_op_ball({a}, 1.0);
    const std::vector<Mat> ppa = project_op_ball(pa, 1.0);
    CHECK((pa[0] - ppa[0]).cwiseAbs().maxCoeff() <= 1e-12);
    const std::vector<Mat> pb = project_op_ball({b}, 1.0);
    CHECK((pa[0] - pb[0]).norm() <= (a - b).norm() + 1e-12);

    const std::vector<Mat> sa = svt_block({a}, 0.4);
    const std::vector<Mat> sb = svt_block({b}, 0.4);
    CHECK((sa[0] - sb[0]).norm() <= (a - b).norm() + 1e-10);
    CHECK((svt_block(sa, 0.0)[0] - sa[0]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("constrained descent with a huge budget matches OLS") {
  const Dataset ds = random_dataset(5, 2, 2, 2, 30);
  const EstimateReport reference = ols(ds, 2, LossRange::full);
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::constrained_pgd;
  cfg.p_student = 2;
  cfg.D = 1e6;
  cfg.max_iters = 20000;
  cfg.tol = 1e-14;
  const EstimateReport rep = estimate_constrained(ds, cfg);
  CHECK(rep.final_loss <= reference.final_loss + 1e-6);
}

TEST_CASE("objective decreases monotonically at the safe step") {
  const Dataset ds = random_dataset(6, 2, 2, 2, 20);
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::constrained_pgd;
  cfg.p_student = 2;
  cfg.D = 2.0;
  cfg.tol = 1e-16;
  double prev = 1e300;
  for (int iters = 1; iters <= 12; ++iters) {
    cfg.max_iters = iters;
    const EstimateReport rep = estimate_constrained(ds, cfg);
    CHECK(rep.final_objective <= prev + 1e-12);
    prev = rep.final_objective;
  }
}

TEST_CASE("an active operator-norm constraint pins the fit to the boundary") {
  const Dataset ds = random_dataset(7, 2, 1, 2, 40);
  const EstimateReport unconstrained = ols(ds, 1, LossRange::full);
  const double free_norm = block_op_norm(concat_blocks(unconstrained.blocks));
  REQUIRE(free_norm > 0.05);

  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::constrained_pgd;
  cfg.p_student = 1;
  cfg.D = std::max(1.0, 0.5 * free_norm);  // radius D/sqrt(1) below the OLS norm
  if (cfg.D >= free_norm) cfg.D = 1.0;     // keep the constraint active
  cfg.max_iters = 20000;
  cfg.tol = 1e-15;
  const EstimateReport rep = estimate_constrained(ds, cfg);
  if (cfg.D < free_norm) {
    CHECK(block_op_norm(concat_blocks(rep.blocks)) ==
          doctest::Approx(cfg.D).epsilon(1e-8));
  }
}

TEST_CASE("hard thresholding keeps iterates feasible and recovers low rank") {
  GroundTruthSpec gt;
  gt.p = 2;
  gt.d = 4;
  gt.rank = 2;
  gt.alpha = 0.8;
  gt.seed = 11;
  const ARModel truth = generate_ground_truth(gt);
  NoiseSpec spec;
  spec.sigma = 0.02;
  auto [ds, e] = simulate(truth, spec, 4, 400, 17);

  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::iht_low_rank;
  cfg.p_student = 2;
  cfg.r = 2;
  cfg.D = 2.0;
  cfg.max_iters = 4000;
  for (int iters : {1, 3, 4000}) {  // feasibility after every prox application
    cfg.max_iters = iters;
    const EstimateReport rep = estimate_low_rank(ds, cfg);
    CHECK(block_op_norm(concat_blocks(rep.blocks)) <=
          cfg.D / std::sqrt(2.0) + 1e-9);
    for (const Mat& b : rep.blocks) {
      Eigen::JacobiSVD<Mat> svd(b);
      CHECK(svd.singularValues()(2) <= 1e-6 * std::max(1e-300, svd.singularValues()(0)));
    }
  }
  cfg.max_iters = 4000;
  const EstimateReport rep = estimate_low_rank(ds, cfg);
  double err = 0.0;
  for (int k = 0; k < 2; ++k) err += (rep.blocks[k] - truth.blocks[k]).squaredNorm();
  CHECK(err <= 0.05);
}

TEST_CASE("rank d thresholding reduces to the constrained trajectory") {
  const Dataset ds = random_dataset(8, 3, 2, 2, 18);
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::iht_low_rank;
  cfg.p_student = 2;
  cfg.r = 3;
  cfg.D = 1.5;
  cfg.max_iters = 60;
  cfg.tol = 1e-16;
  cfg.init = student_init(2, 3, 1.0, 5);
  const EstimateReport iht = estimate_low_rank(ds, cfg);
  cfg.kind = EstimatorKind::constrained_pgd;
  const EstimateReport pgd = estimate_constrained(ds, cfg);
  for (int k = 0; k < 2; ++k) {
    CHECK((iht.blocks[k] - pgd.blocks[k]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("zero regularization reduces the prox solver to plain descent") {
  const Dataset ds = random_dataset(9, 2, 2, 2, 16);
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::group_nuclear_prox;
  cfg.p_student = 2;
  cfg.lambda = 0.0;
  cfg.max_iters = 40;
  cfg.tol = 1e-16;
  cfg.init = student_init(2, 2, 1.0, 8);
  const EstimateReport prox = estimate_group_nuclear(ds, cfg);

  EstimatorConfig pgd_cfg = cfg;
  pgd_cfg.kind = EstimatorKind::constrained_pgd;
  pgd_cfg.D = 1e9;  // projection never activates
  const EstimateReport pgd = estimate_constrained(ds, pgd_cfg);
  for (int k = 0; k < 2; ++k) {
    CHECK((prox.blocks[k] - pgd.blocks[k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("a dominating lambda collapses the prox solution to zero") {
  const Dataset ds = random_dataset(10, 2, 2, 2, 14);
  const LagStats st = build_lag_stats(ds, 2, LossRange::full);
  const Mat grad0 = st.grad(Mat::Zero(2, 4));
  double lambda_max = 0.0;
  for (const Mat& g : split_blocks(grad0, 2)) {
    lambda_max = std::max(lambda_max, block_op_norm(g));
  }
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::group_nuclear_prox;
  cfg.p_student = 2;
  cfg.lambda = 1.01 * lambda_max;
  cfg.max_iters = 50;
  const EstimateReport rep = estimate_group_nuclear(ds, cfg);
  CHECK(rep.converged);
  for (const Mat& b : rep.blocks) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("regularized objective is non-increasing at the safe step") {
  const Dataset ds = random_dataset(11, 2, 2, 2, 18);
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::group_nuclear_prox;
  cfg.p_student = 2;
  cfg.lambda = 0.05;
  cfg.tol = 1e-16;
  double prev = 1e300;
  for (int iters = 1; iters <= 10; ++iters) {
    cfg.max_iters = iters;
    const EstimateReport rep = estimate_group_nuclear(ds, cfg);
    CHECK(rep.final_objective <= prev + 1e-12);
    prev = rep.final_objective;
  }
}

TEST_CASE("erm certificates compare against the truncated truth and a reference") {
  const ARModel truth = random_model(600, 0, 2, 2, 0.8);
  NoiseSpec spec;
  spec.sigma = 0.5;
  auto [ds, e] = simulate(truth, spec, 2, 20, 3);

  const ErmCertificate self = check_erm_certificate(
      truth.blocks, ds, truth, std::nullopt, 0.0, LossRange::full);
  CHECK(self.vs_truth);
  CHECK(self.gap_truth == 0.0);

  const EstimateReport hat = ols(ds, 2, LossRange::full);
  const ErmCertificate best = check_erm_certificate(
      hat.blocks, ds, truth, hat.blocks, 0.0, LossRange::full);
  CHECK(best.vs_truth);
  CHECK(*best.gap_reference <= 1e-12);
  CHECK(*best.vs_reference);

  ARModel perturbed = truth;  // unit-Frobenius perturbation
  Mat noise_dir = random_square(2, rng::derive(31, 1));
  noise_dir /= std::sqrt(noise_dir.squaredNorm() + noise_dir.squaredNorm());
  perturbed.blocks[0] += noise_dir;
  perturbed.blocks[1] += noise_dir;
  const ErmCertificate wobble = check_erm_certificate(
      perturbed.blocks, ds, truth, hat.blocks, 0.0, LossRange::full);
  const double direct = loss(perturbed.blocks, ds, LossRange::full) -
                        loss(truth.blocks, ds, LossRange::full);
  CHECK(wobble.gap_truth == doctest::Approx(direct).epsilon(1e-9));
  CHECK(wobble.vs_truth == (direct <= 0.0));
}

TEST_CASE("quick loss decomposition and gradient suites pass") {
  CHECK(check_loss_decomposition(6).passed);
  CHECK(check_gradients(5).passed);
}
