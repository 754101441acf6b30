#include "arsid/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "arsid/estimators.hpp"
#include "arsid/harness.hpp"
#include "arsid/operators.hpp"
#include "arsid/rng.hpp"
#include "arsid/simulate.hpp"

namespace arsid {

namespace {

constexpr std::uint64_t kCheckSeed = 0x5eedc0de;

int pick_int(std::uint64_t key, std::uint64_t counter, int lo, int hi) {
  return lo + static_cast<int>(rng::at(key, counter) % static_cast<std::uint64_t>(hi - lo + 1));
}

double pick_uniform(std::uint64_t key, std::uint64_t counter, double lo, double hi) {
  return lo + (hi - lo) * rng::uniform01(rng::at(key, counter));
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::scientific << v;
  return ss.str();
}

CheckResult verdict(const std::string& name, bool passed, const std::string& detail) {
  return CheckResult{name, passed, detail};
}

}  // namespace

ARModel random_model(std::uint64_t key, std::uint64_t index, int d, int p,
                     double budget) {
  const std::uint64_t entry_key = rng::at(key, index * 1000 + 17);
  ARModel m;
  m.d = d;
  m.p = p;
  m.sigma = 1.0;
  std::uint64_t c = 0;
  for (int k = 0; k < p; ++k) {
    Mat b(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) b(i, j) = rng::standard_normal(entry_key, c++);
    }
    m.blocks.push_back(std::move(b));
  }
  double sum = 0.0;
  for (const Mat& b : m.blocks) sum += block_op_norm(b);
  if (sum > 0.0) {
    for (Mat& b : m.blocks) b *= budget / sum;
  }
  return m;
}

CheckResult check_operator_identities(int n_models) {
  const std::uint64_t key = rng::derive(kCheckSeed, 11);
  double worst_identity = 0.0;
  double worst_sim = 0.0;
  for (int i = 0; i < n_models; ++i) {
    const std::uint64_t c = static_cast<std::uint64_t>(i) * 16;
    const int d = pick_int(key, c, 1, 4);
    const int p = pick_int(key, c + 1, 1, 4);
    const int T = pick_int(key, c + 2, std::max(2, p), 30);
    const double budget = pick_uniform(key, c + 3, 0.2, 1.0);
    const ARModel m = random_model(key, static_cast<std::uint64_t>(i), d, p, budget);

    const LBlocks l = build_L_blocks(m, T);
    const Mat dense_l = materialize_L(l);
    const Mat dense_m = materialize_M(m.blocks, T);
    const Mat identity = Mat::Identity(dense_l.rows(), dense_l.cols());
    worst_identity = std::max(
        worst_identity, ((identity - dense_m) * dense_l - identity).cwiseAbs().maxCoeff());

    const int N = pick_int(key, c + 4, 1, 3);
    NoiseSpec spec;
    spec.sigma = 1.0;
    const NoiseTensor e = sample_noise(spec, N, T, d, rng::at(key, c + 5));
    const Dataset ds = simulate_from_noise(m, e);
    for (int n = 0; n < N; ++n) {
      const Vec via_l = apply_L(l, e.values.col(n));
      const Vec x = ds.stacked(n);
      const double rel = (via_l - x).norm() / std::max(x.norm(), 1e-300);
      worst_sim = std::max(worst_sim, rel);
    }
  }
  const bool passed = worst_identity <= 1e-10 && worst_sim <= 1e-10;
  return verdict("operator-identities", passed,
                 "max |(I-M)L - I| = " + fmt(worst_identity) +
                     ", max rel |sim - L*noise| = " + fmt(worst_sim));
}

CheckResult check_norm_inequalities(int n_instances) {
  const std::uint64_t key = rng::derive(kCheckSeed, 12);
  const double tol = 1e-6;
  double worst = std::numeric_limits<double>::infinity();
  std::string worst_name = "none";
  // slack already includes the tolerance; negative means a violation
  auto track = [&](const std::string& name, double slack) {
    if (slack < worst) {
      worst = slack;
      worst_name = name;
    }
  };

  for (int i = 0; i < n_instances; ++i) {
    const std::uint64_t c = static_cast<std::uint64_t>(i) * 32;
    const int d = pick_int(key, c, 1, 4);
    const int p = pick_int(key, c + 1, 1, 4);
    const int T = pick_int(key, c + 2, p + 1, 16);
    const double budget = pick_uniform(key, c + 3, 0.2, 1.0);
    const ARModel star = random_model(key, 2 * static_cast<std::uint64_t>(i), d, p, budget);
    const int p_student = pick_int(key, c + 4, 1, p);
    ARModel cand = random_model(key, 2 * static_cast<std::uint64_t>(i) + 1, d, p_student,
                                pick_uniform(key, c + 5, 0.2, 1.2));

    const Mat dense_m_star = materialize_M(star.blocks, T);
    Eigen::JacobiSVD<Mat> svd_m(dense_m_star);
    const double m_norm = svd_m.singularValues()(0);

    // Lemma-style sandwich between the concatenation and the prediction map.
    const Mat dense_m_cand = materialize_M(cand.blocks, T);
    Eigen::JacobiSVD<Mat> svd_c(dense_m_cand);
    const double mc = svd_c.singularValues()(0);
    const double concat = block_op_norm(cand.concat());
    const double sqrt_p = std::sqrt(static_cast<double>(p_student));
    double sum_norms = 0.0;
    for (const Mat& b : cand.blocks) sum_norms += block_op_norm(b);
    const double scale = std::max(1.0, mc);
    track("concat<=M", (mc - concat) / scale + tol);
    track("M<=sqrt(p)concat", (sqrt_p * concat - mc) / scale + tol);
    track("M<=sum", (sum_norms - mc) / scale + tol);

    // Frobenius sandwich through the prediction-difference operator.
    const ARModel star_trunc = truncate_truth(star, p_student);
    const Mat delta =
        dense_m_cand - materialize_M(std::vector<Mat>(star_trunc.blocks.begin(),
                                                      star_trunc.blocks.begin() + p_student),
                                     T);
    const double diff_f2 =
        (cand.concat() - concat_blocks(std::vector<Mat>(star.blocks.begin(),
                                                        star.blocks.begin() + p_student)))
            .squaredNorm();
    const double delta_f2 = delta.squaredNorm();
    const double fscale = std::max(1.0, delta_f2);
    track("deltaF/T<=diff", (diff_f2 - delta_f2 / T) / fscale + tol);
    track("diff<=deltaF/(T-p')",
          (delta_f2 / (T - p_student) - diff_f2) / fscale + tol);

    // Geometric-series bounds on the data operator's extreme singular values.
    const LBlocks l = build_L_blocks(star, T);
    const Mat dense_l = materialize_L(l);
    Eigen::JacobiSVD<Mat> svd_l(dense_l);
    const double l_max = svd_l.singularValues()(0);
    const double l_min = svd_l.singularValues()(svd_l.singularValues().size() - 1);
    const double D = std::max(m_norm, 1.0 + 1e-9);
    track("sigma_min>=1/(D+1)", l_min - 1.0 / (D + 1.0) + tol);
    const double geo = D > 1.0 + 1e-12
                           ? (std::pow(D, T) - 1.0) / (D - 1.0)
                           : static_cast<double>(T);
    track("L<=geometric", (geo - l_max) / std::max(1.0, geo) + tol);
    if (m_norm < 1.0) {
      track("L>=1/(1+m)", (l_max - 1.0 / (1.0 + m_norm)) + tol);
      track("L<=1/(1-m)", (1.0 / (1.0 - m_norm) - l_max) / (1.0 / (1.0 - m_norm)) + tol);
    }

  }

  // Misspecification factor bound, checked on strictly stable instances with
  // a forced truncation p' < p so every draw exercises it.
  for (int i = 0; i < n_instances; ++i) {
    const std::uint64_t c = 1000000 + static_cast<std::uint64_t>(i) * 8;
    const int d = pick_int(key, c, 1, 4);
    const int p = pick_int(key, c + 1, 2, 4);
    const int T = pick_int(key, c + 2, p + 1, 14);
    const double budget = pick_uniform(key, c + 3, 0.2, 0.95);
    const ARModel star =
        random_model(key, 4000 + static_cast<std::uint64_t>(i), d, p, budget);
    const int p_student = pick_int(key, c + 4, 1, p - 1);
    Eigen::JacobiSVD<Mat> svd_m(materialize_M(star.blocks, T));
    const double m_norm = svd_m.singularValues()(0);
    if (m_norm >= 1.0) continue;  // budget keeps this from happening
    const MisspecFactors mf =
        misspec_factors(star, p_student, T, PowerBudget{1e-9, 20000});
    track("eta<=2/(1-m)",
          (2.0 / (1.0 - m_norm) - mf.eta) / (2.0 / (1.0 - m_norm)) + tol);
  }
  return verdict("norm-inequalities", worst >= 0.0,
                 "worst slack = " + fmt(worst) + " (" + worst_name + ")");
}

CheckResult check_gradients(int n_instances) {
  const std::uint64_t key = rng::derive(kCheckSeed, 13);
  double worst = 0.0;
  for (int i = 0; i < n_instances; ++i) {
    const std::uint64_t c = static_cast<std::uint64_t>(i) * 16;
    const int d = pick_int(key, c, 1, 3);
    const int p = pick_int(key, c + 1, 1, 3);
    const int T = pick_int(key, c + 2, p + 2, 12);
    const int N = pick_int(key, c + 3, 1, 3);
    const ARModel truth = random_model(key, 3 * static_cast<std::uint64_t>(i), d, p, 0.8);
    NoiseSpec spec;
    spec.sigma = 1.0;
    auto [ds, e] = simulate(truth, spec, N, T, rng::at(key, c + 4));

    const int p_student = pick_int(key, c + 5, 1, p);
    ARModel cand = random_model(key, 3 * static_cast<std::uint64_t>(i) + 1, d, p_student, 0.9);
    const LossRange range = (i % 2 == 0) ? LossRange::full : LossRange::from_p;

    const std::vector<Mat> grad = grad_loss(cand.blocks, ds, range);
    const double h = 1e-5;
    for (int k = 0; k < p_student; ++k) {
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          std::vector<Mat> plus = cand.blocks, minus = cand.blocks;
          plus[static_cast<size_t>(k)](a, b) += h;
          minus[static_cast<size_t>(k)](a, b) -= h;
          const double fd = (loss(plus, ds, range) - loss(minus, ds, range)) / (2.0 * h);
          const double g = grad[static_cast<size_t>(k)](a, b);
          const double rel = std::abs(fd - g) / std::max({std::abs(g), std::abs(fd), 1e-8});
          worst = std::max(worst, rel);
        }
      }
    }
  }
  return verdict("gradient-check", worst <= 1e-5, "max entrywise rel err = " + fmt(worst));
}

CheckResult check_loss_decomposition(int n_instances) {
  const std::uint64_t key = rng::derive(kCheckSeed, 14);
  double worst_decomp = 0.0;
  double worst_slack = 0.0;  // most negative ERM optimality slack
  for (int i = 0; i < n_instances; ++i) {
    const std::uint64_t c = static_cast<std::uint64_t>(i) * 16;
    const int d = pick_int(key, c, 1, 3);
    const int p = pick_int(key, c + 1, 1, 3);
    const int T = pick_int(key, c + 2, p + 2, 12);
    const int N = pick_int(key, c + 3, 1, 3);
    const ARModel truth = random_model(key, 5 * static_cast<std::uint64_t>(i), d, p, 0.8);
    NoiseSpec spec;
    spec.sigma = 1.0;
    auto [ds, e] = simulate(truth, spec, N, T, rng::at(key, c + 4));
    const double nt = static_cast<double>(N) * T;

    const int p_student = pick_int(key, c + 5, 1, p);
    const ARModel truth_trunc = truncate_truth(truth, p_student);
    const std::vector<Mat> trunc_blocks(truth_trunc.blocks.begin(),
                                        truth_trunc.blocks.begin() + p_student);
    const ARModel cand =
        random_model(key, 5 * static_cast<std::uint64_t>(i) + 1, d, p_student, 0.9);

    // NT (loss(A) - loss(A*_p')) against the operator form, full range.
    const double lhs =
        nt * (loss(cand.blocks, ds, LossRange::full) - loss(trunc_blocks, ds, LossRange::full));
    double frob = 0.0, cross = 0.0;
    for (int n = 0; n < N; ++n) {
      const Vec x = solve_L(truth, e.values.col(n));  // = stacked data column
      const Vec delta_x =
          apply_M(cand.blocks, x, T) - apply_M(trunc_blocks, x, T);
      const Vec residual_term = apply_M(trunc_blocks, x, T) - x;
      frob += delta_x.squaredNorm();
      cross += delta_x.dot(residual_term);
    }
    const double rhs = frob + 2.0 * cross;
    worst_decomp = std::max(worst_decomp,
                            std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-10}));

    // Minimizer inequality for the OLS fit at p' = p, full range.
    const EstimateReport rep = ols(ds, p, LossRange::full);
    double frob_hat = 0.0, trace_hat = 0.0;
    for (int n = 0; n < N; ++n) {
      const Vec x = ds.stacked(n);
      const Vec delta_x = apply_M(rep.blocks, x, T) - apply_M(truth.blocks, x, T);
      frob_hat += delta_x.squaredNorm();
      trace_hat += delta_x.dot(e.values.col(n));
    }
    const double slack =
        (2.0 * trace_hat - frob_hat) / std::max(1.0, frob_hat);
    worst_slack = std::min(worst_slack, slack);
  }
  const bool passed = worst_decomp <= 1e-8 && worst_slack >= -1e-8;
  return verdict("loss-decomposition", passed,
                 "max decomposition rel err = " + fmt(worst_decomp) +
                     ", min ERM slack = " + fmt(worst_slack));
}

CheckResult check_sigma2d_concentration(int n_datasets, int d, int p, int N,
                                        int T, double sigma) {
  GroundTruthSpec gt;
  gt.p = p;
  gt.d = d;
  gt.alpha = 0.5;
  gt.seed = 77;
  gt.sigma = sigma;
  const ARModel truth = generate_ground_truth(gt);
  NoiseSpec spec;
  spec.sigma = sigma;

  std::vector<double> losses(static_cast<size_t>(n_datasets));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_datasets; ++i) {
    auto [ds, e] = simulate(truth, spec, N, T, 1000 + static_cast<std::uint64_t>(i));
    losses[static_cast<size_t>(i)] = loss(truth.blocks, ds, LossRange::full);
  }
  double mean = 0.0;
  for (double v : losses) mean += v;
  mean /= n_datasets;
  double var = 0.0;
  for (double v : losses) var += (v - mean) * (v - mean);
  var /= std::max(1, n_datasets - 1);
  const double se = std::sqrt(var / n_datasets);
  const double target = sigma * sigma * d;
  const double dev = std::abs(mean - target);
  const bool passed = dev <= 5.0 * se;
  std::ostringstream detail;
  detail << "mean = " << mean << ", target = " << target << ", |dev| = " << fmt(dev)
         << ", 5se = " << fmt(5.0 * se);
  return verdict("sigma2d-concentration", passed, detail.str());
}

std::vector<CheckResult> run_validation(bool quick) {
  std::vector<CheckResult> results;
  results.push_back(check_operator_identities(quick ? 10 : 50));
  results.push_back(check_norm_inequalities(quick ? 20 : 100));
  results.push_back(check_gradients(quick ? 5 : 20));
  results.push_back(check_loss_decomposition(quick ? 6 : 20));
  results.push_back(quick ? check_sigma2d_concentration(60, 5, 3, 2, 100, 1.0)
                          : check_sigma2d_concentration(200, 5, 3, 2, 100, 1.0));
  return results;
}

}  // namespace arsid
