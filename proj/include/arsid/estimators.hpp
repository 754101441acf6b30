#pragma once

#include <optional>
#include <vector>

#include "arsid/types.hpp"

namespace arsid {

// Sufficient statistics of the square loss over the configured time range.
// With z_t the stacked lag vector (x_{t-1}; ...; x_{t-p'}), zero-padded for
// lags s <= 0:
//   gram  = sum_{n,t} z_t z_t^T      (p'd x p'd)
//   cross = sum_{n,t} x_t z_t^T      (d x p'd)
//   sxx   = sum_{n,t} ||x_t||^2
// so NT * loss(A) = sxx - 2 tr(A cross^T) + tr(A gram A^T).
struct LagStats {
  int p_student = 0;
  int d = 0;
  double nt = 0.0;  // N*T normalizer, both range modes
  Mat gram;
  Mat cross;
  double sxx = 0.0;

  double loss(const Mat& a_concat) const;
  Mat grad(const Mat& a_concat) const;  // (2/NT)(A gram - cross)
  double lipschitz() const;             // 2 lambda_max(gram) / NT
};

LagStats build_lag_stats(const Dataset& ds, int p_student, LossRange range);

// Streaming loss/gradient over the dataset; the estimators use LagStats,
// these exist as the direct form of the definitions.
double loss(const std::vector<Mat>& a, const Dataset& ds, LossRange range);
std::vector<Mat> grad_loss(const std::vector<Mat>& a, const Dataset& ds,
                           LossRange range);

namespace ref {
LagStats build_lag_stats(const Dataset& ds, int p_student, LossRange range);
double loss(const std::vector<Mat>& a, const Dataset& ds, LossRange range);
}  // namespace ref

struct EstimateReport {
  std::vector<Mat> blocks;
  int p_student = 0;
  double final_loss = 0.0;       // plain square loss at the returned iterate
  double final_objective = 0.0;  // includes the lambda * group-nuclear term
  int iters = 0;
  bool converged = true;
  // Certificate results, filled by attach_certificates when references exist.
  std::optional<bool> certificate_vs_truth;  // loss(est) <= loss(truth_p')
  std::optional<double> surplus_eps;         // loss(est) - loss(reference)
};

// Normal equations with a min-Frobenius-norm pseudo-inverse fallback
// (eigenvalue cutoff 1e-12 relative to the largest).
EstimateReport ols(const Dataset& ds, int p_student,
                   LossRange range = LossRange::full);

// Frobenius projection onto { ||concat||_op <= radius }: clip singular values.
std::vector<Mat> project_op_ball(const std::vector<Mat>& a, double radius);

// Blockwise best rank-r approximation (truncated SVD).
std::vector<Mat> truncate_rank(const std::vector<Mat>& a, int r);

// Blockwise singular-value soft thresholding: prox of tau * group-nuclear norm.
std::vector<Mat> svt_block(const std::vector<Mat>& a, double tau);

// Projected gradient descent over { ||concat||_op <= D / sqrt(p') }.
EstimateReport estimate_constrained(const Dataset& ds, const EstimatorConfig& cfg);

// Iterative hard thresholding: gradient step, blockwise rank truncation,
// operator-ball projection. Every iterate is feasible.
EstimateReport estimate_low_rank(const Dataset& ds, const EstimatorConfig& cfg);

// Proximal gradient descent on loss + lambda * sum_k ||A_k||_*.
EstimateReport estimate_group_nuclear(const Dataset& ds, const EstimatorConfig& cfg);

// Dispatch on cfg.kind.
EstimateReport fit(const Dataset& ds, const EstimatorConfig& cfg);

// Certificates that transfer the minimizer rates to an arbitrary estimate:
// (a) loss(a_tilde) <= loss(truth truncated to p'), and
// (b) loss(a_tilde) <= loss(reference) + eps_tr for a caller-supplied fit.
struct ErmCertificate {
  bool vs_truth = false;
  double gap_truth = 0.0;  // loss(a_tilde) - loss(truth_p')
  std::optional<bool> vs_reference;
  std::optional<double> gap_reference;  // loss(a_tilde) - loss(reference)
};
ErmCertificate check_erm_certificate(const std::vector<Mat>& a_tilde,
                                     const Dataset& ds, const ARModel& a_star,
                                     std::optional<std::vector<Mat>> reference,
                                     double eps_tr, LossRange range);

void attach_certificates(EstimateReport& rep, const Dataset& ds,
                         const ARModel& a_star,
                         std::optional<std::vector<Mat>> reference,
                         double eps_tr, LossRange range);

// Group-nuclear norm sum_k ||A_k||_*.
double group_nuclear_norm(const std::vector<Mat>& a);

}  // namespace arsid
