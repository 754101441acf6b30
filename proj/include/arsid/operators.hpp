#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "arsid/types.hpp"

namespace arsid {

// First block-column of the Td x Td data-generating operator L. The full
// matrix is lower-block-Toeplitz: block (i,j) equals blocks[i-j] (0-based)
// for i >= j and zero above the diagonal. blocks[0] = I_d.
struct LBlocks {
  int T = 0;
  int d = 0;
  std::vector<Mat> blocks;  // T matrices, d x d
};

// Prediction operator M applied to a stacked Td vector:
// output block t = sum_{k=1}^{min(t-1, p')} A_k v_{t-k}. Matrix-free.
Vec apply_M(const std::vector<Mat>& blocks, const Vec& v, int T);
// Transpose action of M.
Vec apply_M_t(const std::vector<Mat>& blocks, const Vec& v, int T);
// Action of M_{A} - M_{A_{1:from_k}}: only blocks with index > from_k act.
Vec apply_M_tail(const std::vector<Mat>& blocks, int from_k, const Vec& v, int T);
Vec apply_M_tail_t(const std::vector<Mat>& blocks, int from_k, const Vec& v, int T);

// Dense materializations, guarded by a size cap on Td.
inline constexpr int kDenseCapTd = 1000;
Mat materialize_M(const std::vector<Mat>& blocks, int T, int cap = kDenseCapTd);
Mat materialize_L(const LBlocks& l, int cap = kDenseCapTd);

// Block recursion of the data-generating operator:
// blocks[0] = I, blocks[i] = sum_{k=1}^{min(i,p)} A_k blocks[i-k]. O(T p d^3).
LBlocks build_L_blocks(const ARModel& m, int T);

// Lower-block-Toeplitz multiply: output block t = sum_{s<=t} blocks[t-s] v_s.
Vec apply_L(const LBlocks& l, const Vec& v);

// Apply L and L^T by forward/backward substitution on (I - M) x = v, using
// L = (I - M)^{-1}. O(T p d^2) per call; agrees with apply_L to roundoff.
Vec solve_L(const ARModel& m, const Vec& v);
Vec solve_L_t(const ARModel& m, const Vec& v);

// Largest singular value by power iteration on map∘map^T.
struct LinearOp {
  int dim = 0;  // square Td maps everywhere in this library
  std::function<Vec(const Vec&)> apply;
  std::function<Vec(const Vec&)> apply_t;
};

struct OpNormEstimate {
  double value = 0.0;
  int iters = 0;
  bool converged = false;
};

// Starts from a fixed-seed random unit vector; stops when the estimate's
// relative change drops below tol. Non-convergence returns the best estimate
// with converged = false.
OpNormEstimate op_norm(const LinearOp& op, double tol = 1e-8, int max_iters = 10000);
OpNormEstimate op_norm_dense(const Mat& a, double tol = 1e-8, int max_iters = 10000);

// Power-iteration budget shared by the diagnostic entry points below.
struct PowerBudget {
  double tol = 1e-8;
  int max_iters = 10000;
};

double block_op_norm(const Mat& a);  // exact sigma_max of a small dense block

// kappa = ||L||_op * ||I - M||_op; the second factor is exactly
// 1 / sigma_min(L) since L^{-1} = I - M.
struct ConditionNumber {
  double kappa = 0.0;
  double l_op_norm = 0.0;
  double l_sigma_min = 0.0;
  bool converged = false;
};
ConditionNumber condition_number(const ARModel& m, int T, PowerBudget budget = {});

// zeta(T) = max_k ||blocks[k]||_op over the first block-column (the Toeplitz
// structure reduces the sup over all (i,j) to the first column).
double zeta(const ARModel& m, int T);

enum class Stability { strictly_stable, marginally_stable, explosive };
std::string to_string(Stability s);

// Tail fit of log ||blocks[k]||_op on k >= T/2: exponential model
// (linear in k, rate rho) and polynomial model (linear in log k, degree q).
struct StabilityReport {
  Stability label = Stability::strictly_stable;
  double rho = 0.0;          // fitted exponential rate
  double exp_residual = 0.0; // RMS residual of the exponential fit
  double poly_degree = 0.0;  // fitted polynomial degree
  double poly_residual = 0.0;
  int points_used = 0;
};
StabilityReport classify_stability(const ARModel& m, int T, double theta = 0.05);

// Block companion matrix (pd x pd) with last block-row (A_p, ..., A_1).
Mat companion(const ARModel& m, int cap = kDenseCapTd);
double spectral_radius(const Mat& square);

// Misspecification factors of a truncated model:
// d_prime = ||(M_A - M_{A_{1:p'}}) L||_op, eta = 1 if p' = p,
// max(1, 1 + d_prime) otherwise.
struct MisspecFactors {
  double eta = 1.0;
  double d_prime = 0.0;
  bool converged = true;
};
MisspecFactors misspec_factors(const ARModel& m, int p_prime, int T,
                               PowerBudget budget = {});

// Evaluates the three norm routes to the budget D: sum of block operator
// norms, sqrt(p) times the concatenated operator norm, and the direct
// ||M||_op at horizon T; each route that is <= D certifies the budget.
struct NormConditionReport {
  double sum_block_norms = 0.0;   // sum_k ||A_k||_op
  double concat_norm = 0.0;       // ||A||_op of the d x pd concatenation
  double sqrt_p_concat = 0.0;     // sqrt(p) * concat_norm
  double m_op_norm = 0.0;         // ||M_A||_op
  double budget = 0.0;
  bool sum_within_budget = false;
  bool concat_within_budget = false;
  bool m_within_budget = false;
  // sandwich ||A||_op <= ||M||_op <= min(sum, sqrt(p)*||A||_op), up to tol
  bool sandwich_holds = false;
};
NormConditionReport check_norm_conditions(const std::vector<Mat>& blocks, double D,
                                          int T, PowerBudget budget = {},
                                          double tol = 1e-6);

// Summary emitted by the analyze CLI subcommand.
struct Diagnostics {
  double op_norm_M = 0.0;
  double kappa = 0.0;
  double zeta = 0.0;
  double spectral_radius = 0.0;
  Stability stability = Stability::strictly_stable;
  std::optional<double> eta;      // present only when p' < p
  std::optional<double> d_prime;  // present only when p' < p
};
Diagnostics analyze(const ARModel& m, int T, std::optional<int> p_student = {},
                    PowerBudget budget = {});

}  // namespace arsid
