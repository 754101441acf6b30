#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arsid/types.hpp"

namespace arsid {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Random test model with sum_k ||A_k||_op scaled to `budget`; fully
// determined by (key, index).
ARModel random_model(std::uint64_t key, std::uint64_t index, int d, int p,
                     double budget);

// (I - M) L = Identity (dense, <= 1e-10 entrywise) and simulation equals
// the L-image of the retained noise (<= 1e-10 relative), over n_models
// random models with d <= 4, p <= 4, T <= 30.
CheckResult check_operator_identities(int n_models);

// Prop-style norm routes and sandwiches on n random instances each:
// concat <= ||M|| <= sqrt(p) concat <= sum of block norms route,
// Frobenius delta sandwich, geometric-series bounds on L's extreme
// singular values, and the misspecification factor bound for strictly
// stable systems. Relative tolerance 1e-6.
CheckResult check_norm_inequalities(int n_instances);

// Central finite differences (step 1e-5) against the analytic gradient,
// entrywise relative error <= 1e-5, both range modes.
CheckResult check_gradients(int n_instances);

// Full-range loss difference against the operator-form decomposition
// (relative error <= 1e-8) and the minimizer inequality for OLS fits
// (slack >= -1e-8 relative).
CheckResult check_loss_decomposition(int n_instances);

// Mean training loss of the truth over n_datasets Monte-Carlo draws lies
// within 5 standard errors of sigma^2 d.
CheckResult check_sigma2d_concentration(int n_datasets, int d, int p, int N,
                                        int T, double sigma);

// The validate subcommand's table: the five suites above, spec-scale
// counts when quick is false.
std::vector<CheckResult> run_validation(bool quick);

}  // namespace arsid
