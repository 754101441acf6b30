#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arsid/operators.hpp"
#include "arsid/types.hpp"

namespace arsid {

// Ground-truth recipe: p Haar-orthogonal d x d blocks scaled to alpha / p,
// so sum_k ||A_k||_op = alpha and the budget route (i) certifies
// ||M||_op <= alpha. Optional rank keeps the leading r singular values of
// each block.
struct GroundTruthSpec {
  int p = 1;
  int d = 1;
  double alpha = 0.5;
  std::optional<int> rank;
  std::uint64_t seed = 0;
  double sigma = 1.0;
};

ARModel generate_ground_truth(const GroundTruthSpec& spec);

// Student initialization: same recipe with p' blocks and alpha_init (default 1).
std::vector<Mat> student_init(int p_student, int d, double alpha_init,
                              std::uint64_t seed);

struct CellConfig {
  int d = 1;
  int p = 1;
  int p_student = 1;
  int r = 1;
  int N = 1;
  int T = 1;
  EstimatorKind kind = EstimatorKind::ols;
  double lambda = 0.0;
  double step_size = 0.0;  // 0: automatic
  double D = 2.0;
  LossRange range = LossRange::full;
  int max_iters = 5000;
  double tol = 1e-10;
  double sigma = 1.0;
  PowerBudget diag{1e-6, 300};  // power-iteration budget for kappa / eta
  std::optional<double> kappa;  // precomputed diagnostics (sweep fills these)
  std::optional<double> eta;
};

// One CSV row; the column set and order is fixed in export_csv.
struct ResultRecord {
  int d = 0, p = 0, p_student = 0, r = 0, N = 0, T = 0;
  long long seed = 0;  // -1 on seed-averaged rows
  std::string estimator;
  double lambda = 0.0;
  double step_size = 0.0;
  double error_frob_sq = 0.0;
  double train_loss = 0.0;
  long long beta = 0;   // N*T
  long long gamma = 0;  // p' * d * r
  double beta_tilde = 0.0;  // beta / ln(1 + sqrt(N))
  double kappa = 0.0;
  double eta = 1.0;
  double runtime_ms = 0.0;
  std::string status;  // ok | nonconv | avg | error:<what>
};

struct ResultTable {
  std::vector<ResultRecord> rows;
};

// Everything except runtime_ms (timings vary run to run).
bool records_equivalent(const ResultRecord& a, const ResultRecord& b);

// simulate -> fit -> error against the truth truncated (or zero-padded) to
// p_student blocks. Estimator failures surface as status = error:<what>.
ResultRecord run_cell(const ARModel& truth, const CellConfig& cell,
                      std::uint64_t seed);

struct SweepSpec {
  std::vector<int> d{5};
  std::vector<int> p{5};
  std::vector<int> p_student;  // empty: p_student = p
  std::vector<int> r;          // empty: r = d
  std::vector<int> N{5};
  std::vector<double> T_multipliers{5};  // T = ceil(mult * p*d*r / N)
  std::vector<EstimatorKind> estimators{EstimatorKind::ols};
  std::vector<double> lambda_grid{0.0};  // iterative kinds only
  std::vector<double> step_grid{0.0};    // 0: automatic step
  std::vector<std::uint64_t> seeds{1, 2, 3};
  LossRange range_mode = LossRange::full;
  double alpha = 0.5;
  double sigma = 1.0;
  double D = 2.0;
  int max_iters = 5000;
  double tol = 1e-10;
  PowerBudget diag{1e-6, 300};

  void validate() const;
};

// Cartesian product of the grids in lexicographic order; cells run in
// parallel (workers <= 0: library default) but the table ordering never
// depends on completion order. Raw rows first, then one seed-averaged row
// per configuration.
ResultTable run_sweep(const SweepSpec& spec, int workers = 0);

// Named presets; "appendix-e-full" carries the original grids, the desk
// variants shrink them to the sizes the acceptance runs use.
SweepSpec preset_sweep(const std::string& name);
std::vector<std::string> preset_names();

// Grid tuning: among averaged rows sharing (d,p,p_student,r,N,T,estimator),
// pick the (lambda, step) with the smallest error; ties go to the larger
// lambda. expected_points is the full grid size per cell; cells with fewer
// rows are flagged incomplete and keep their best-over-available choice.
struct TunedCell {
  ResultRecord best;
  int points = 0;
  bool complete = true;
};
std::vector<TunedCell> tune_grid(const ResultTable& table, int expected_points);

enum class XQuantity { beta_over_gamma, beta_tilde_over_gamma };

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

// OLS of log(error) on log(x) over averaged rows (raw rows when no averages
// exist); needs >= 3 distinct x values.
SlopeFit fit_slope(const ResultTable& table, XQuantity x);

void export_csv(const ResultTable& table, const std::string& path);
ResultTable load_csv(const std::string& path);

}  // namespace arsid
