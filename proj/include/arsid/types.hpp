#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace arsid {

// Dense row-major doubles throughout; block formulas index (row, col) directly.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class NoiseFamily { gaussian, rademacher, uniform };

std::string to_string(NoiseFamily f);
NoiseFamily noise_family_from_string(const std::string& s);

// Centered, per-coordinate independent noise with coordinate variance sigma^2.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::gaussian;
  double sigma = 1.0;

  // Sub-Gaussian constant of the per-coordinate law relative to sigma^2,
  // reporting metadata only. Gaussian and rademacher have variance proxy
  // sigma^2 (c = 1); uniform on [-a, a] has proxy a^2 = 3 sigma^2.
  double subgauss_c() const {
    return family == NoiseFamily::uniform ? 1.7320508075688772 : 1.0;
  }
};

// Order-p linear autoregressive system: x_t = sum_k A_k x_{t-k} + xi_t,
// with x_s = 0 for s <= 0.
struct ARModel {
  int p = 0;
  int d = 0;
  std::vector<Mat> blocks;  // A_1 .. A_p, each d x d
  double sigma = 1.0;

  // Concatenated d x (p*d) matrix (A_1 | A_2 | ... | A_p).
  Mat concat() const;
};

// Throws std::invalid_argument naming the violated invariant.
void validate_model(const ARModel& m);

// Keep the first p_prime blocks, zero the rest; p and d unchanged.
ARModel truncate_truth(const ARModel& m, int p_prime);

// Concatenate a list of d x d blocks into d x (k*d).
Mat concat_blocks(const std::vector<Mat>& blocks);
std::vector<Mat> split_blocks(const Mat& concat, int d);

// N trajectories of length T in dimension d. Row t-1 of traj[n] is x_t
// (time is 1-based in formulas, 0-based in storage).
struct Dataset {
  int N = 0;
  int T = 0;
  int d = 0;
  std::vector<Mat> traj;  // N matrices, each T x d
  std::uint64_t seed = 0;
  std::optional<NoiseSpec> noise;  // absent when loaded without metadata

  // Stacked Td view of trajectory n: (x_1; x_2; ...; x_T).
  Eigen::Map<const Vec> stacked(int n) const {
    return Eigen::Map<const Vec>(traj[static_cast<size_t>(n)].data(),
                                 static_cast<Eigen::Index>(T) * d);
  }
};

// Td x N matrix E; column n is the noise of trajectory n stacked in time.
struct NoiseTensor {
  int N = 0;
  int T = 0;
  int d = 0;
  Mat values;  // Td x N
};

enum class EstimatorKind { ols, constrained_pgd, iht_low_rank, group_nuclear_prox };
enum class LossRange { full, from_p };

std::string to_string(EstimatorKind k);
EstimatorKind estimator_kind_from_string(const std::string& s);
std::string to_string(LossRange r);
LossRange loss_range_from_string(const std::string& s);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::ols;
  int p_student = 1;
  double D = 2.0;               // operator-norm budget (constrained / IHT)
  std::optional<int> r;         // target rank (IHT); defaults to d
  double lambda = 0.0;          // group-nuclear weight
  std::optional<double> step_size;  // absent: 0.9 / Lipschitz estimate
  int max_iters = 5000;
  double tol = 1e-10;           // relative objective decrease
  LossRange loss_range = LossRange::full;
  bool project_ball = false;    // optional D-ball projection for the prox solver
  std::optional<std::vector<Mat>> init;  // absent: zero blocks

  void validate(int d) const;   // throws std::invalid_argument
};

}  // namespace arsid
