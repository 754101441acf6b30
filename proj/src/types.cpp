#include "arsid/types.hpp"

#include <cmath>
#include <stdexcept>

namespace arsid {

std::string to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::rademacher: return "rademacher";
    case NoiseFamily::uniform: return "uniform";
  }
  return "gaussian";
}

NoiseFamily noise_family_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseFamily::gaussian;
  if (s == "rademacher") return NoiseFamily::rademacher;
  if (s == "uniform") return NoiseFamily::uniform;
  throw std::invalid_argument("unknown noise family: " + s);
}

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::ols: return "ols";
    case EstimatorKind::constrained_pgd: return "constrained_pgd";
    case EstimatorKind::iht_low_rank: return "iht_low_rank";
    case EstimatorKind::group_nuclear_prox: return "group_nuclear_prox";
  }
  return "ols";
}

EstimatorKind estimator_kind_from_string(const std::string& s) {
  if (s == "ols") return EstimatorKind::ols;
  if (s == "constrained_pgd") return EstimatorKind::constrained_pgd;
  if (s == "iht_low_rank") return EstimatorKind::iht_low_rank;
  if (s == "group_nuclear_prox") return EstimatorKind::group_nuclear_prox;
  throw std::invalid_argument("unknown estimator kind: " + s);
}

std::string to_string(LossRange r) {
  return r == LossRange::full ? "full" : "from_p";
}

LossRange loss_range_from_string(const std::string& s) {
  if (s == "full") return LossRange::full;
  if (s == "from_p") return LossRange::from_p;
  throw std::invalid_argument("unknown range mode: " + s);
}

Mat ARModel::concat() const { return concat_blocks(blocks); }

Mat concat_blocks(const std::vector<Mat>& blocks) {
  if (blocks.empty()) return Mat();
  const Eigen::Index d = blocks.front().rows();
  Mat out(d, static_cast<Eigen::Index>(blocks.size()) * d);
  for (size_t k = 0; k < blocks.size(); ++k) {
    out.block(0, static_cast<Eigen::Index>(k) * d, d, d) = blocks[k];
  }
  return out;
}

std::vector<Mat> split_blocks(const Mat& concat, int d) {
  if (d <= 0 || concat.rows() != d || concat.cols() % d != 0) {
    throw std::invalid_argument("split_blocks: concat shape is not d x k*d");
  }
  const Eigen::Index k = concat.cols() / d;
  std::vector<Mat> out;
  out.reserve(static_cast<size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    out.push_back(concat.block(0, i * d, d, d));
  }
  return out;
}

void validate_model(const ARModel& m) {
  if (m.p <= 0) throw std::invalid_argument("validate_model: p must be positive");
  if (m.d <= 0) throw std::invalid_argument("validate_model: d must be positive");
  if (static_cast<int>(m.blocks.size()) != m.p) {
    throw std::invalid_argument("validate_model: expected exactly p blocks");
  }
  for (int k = 0; k < m.p; ++k) {
    const Mat& a = m.blocks[static_cast<size_t>(k)];
    if (a.rows() != m.d || a.cols() != m.d) {
      throw std::invalid_argument("validate_model: block " + std::to_string(k + 1) +
                                  " is not d x d");
    }
    if (!a.allFinite()) {
      throw std::invalid_argument("validate_model: block " + std::to_string(k + 1) +
                                  " has a non-finite entry");
    }
  }
  if (!(m.sigma >= 0.0)) {
    throw std::invalid_argument("validate_model: sigma must be nonnegative");
  }
}

ARModel truncate_truth(const ARModel& m, int p_prime) {
  validate_model(m);
  if (p_prime < 1 || p_prime > m.p) {
    throw std::invalid_argument("truncate_truth: p_prime out of range [1, p]");
  }
  ARModel out = m;
  for (int k = p_prime; k < m.p; ++k) {
    out.blocks[static_cast<size_t>(k)] = Mat::Zero(m.d, m.d);
  }
  return out;
}

void EstimatorConfig::validate(int d) const {
  if (p_student < 1) throw std::invalid_argument("estimator config: p_student must be >= 1");
  if (kind == EstimatorKind::constrained_pgd || kind == EstimatorKind::iht_low_rank) {
    if (!(D >= 1.0)) throw std::invalid_argument("estimator config: D must be >= 1");
  }
  if (kind == EstimatorKind::iht_low_rank) {
    const int rr = r.value_or(d);
    if (rr < 1 || rr > d) throw std::invalid_argument("estimator config: r must be in [1, d]");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("estimator config: lambda must be >= 0");
  if (step_size && !(*step_size > 0.0)) {
    throw std::invalid_argument("estimator config: step_size must be > 0");
  }
  if (max_iters < 1) throw std::invalid_argument("estimator config: max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("estimator config: tol must be > 0");
}

}  // namespace arsid
