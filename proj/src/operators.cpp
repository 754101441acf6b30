#include "arsid/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "arsid/rng.hpp"

namespace arsid {

namespace {

int block_dim(const std::vector<Mat>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("empty block list");
  return static_cast<int>(blocks.front().rows());
}

void check_stacked(const std::vector<Mat>& blocks, const Vec& v, int T) {
  const int d = block_dim(blocks);
  if (T < 1 || v.size() != static_cast<Eigen::Index>(T) * d) {
    throw std::invalid_argument("stacked vector length does not match T*d");
  }
}

// Least-squares line fit through (x_i, y_i); returns (slope, intercept, rms).
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  LineFit f;
  f.slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

}  // namespace

Vec apply_M(const std::vector<Mat>& blocks, const Vec& v, int T) {
  check_stacked(blocks, v, T);
  const int d = block_dim(blocks);
  const int p = static_cast<int>(blocks.size());
  Vec out = Vec::Zero(v.size());
  for (int t = 0; t < T; ++t) {
    const int lags = std::min(t, p);
    for (int k = 1; k <= lags; ++k) {
      out.segment(t * d, d).noalias() +=
          blocks[static_cast<size_t>(k - 1)] * v.segment((t - k) * d, d);
    }
  }
  return out;
}

Vec apply_M_t(const std::vector<Mat>& blocks, const Vec& v, int T) {
  check_stacked(blocks, v, T);
  const int d = block_dim(blocks);
  const int p = static_cast<int>(blocks.size());
  Vec out = Vec::Zero(v.size());
  for (int t = 0; t < T; ++t) {
    const int ahead = std::min(T - 1 - t, p);
    for (int k = 1; k <= ahead; ++k) {
      out.segment(t * d, d).noalias() +=
          blocks[static_cast<size_t>(k - 1)].transpose() * v.segment((t + k) * d, d);
    }
  }
  return out;
}

Vec apply_M_tail(const std::vector<Mat>& blocks, int from_k, const Vec& v, int T) {
  check_stacked(blocks, v, T);
  const int d = block_dim(blocks);
  const int p = static_cast<int>(blocks.size());
  Vec out = Vec::Zero(v.size());
  for (int t = 0; t < T; ++t) {
    const int lags = std::min(t, p);
    for (int k = from_k + 1; k <= lags; ++k) {
      out.segment(t * d, d).noalias() +=
          blocks[static_cast<size_t>(k - 1)] * v.segment((t - k) * d, d);
    }
  }
  return out;
}

Vec apply_M_tail_t(const std::vector<Mat>& blocks, int from_k, const Vec& v, int T) {
  check_stacked(blocks, v, T);
  const int d = block_dim(blocks);
  const int p = static_cast<int>(blocks.size());
  Vec out = Vec::Zero(v.size());
  for (int t = 0; t < T; ++t) {
    const int ahead = std::min(T - 1 - t, p);
    for (int k = from_k + 1; k <= ahead; ++k) {
      out.segment(t * d, d).noalias() +=
          blocks[static_cast<size_t>(k - 1)].transpose() * v.segment((t + k) * d, d);
    }
  }
  return out;
}

Mat materialize_M(const std::vector<Mat>& blocks, int T, int cap) {
  const int d = block_dim(blocks);
  if (static_cast<long long>(T) * d > cap) {
    throw std::invalid_argument("materialize_M: Td exceeds the dense cap");
  }
  const int p = static_cast<int>(blocks.size());
  Mat out = Mat::Zero(static_cast<Eigen::Index>(T) * d, static_cast<Eigen::Index>(T) * d);
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < i; ++j) {
      const int k = i - j;
      if (k <= p) out.block(i * d, j * d, d, d) = blocks[static_cast<size_t>(k - 1)];
    }
  }
  return out;
}

LBlocks build_L_blocks(const ARModel& m, int T) {
  validate_model(m);
  if (T < 1) throw std::invalid_argument("build_L_blocks: T must be >= 1");
  LBlocks l;
  l.T = T;
  l.d = m.d;
  l.blocks.reserve(static_cast<size_t>(T));
  l.blocks.push_back(Mat::Identity(m.d, m.d));
  for (int i = 1; i < T; ++i) {
    Mat b = Mat::Zero(m.d, m.d);
    const int lags = std::min(i, m.p);
    for (int k = 1; k <= lags; ++k) {
      b.noalias() += m.blocks[static_cast<size_t>(k - 1)] * l.blocks[static_cast<size_t>(i - k)];
    }
    l.blocks.push_back(std::move(b));
  }
  return l;
}

Mat materialize_L(const LBlocks& l, int cap) {
  if (static_cast<long long>(l.T) * l.d > cap) {
    throw std::invalid_argument("materialize_L: Td exceeds the dense cap");
  }
  const int d = l.d;
  Mat out = Mat::Zero(static_cast<Eigen::Index>(l.T) * d, static_cast<Eigen::Index>(l.T) * d);
  for (int i = 0; i < l.T; ++i) {
    for (int j = 0; j <= i; ++j) {
      out.block(i * d, j * d, d, d) = l.blocks[static_cast<size_t>(i - j)];
    }
  }
  return out;
}

Vec apply_L(const LBlocks& l, const Vec& v) {
  const int d = l.d;
  if (v.size() != static_cast<Eigen::Index>(l.T) * d) {
    throw std::invalid_argument("apply_L: vector length does not match T*d");
  }
  Vec out = Vec::Zero(v.size());
  for (int t = 0; t < l.T; ++t) {
    for (int s = 0; s <= t; ++s) {
      out.segment(t * d, d).noalias() +=
          l.blocks[static_cast<size_t>(t - s)] * v.segment(s * d, d);
    }
  }
  return out;
}

Vec solve_L(const ARModel& m, const Vec& v) {
  const int d = m.d;
  const int T = static_cast<int>(v.size()) / d;
  if (v.size() != static_cast<Eigen::Index>(T) * d || T < 1) {
    throw std::invalid_argument("solve_L: vector length does not match T*d");
  }
  Vec x = Vec::Zero(v.size());
  for (int t = 0; t < T; ++t) {
    Vec acc = v.segment(t * d, d);
    const int lags = std::min(t, m.p);
    for (int k = 1; k <= lags; ++k) {
      acc.noalias() += m.blocks[static_cast<size_t>(k - 1)] * x.segment((t - k) * d, d);
    }
    x.segment(t * d, d) = acc;
  }
  return x;
}

Vec solve_L_t(const ARModel& m, const Vec& v) {
  const int d = m.d;
  const int T = static_cast<int>(v.size()) / d;
  if (v.size() != static_cast<Eigen::Index>(T) * d || T < 1) {
    throw std::invalid_argument("solve_L_t: vector length does not match T*d");
  }
  Vec x = Vec::Zero(v.size());
  for (int t = T - 1; t >= 0; --t) {
    Vec acc = v.segment(t * d, d);
    const int ahead = std::min(T - 1 - t, m.p);
    for (int k = 1; k <= ahead; ++k) {
      acc.noalias() +=
          m.blocks[static_cast<size_t>(k - 1)].transpose() * x.segment((t + k) * d, d);
    }
    x.segment(t * d, d) = acc;
  }
  return x;
}

OpNormEstimate op_norm(const LinearOp& op, double tol, int max_iters) {
  if (op.dim < 1) throw std::invalid_argument("op_norm: dim must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("op_norm: tol must be > 0");

  // Fixed-seed start vector; independent of user seeds.
  const std::uint64_t key = rng::derive(0xA21CEull, 7);
  Vec v(op.dim);
  for (int i = 0; i < op.dim; ++i) v[i] = rng::standard_normal(key, static_cast<std::uint64_t>(i));
  v.normalize();

  OpNormEstimate est;
  double prev = -1.0;
  for (int it = 1; it <= max_iters; ++it) {
    Vec w = op.apply(v);
    const double s = w.norm();
    est.value = s;
    est.iters = it;
    if (s == 0.0) {  // v in the kernel; for the zero map this is exact
      est.converged = true;
      return est;
    }
    Vec u = op.apply_t(w);
    const double un = u.norm();
    if (un == 0.0) {
      est.converged = true;
      return est;
    }
    v = u / un;
    if (prev >= 0.0 && std::abs(s - prev) <= tol * std::max(s, 1e-300)) {
      est.converged = true;
      return est;
    }
    prev = s;
  }
  est.converged = false;
  return est;
}

OpNormEstimate op_norm_dense(const Mat& a, double tol, int max_iters) {
  LinearOp op;
  op.dim = static_cast<int>(a.cols());
  op.apply = [&a](const Vec& v) { return Vec(a * v); };
  op.apply_t = [&a](const Vec& v) { return Vec(a.transpose() * v); };
  return op_norm(op, tol, max_iters);
}

double block_op_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

ConditionNumber condition_number(const ARModel& m, int T, PowerBudget budget) {
  validate_model(m);
  if (T < 1) throw std::invalid_argument("condition_number: T must be >= 1");
  const int dim = T * m.d;

  LinearOp l_op;
  l_op.dim = dim;
  l_op.apply = [&m](const Vec& v) { return solve_L(m, v); };
  l_op.apply_t = [&m](const Vec& v) { return solve_L_t(m, v); };
  const OpNormEstimate l_norm = op_norm(l_op, budget.tol, budget.max_iters);

  LinearOp i_minus_m;
  i_minus_m.dim = dim;
  i_minus_m.apply = [&m, T](const Vec& v) { return Vec(v - apply_M(m.blocks, v, T)); };
  i_minus_m.apply_t = [&m, T](const Vec& v) { return Vec(v - apply_M_t(m.blocks, v, T)); };
  const OpNormEstimate inv_sigma_min = op_norm(i_minus_m, budget.tol, budget.max_iters);

  ConditionNumber out;
  out.l_op_norm = l_norm.value;
  out.l_sigma_min = inv_sigma_min.value > 0.0 ? 1.0 / inv_sigma_min.value : 0.0;
  out.kappa = l_norm.value * inv_sigma_min.value;
  out.converged = l_norm.converged && inv_sigma_min.converged;
  return out;
}

double zeta(const ARModel& m, int T) {
  const LBlocks l = build_L_blocks(m, T);
  double z = 0.0;
  for (const Mat& b : l.blocks) z = std::max(z, block_op_norm(b));
  return z;
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::strictly_stable: return "strictly_stable";
    case Stability::marginally_stable: return "marginally_stable";
    case Stability::explosive: return "explosive";
  }
  return "strictly_stable";
}

StabilityReport classify_stability(const ARModel& m, int T, double theta) {
  if (T < 8) throw std::invalid_argument("classify_stability: needs T >= 8");
  const LBlocks l = build_L_blocks(m, T);

  // Tail points k >= T/2 (1-based block index) to suppress transients.
  std::vector<double> ks, logs;
  for (int k = (T + 1) / 2; k <= T; ++k) {
    const double norm = block_op_norm(l.blocks[static_cast<size_t>(k - 1)]);
    if (norm > 0.0) {
      ks.push_back(static_cast<double>(k));
      logs.push_back(std::log(norm));
    }
  }

  StabilityReport rep;
  rep.points_used = static_cast<int>(ks.size());
  if (ks.size() < 2) {  // blocks died out entirely
    rep.label = Stability::strictly_stable;
    rep.rho = 0.0;
    return rep;
  }

  const LineFit exp_fit = fit_line(ks, logs);
  std::vector<double> log_ks(ks.size());
  for (size_t i = 0; i < ks.size(); ++i) log_ks[i] = std::log(ks[i]);
  const LineFit poly_fit = fit_line(log_ks, logs);

  rep.rho = std::exp(exp_fit.slope);
  rep.exp_residual = exp_fit.rms;
  rep.poly_degree = poly_fit.slope;
  rep.poly_residual = poly_fit.rms;
  if (rep.rho < 1.0 - theta) {
    rep.label = Stability::strictly_stable;
  } else if (rep.rho > 1.0 + theta) {
    rep.label = Stability::explosive;
  } else {
    rep.label = Stability::marginally_stable;
  }
  return rep;
}

Mat companion(const ARModel& m, int cap) {
  validate_model(m);
  if (static_cast<long long>(m.p) * m.d > cap) {
    throw std::invalid_argument("companion: pd exceeds the dense cap");
  }
  const int d = m.d;
  const int n = m.p * d;
  Mat c = Mat::Zero(n, n);
  for (int i = 0; i + 1 < m.p; ++i) {
    c.block(i * d, (i + 1) * d, d, d) = Mat::Identity(d, d);
  }
  for (int k = 1; k <= m.p; ++k) {  // last block-row: (A_p, ..., A_1)
    c.block((m.p - 1) * d, (m.p - k) * d, d, d) = m.blocks[static_cast<size_t>(k - 1)];
  }
  return c;
}

double spectral_radius(const Mat& square) {
  if (square.rows() != square.cols()) {
    throw std::invalid_argument("spectral_radius: matrix must be square");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(square), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

MisspecFactors misspec_factors(const ARModel& m, int p_prime, int T,
                               PowerBudget budget) {
  validate_model(m);
  if (p_prime < 1 || p_prime > m.p) {
    throw std::invalid_argument("misspec_factors: p_prime out of range [1, p]");
  }
  MisspecFactors out;
  if (p_prime == m.p) return out;  // eta = 1 by definition

  LinearOp comp;
  comp.dim = T * m.d;
  comp.apply = [&m, p_prime, T](const Vec& v) {
    return apply_M_tail(m.blocks, p_prime, solve_L(m, v), T);
  };
  comp.apply_t = [&m, p_prime, T](const Vec& v) {
    return solve_L_t(m, apply_M_tail_t(m.blocks, p_prime, v, T));
  };
  const OpNormEstimate est = op_norm(comp, budget.tol, budget.max_iters);
  out.d_prime = est.value;
  out.eta = std::max(1.0, 1.0 + est.value);
  out.converged = est.converged;
  return out;
}

NormConditionReport check_norm_conditions(const std::vector<Mat>& blocks, double D,
                                          int T, PowerBudget budget, double tol) {
  NormConditionReport rep;
  rep.budget = D;
  for (const Mat& b : blocks) rep.sum_block_norms += block_op_norm(b);
  rep.concat_norm = block_op_norm(concat_blocks(blocks));
  const double sqrt_p = std::sqrt(static_cast<double>(blocks.size()));
  rep.sqrt_p_concat = sqrt_p * rep.concat_norm;

  const int d = block_dim(blocks);
  LinearOp m_op;
  m_op.dim = T * d;
  m_op.apply = [&blocks, T](const Vec& v) { return apply_M(blocks, v, T); };
  m_op.apply_t = [&blocks, T](const Vec& v) { return apply_M_t(blocks, v, T); };
  rep.m_op_norm = op_norm(m_op, budget.tol, budget.max_iters).value;

  rep.sum_within_budget = rep.sum_block_norms <= D;
  rep.concat_within_budget = rep.concat_norm <= D / sqrt_p;
  rep.m_within_budget = rep.m_op_norm <= D;

  const double scale = std::max(1.0, rep.m_op_norm);
  const double slack = tol * scale;
  rep.sandwich_holds =
      rep.concat_norm <= rep.m_op_norm + slack &&
      rep.m_op_norm <= rep.sqrt_p_concat + slack &&
      rep.m_op_norm <= rep.sum_block_norms + slack;
  return rep;
}

Diagnostics analyze(const ARModel& m, int T, std::optional<int> p_student,
                    PowerBudget budget) {
  Diagnostics diag;
  LinearOp m_op;
  m_op.dim = T * m.d;
  m_op.apply = [&m, T](const Vec& v) { return apply_M(m.blocks, v, T); };
  m_op.apply_t = [&m, T](const Vec& v) { return apply_M_t(m.blocks, v, T); };
  diag.op_norm_M = op_norm(m_op, budget.tol, budget.max_iters).value;
  diag.kappa = condition_number(m, T, budget).kappa;
  diag.zeta = zeta(m, T);
  diag.spectral_radius = spectral_radius(companion(m));
  diag.stability = T >= 8 ? classify_stability(m, T).label
                          : Stability::strictly_stable;
  if (p_student && *p_student < m.p) {
    const MisspecFactors mf = misspec_factors(m, *p_student, T, budget);
    diag.eta = mf.eta;
    diag.d_prime = mf.d_prime;
  }
  return diag;
}

}  // namespace arsid
