#include "arsid/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arsid {

namespace {

int range_start(int p_student, LossRange range) {
  return range == LossRange::from_p ? p_student : 1;  // 1-based first t
}

void check_fit_inputs(const Dataset& ds, int p_student) {
  if (ds.N < 1 || ds.T < 1 || ds.d < 1 ||
      static_cast<int>(ds.traj.size()) != ds.N) {
    throw std::invalid_argument("dataset is empty or inconsistent");
  }
  if (p_student < 1 || p_student > ds.T) {
    throw std::invalid_argument("p_student must be in [1, T]");
  }
}

void check_blocks(const std::vector<Mat>& a, int d) {
  if (a.empty()) throw std::invalid_argument("empty block list");
  for (const Mat& b : a) {
    if (b.rows() != d || b.cols() != d) {
      throw std::invalid_argument("block is not d x d");
    }
  }
}

// Lag matrix Z (one row per time step in range) and state matrix X for one
// trajectory; lags with s <= 0 stay zero.
void build_lag_rows(const Mat& traj, int p_student, LossRange range, Mat& Z,
                    Mat& X) {
  const int T = static_cast<int>(traj.rows());
  const int d = static_cast<int>(traj.cols());
  const int t0 = range_start(p_student, range);
  const int rows = T - t0 + 1;
  Z.setZero(rows, static_cast<Eigen::Index>(p_student) * d);
  X.resize(rows, d);
  for (int t = t0; t <= T; ++t) {
    const int row = t - t0;
    X.row(row) = traj.row(t - 1);
    for (int k = 1; k <= std::min(t - 1, p_student); ++k) {
      Z.block(row, (k - 1) * d, 1, d) = traj.row(t - 1 - k);
    }
  }
}

struct StatsPartial {
  Mat gram;
  Mat cross;
  double sxx = 0.0;
};

StatsPartial stats_for_trajectory(const Mat& traj, int p_student, LossRange range) {
  Mat Z, X;
  build_lag_rows(traj, p_student, range, Z, X);
  StatsPartial part;
  part.gram.noalias() = Z.transpose() * Z;
  part.cross.noalias() = X.transpose() * Z;
  part.sxx = X.squaredNorm();
  return part;
}

LagStats assemble_stats(const Dataset& ds, int p_student,
                        std::vector<StatsPartial>& parts) {
  LagStats st;
  st.p_student = p_student;
  st.d = ds.d;
  st.nt = static_cast<double>(ds.N) * ds.T;
  const Eigen::Index q = static_cast<Eigen::Index>(p_student) * ds.d;
  st.gram = Mat::Zero(q, q);
  st.cross = Mat::Zero(ds.d, q);
  for (const StatsPartial& part : parts) {  // fixed order: bit-exact result
    st.gram += part.gram;
    st.cross += part.cross;
    st.sxx += part.sxx;
  }
  return st;
}

double loss_for_trajectory(const Mat& concat, const Mat& traj, int p_student,
                           LossRange range) {
  const int T = static_cast<int>(traj.rows());
  const int d = static_cast<int>(traj.cols());
  const int t0 = range_start(p_student, range);
  double acc = 0.0;
  Eigen::RowVectorXd resid(d);
  for (int t = t0; t <= T; ++t) {
    resid = traj.row(t - 1);
    for (int k = 1; k <= std::min(t - 1, p_student); ++k) {
      resid.noalias() -=
          traj.row(t - 1 - k) * concat.block(0, (k - 1) * d, d, d).transpose();
    }
    acc += resid.squaredNorm();
  }
  return acc;
}

Mat grad_for_trajectory(const Mat& concat, const Mat& traj, int p_student,
                        LossRange range) {
  const int T = static_cast<int>(traj.rows());
  const int d = static_cast<int>(traj.cols());
  const int t0 = range_start(p_student, range);
  Mat g = Mat::Zero(d, static_cast<Eigen::Index>(p_student) * d);
  Eigen::RowVectorXd resid(d);
  for (int t = t0; t <= T; ++t) {
    resid = traj.row(t - 1);
    const int lags = std::min(t - 1, p_student);
    for (int k = 1; k <= lags; ++k) {
      resid.noalias() -=
          traj.row(t - 1 - k) * concat.block(0, (k - 1) * d, d, d).transpose();
    }
    for (int k = 1; k <= lags; ++k) {
      g.block(0, (k - 1) * d, d, d).noalias() +=
          resid.transpose() * traj.row(t - 1 - k);
    }
  }
  return g;
}

Mat project_ball_concat(const Mat& a, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("project_op_ball: radius must be > 0");
  if (a.norm() <= radius) return a;  // sigma_max <= frobenius: already inside
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vec s = svd.singularValues();
  if (s(0) <= radius) return a;
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::min(s(i), radius);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Mat truncate_rank_block(const Mat& b, int r) {
  if (r >= std::min(b.rows(), b.cols())) return b;
  Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vec s = svd.singularValues();
  for (Eigen::Index i = r; i < s.size(); ++i) s(i) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Mat svt_single_block(const Mat& b, double tau) {
  Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vec s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - tau, 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Mat map_blocks(const Mat& concat, int d, const std::function<Mat(const Mat&)>& f) {
  Mat out(concat.rows(), concat.cols());
  for (Eigen::Index k = 0; k * d < concat.cols(); ++k) {
    out.block(0, k * d, d, d) = f(concat.block(0, k * d, d, d));
  }
  return out;
}

double resolve_step(const LagStats& st, const EstimatorConfig& cfg) {
  if (cfg.step_size) return *cfg.step_size;
  const double lip = st.lipschitz();
  return lip > 0.0 ? 0.9 / lip : 1.0;
}

Mat initial_concat(const LagStats& st, const EstimatorConfig& cfg) {
  if (cfg.init) {
    check_blocks(*cfg.init, st.d);
    if (static_cast<int>(cfg.init->size()) != cfg.p_student) {
      throw std::invalid_argument("init must supply p_student blocks");
    }
    return concat_blocks(*cfg.init);
  }
  return Mat::Zero(st.d, static_cast<Eigen::Index>(cfg.p_student) * st.d);
}

// Shared descent loop: a <- prox(a - step * grad), stop on relative objective
// decrease below tol or at the iteration cap.
template <class ProxFn, class ObjFn>
EstimateReport run_descent(const LagStats& st, const EstimatorConfig& cfg,
                           ProxFn prox, ObjFn objective) {
  const double step = resolve_step(st, cfg);
  Mat a = initial_concat(st, cfg);
  double obj = objective(a);

  EstimateReport rep;
  rep.p_student = cfg.p_student;
  rep.converged = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Mat next = prox(a - step * st.grad(a));
    const double obj_next = objective(next);
    const double decrease = obj - obj_next;
    a = std::move(next);
    rep.iters = it;
    if (decrease >= 0.0 && decrease < cfg.tol * std::max(obj, 1e-300)) {
      obj = obj_next;
      rep.converged = true;
      break;
    }
    obj = obj_next;
  }
  rep.blocks = split_blocks(a, st.d);
  rep.final_loss = st.loss(a);
  rep.final_objective = obj;
  return rep;
}

}  // namespace

double LagStats::loss(const Mat& a_concat) const {
  const double quad = ((a_concat * gram).cwiseProduct(a_concat)).sum();
  const double lin = (a_concat.cwiseProduct(cross)).sum();
  return (sxx - 2.0 * lin + quad) / nt;
}

Mat LagStats::grad(const Mat& a_concat) const {
  return (2.0 / nt) * (a_concat * gram - cross);
}

double LagStats::lipschitz() const {
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  return 2.0 * std::max(0.0, es.eigenvalues().maxCoeff()) / nt;
}

LagStats build_lag_stats(const Dataset& ds, int p_student, LossRange range) {
  check_fit_inputs(ds, p_student);
  std::vector<StatsPartial> parts(static_cast<size_t>(ds.N));
#pragma omp parallel for schedule(static)
  for (int n = 0; n < ds.N; ++n) {
    parts[static_cast<size_t>(n)] =
        stats_for_trajectory(ds.traj[static_cast<size_t>(n)], p_student, range);
  }
  return assemble_stats(ds, p_student, parts);
}

double loss(const std::vector<Mat>& a, const Dataset& ds, LossRange range) {
  check_fit_inputs(ds, static_cast<int>(a.size()));
  check_blocks(a, ds.d);
  const Mat concat = concat_blocks(a);
  const int p_student = static_cast<int>(a.size());
  std::vector<double> parts(static_cast<size_t>(ds.N), 0.0);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < ds.N; ++n) {
    parts[static_cast<size_t>(n)] =
        loss_for_trajectory(concat, ds.traj[static_cast<size_t>(n)], p_student, range);
  }
  double acc = 0.0;
  for (double part : parts) acc += part;
  return acc / (static_cast<double>(ds.N) * ds.T);
}

std::vector<Mat> grad_loss(const std::vector<Mat>& a, const Dataset& ds,
                           LossRange range) {
  check_fit_inputs(ds, static_cast<int>(a.size()));
  check_blocks(a, ds.d);
  const Mat concat = concat_blocks(a);
  const int p_student = static_cast<int>(a.size());
  std::vector<Mat> parts(static_cast<size_t>(ds.N));
#pragma omp parallel for schedule(static)
  for (int n = 0; n < ds.N; ++n) {
    parts[static_cast<size_t>(n)] =
        grad_for_trajectory(concat, ds.traj[static_cast<size_t>(n)], p_student, range);
  }
  Mat g = Mat::Zero(ds.d, static_cast<Eigen::Index>(p_student) * ds.d);
  for (const Mat& part : parts) g += part;
  g *= -2.0 / (static_cast<double>(ds.N) * ds.T);
  return split_blocks(g, ds.d);
}

namespace ref {

LagStats build_lag_stats(const Dataset& ds, int p_student, LossRange range) {
  check_fit_inputs(ds, p_student);
  std::vector<StatsPartial> parts(static_cast<size_t>(ds.N));
  for (int n = 0; n < ds.N; ++n) {
    parts[static_cast<size_t>(n)] =
        stats_for_trajectory(ds.traj[static_cast<size_t>(n)], p_student, range);
  }
  return assemble_stats(ds, p_student, parts);
}

double loss(const std::vector<Mat>& a, const Dataset& ds, LossRange range) {
  check_fit_inputs(ds, static_cast<int>(a.size()));
  check_blocks(a, ds.d);
  const Mat concat = concat_blocks(a);
  double acc = 0.0;
  for (int n = 0; n < ds.N; ++n) {
    acc += loss_for_trajectory(concat, ds.traj[static_cast<size_t>(n)],
                               static_cast<int>(a.size()), range);
  }
  return acc / (static_cast<double>(ds.N) * ds.T);
}

}  // namespace ref

EstimateReport ols(const Dataset& ds, int p_student, LossRange range) {
  const LagStats st = build_lag_stats(ds, p_student, range);
  Eigen::SelfAdjointEigenSolver<Mat> es(st.gram);
  const Vec& ev = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(0.0, ev.maxCoeff());
  Vec inv = Vec::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff && ev(i) > 0.0) inv(i) = 1.0 / ev(i);
  }
  // min-Frobenius-norm solution of gram * A^T = cross^T
  const Mat pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  const Mat a = st.cross * pinv;

  EstimateReport rep;
  rep.p_student = p_student;
  rep.blocks = split_blocks(a, ds.d);
  rep.final_loss = st.loss(a);
  rep.final_objective = rep.final_loss;
  rep.iters = 0;
  rep.converged = true;
  return rep;
}

std::vector<Mat> project_op_ball(const std::vector<Mat>& a, double radius) {
  const int d = static_cast<int>(a.front().rows());
  check_blocks(a, d);
  return split_blocks(project_ball_concat(concat_blocks(a), radius), d);
}

std::vector<Mat> truncate_rank(const std::vector<Mat>& a, int r) {
  const int d = static_cast<int>(a.front().rows());
  check_blocks(a, d);
  if (r < 1 || r > d) throw std::invalid_argument("truncate_rank: r must be in [1, d]");
  std::vector<Mat> out;
  out.reserve(a.size());
  for (const Mat& b : a) out.push_back(truncate_rank_block(b, r));
  return out;
}

std::vector<Mat> svt_block(const std::vector<Mat>& a, double tau) {
  const int d = static_cast<int>(a.front().rows());
  check_blocks(a, d);
  if (!(tau >= 0.0)) throw std::invalid_argument("svt_block: tau must be >= 0");
  if (tau == 0.0) return a;
  std::vector<Mat> out;
  out.reserve(a.size());
  for (const Mat& b : a) out.push_back(svt_single_block(b, tau));
  return out;
}

double group_nuclear_norm(const std::vector<Mat>& a) {
  double acc = 0.0;
  for (const Mat& b : a) {
    Eigen::JacobiSVD<Mat> svd(b);
    acc += svd.singularValues().sum();
  }
  return acc;
}

EstimateReport estimate_constrained(const Dataset& ds, const EstimatorConfig& cfg) {
  cfg.validate(ds.d);
  const LagStats st = build_lag_stats(ds, cfg.p_student, cfg.loss_range);
  const double radius = cfg.D / std::sqrt(static_cast<double>(cfg.p_student));
  return run_descent(
      st, cfg, [radius](const Mat& a) { return project_ball_concat(a, radius); },
      [&st](const Mat& a) { return st.loss(a); });
}

EstimateReport estimate_low_rank(const Dataset& ds, const EstimatorConfig& cfg) {
  cfg.validate(ds.d);
  const LagStats st = build_lag_stats(ds, cfg.p_student, cfg.loss_range);
  const double radius = cfg.D / std::sqrt(static_cast<double>(cfg.p_student));
  const int r = cfg.r.value_or(ds.d);
  const int d = ds.d;
  auto prox = [radius, r, d](const Mat& a) {
    const Mat truncated =
        map_blocks(a, d, [r](const Mat& b) { return truncate_rank_block(b, r); });
    return project_ball_concat(truncated, radius);
  };
  return run_descent(st, cfg, prox, [&st](const Mat& a) { return st.loss(a); });
}

EstimateReport estimate_group_nuclear(const Dataset& ds, const EstimatorConfig& cfg) {
  cfg.validate(ds.d);
  const LagStats st = build_lag_stats(ds, cfg.p_student, cfg.loss_range);
  const double step = resolve_step(st, cfg);
  const double tau = step * cfg.lambda;
  const double lambda = cfg.lambda;
  const int d = ds.d;
  const double radius =
      cfg.project_ball ? cfg.D / std::sqrt(static_cast<double>(cfg.p_student)) : 0.0;

  EstimatorConfig pinned = cfg;
  pinned.step_size = step;  // keep prox threshold and step consistent
  auto prox = [tau, d, radius](const Mat& a) {
    Mat out = tau == 0.0 ? a : map_blocks(a, d, [tau](const Mat& b) {
      return svt_single_block(b, tau);
    });
    if (radius > 0.0) out = project_ball_concat(out, radius);
    return out;
  };
  auto objective = [&st, lambda, d](const Mat& a) {
    double obj = st.loss(a);
    if (lambda > 0.0) obj += lambda * group_nuclear_norm(split_blocks(a, d));
    return obj;
  };
  return run_descent(st, pinned, prox, objective);
}

EstimateReport fit(const Dataset& ds, const EstimatorConfig& cfg) {
  switch (cfg.kind) {
    case EstimatorKind::ols:
      return ols(ds, cfg.p_student, cfg.loss_range);
    case EstimatorKind::constrained_pgd:
      return estimate_constrained(ds, cfg);
    case EstimatorKind::iht_low_rank:
      return estimate_low_rank(ds, cfg);
    case EstimatorKind::group_nuclear_prox:
      return estimate_group_nuclear(ds, cfg);
  }
  throw std::invalid_argument("fit: unknown estimator kind");
}

namespace {

// First p' blocks of the model, zero-padded when p' exceeds the model order.
std::vector<Mat> target_blocks(const ARModel& a_star, int p_student) {
  std::vector<Mat> out;
  out.reserve(static_cast<size_t>(p_student));
  for (int k = 0; k < p_student; ++k) {
    out.push_back(k < a_star.p ? a_star.blocks[static_cast<size_t>(k)]
                               : Mat::Zero(a_star.d, a_star.d));
  }
  return out;
}

}  // namespace

ErmCertificate check_erm_certificate(const std::vector<Mat>& a_tilde,
                                     const Dataset& ds, const ARModel& a_star,
                                     std::optional<std::vector<Mat>> reference,
                                     double eps_tr, LossRange range) {
  validate_model(a_star);
  const int p_student = static_cast<int>(a_tilde.size());
  const LagStats st = build_lag_stats(ds, p_student, range);
  const double loss_tilde = st.loss(concat_blocks(a_tilde));
  const double loss_truth = st.loss(concat_blocks(target_blocks(a_star, p_student)));

  ErmCertificate cert;
  cert.gap_truth = loss_tilde - loss_truth;
  cert.vs_truth = cert.gap_truth <= 0.0;
  if (reference) {
    check_blocks(*reference, ds.d);
    if (static_cast<int>(reference->size()) != p_student) {
      throw std::invalid_argument("certificate reference must have p_student blocks");
    }
    const double loss_ref = st.loss(concat_blocks(*reference));
    cert.gap_reference = loss_tilde - loss_ref;
    cert.vs_reference = *cert.gap_reference <= eps_tr;
  }
  return cert;
}

void attach_certificates(EstimateReport& rep, const Dataset& ds,
                         const ARModel& a_star,
                         std::optional<std::vector<Mat>> reference,
                         double eps_tr, LossRange range) {
  const ErmCertificate cert =
      check_erm_certificate(rep.blocks, ds, a_star, std::move(reference), eps_tr, range);
  rep.certificate_vs_truth = cert.vs_truth;
  rep.surplus_eps = cert.gap_reference;
}

}  // namespace arsid
