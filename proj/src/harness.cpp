#include "arsid/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "arsid/estimators.hpp"
#include "arsid/io.hpp"
#include "arsid/rng.hpp"
#include "arsid/simulate.hpp"

namespace arsid {

namespace {

Mat haar_orthogonal(int d, std::uint64_t key, std::uint64_t counter_base) {
  Mat g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      g(i, j) = rng::standard_normal(
          key, counter_base + static_cast<std::uint64_t>(i) * d + j);
    }
  }
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {  // fix signs so the factorization is unique
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

std::vector<Mat> scaled_orthogonal_blocks(int count, int d, double scale,
                                          std::uint64_t key) {
  std::vector<Mat> blocks;
  blocks.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    const std::uint64_t base =
        static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(d) * d;
    blocks.push_back(scale * haar_orthogonal(d, key, base));
  }
  return blocks;
}

}  // namespace

ARModel generate_ground_truth(const GroundTruthSpec& spec) {
  if (spec.p < 1 || spec.d < 1) {
    throw std::invalid_argument("ground truth: p and d must be >= 1");
  }
  if (!(spec.alpha > 0.0)) throw std::invalid_argument("ground truth: alpha must be > 0");
  if (spec.rank && (*spec.rank < 1 || *spec.rank >= spec.d)) {
    throw std::invalid_argument("ground truth: rank must be in [1, d)");
  }
  const std::uint64_t key = rng::derive(spec.seed, rng::kStreamTruth);
  ARModel m;
  m.p = spec.p;
  m.d = spec.d;
  m.sigma = spec.sigma;
  m.blocks = scaled_orthogonal_blocks(spec.p, spec.d, spec.alpha / spec.p, key);
  if (spec.rank) m.blocks = truncate_rank(m.blocks, *spec.rank);
  validate_model(m);
  return m;
}

std::vector<Mat> student_init(int p_student, int d, double alpha_init,
                              std::uint64_t seed) {
  if (p_student < 1 || d < 1) {
    throw std::invalid_argument("student_init: p_student and d must be >= 1");
  }
  const std::uint64_t key = rng::derive(seed, rng::kStreamInit);
  return scaled_orthogonal_blocks(p_student, d, alpha_init / p_student, key);
}

namespace {

std::vector<Mat> truth_target(const ARModel& truth, int p_student) {
  std::vector<Mat> target;
  target.reserve(static_cast<size_t>(p_student));
  for (int k = 0; k < p_student; ++k) {
    target.push_back(k < truth.p ? truth.blocks[static_cast<size_t>(k)]
                                 : Mat::Zero(truth.d, truth.d));
  }
  return target;
}

double frob_sq_error(const std::vector<Mat>& fitted, const std::vector<Mat>& target) {
  double acc = 0.0;
  for (size_t k = 0; k < fitted.size(); ++k) acc += (fitted[k] - target[k]).squaredNorm();
  return acc;
}

bool needs_iterative_init(EstimatorKind kind) {
  return kind != EstimatorKind::ols;
}

}  // namespace

ResultRecord run_cell(const ARModel& truth, const CellConfig& cell,
                      std::uint64_t seed) {
  ResultRecord rec;
  rec.d = cell.d;
  rec.p = cell.p;
  rec.p_student = cell.p_student;
  rec.r = cell.r;
  rec.N = cell.N;
  rec.T = cell.T;
  rec.seed = static_cast<long long>(seed);
  rec.estimator = to_string(cell.kind);
  rec.lambda = cell.lambda;
  rec.step_size = cell.step_size;
  rec.beta = static_cast<long long>(cell.N) * cell.T;
  rec.gamma = static_cast<long long>(cell.p_student) * cell.d * cell.r;
  rec.beta_tilde = static_cast<double>(rec.beta) /
                   std::log(1.0 + std::sqrt(static_cast<double>(cell.N)));

  const auto started = std::chrono::steady_clock::now();
  try {
    if (cell.T < cell.p_student) {
      throw std::invalid_argument("cell requires T >= p_student");
    }
    NoiseSpec noise;
    noise.family = NoiseFamily::gaussian;
    noise.sigma = cell.sigma;
    auto [ds, e] = simulate(truth, noise, cell.N, cell.T, seed);

    EstimatorConfig cfg;
    cfg.kind = cell.kind;
    cfg.p_student = cell.p_student;
    cfg.D = cell.D;
    cfg.r = cell.r;
    cfg.lambda = cell.lambda;
    if (cell.step_size > 0.0) cfg.step_size = cell.step_size;
    cfg.max_iters = cell.max_iters;
    cfg.tol = cell.tol;
    cfg.loss_range = cell.range;
    if (needs_iterative_init(cell.kind)) {
      cfg.init = student_init(cell.p_student, cell.d, 1.0, seed);
    }

    const EstimateReport rep = fit(ds, cfg);
    rec.error_frob_sq = frob_sq_error(rep.blocks, truth_target(truth, cell.p_student));
    rec.train_loss = rep.final_loss;
    rec.status = rep.converged ? "ok" : "nonconv";
  } catch (const std::exception& ex) {
    std::string what = ex.what();
    for (char& c : what) {
      if (c == ',' || c == '\n') c = ';';
    }
    rec.status = "error:" + what;
    rec.error_frob_sq = std::nan("");
    rec.train_loss = std::nan("");
  }

  rec.kappa = cell.kappa.value_or(0.0);
  rec.eta = cell.eta.value_or(1.0);
  try {
    if (!cell.kappa) {
      rec.kappa = condition_number(truth, cell.T, cell.diag).kappa;
    }
    if (!cell.eta && cell.p_student < truth.p) {
      rec.eta = misspec_factors(truth, cell.p_student, cell.T, cell.diag).eta;
    }
  } catch (const std::exception&) {
    rec.kappa = std::nan("");
  }

  rec.runtime_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  return rec;
}

void SweepSpec::validate() const {
  auto all_positive = [](const auto& v) {
    return std::all_of(v.begin(), v.end(), [](auto x) { return x > 0; });
  };
  if (d.empty() || !all_positive(d)) throw std::invalid_argument("sweep: d grid must be positive");
  if (p.empty() || !all_positive(p)) throw std::invalid_argument("sweep: p grid must be positive");
  if (!all_positive(p_student)) throw std::invalid_argument("sweep: p_student grid must be positive");
  if (!all_positive(r)) throw std::invalid_argument("sweep: r grid must be positive");
  if (N.empty() || !all_positive(N)) throw std::invalid_argument("sweep: N grid must be positive");
  if (T_multipliers.empty() || !all_positive(T_multipliers)) {
    throw std::invalid_argument("sweep: T multipliers must be positive");
  }
  if (estimators.empty()) throw std::invalid_argument("sweep: estimator list is empty");
  if (seeds.empty()) throw std::invalid_argument("sweep: seeds list is empty");
  if (lambda_grid.empty() || step_grid.empty()) {
    throw std::invalid_argument("sweep: lambda and step grids must be non-empty");
  }
}

namespace {

struct CellJob {
  CellConfig cell;
  std::uint64_t seed;
};

bool uses_lambda_grid(EstimatorKind kind) {
  return kind == EstimatorKind::group_nuclear_prox;
}

bool uses_step_grid(EstimatorKind kind) {
  return kind != EstimatorKind::ols;
}

int cell_T(double multiplier, int p, int d, int r, int N, int p_student) {
  const double raw = multiplier * static_cast<double>(p) * d * r / N;
  return std::max(static_cast<int>(std::ceil(raw)), p_student + 1);
}

std::vector<CellJob> enumerate_cells(const SweepSpec& spec) {
  std::vector<CellJob> jobs;
  for (int d : spec.d) {
    for (int p : spec.p) {
      const std::vector<int> p_students =
          spec.p_student.empty() ? std::vector<int>{p} : spec.p_student;
      for (int p_student : p_students) {
        const std::vector<int> ranks = spec.r.empty() ? std::vector<int>{d} : spec.r;
        for (int r : ranks) {
          for (int N : spec.N) {
            for (double mult : spec.T_multipliers) {
              for (EstimatorKind kind : spec.estimators) {
                const std::vector<double> lambdas =
                    uses_lambda_grid(kind) ? spec.lambda_grid : std::vector<double>{0.0};
                const std::vector<double> steps =
                    uses_step_grid(kind) ? spec.step_grid : std::vector<double>{0.0};
                for (double lambda : lambdas) {
                  for (double step : steps) {
                    for (std::uint64_t seed : spec.seeds) {
                      CellJob job;
                      job.cell.d = d;
                      job.cell.p = p;
                      job.cell.p_student = p_student;
                      job.cell.r = r;
                      job.cell.N = N;
                      job.cell.T = cell_T(mult, p, d, r, N, p_student);
                      job.cell.kind = kind;
                      job.cell.lambda = lambda;
                      job.cell.step_size = step;
                      job.cell.D = spec.D;
                      job.cell.range = spec.range_mode;
                      job.cell.max_iters = spec.max_iters;
                      job.cell.tol = spec.tol;
                      job.cell.sigma = spec.sigma;
                      job.cell.diag = spec.diag;
                      job.seed = seed;
                      jobs.push_back(job);
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  return jobs;
}

struct TruthKey {
  int p, d, r;
  std::uint64_t seed;
  bool operator<(const TruthKey& o) const {
    return std::tie(p, d, r, seed) < std::tie(o.p, o.d, o.r, o.seed);
  }
};

ARModel make_truth(const TruthKey& key, const SweepSpec& spec) {
  GroundTruthSpec gt;
  gt.p = key.p;
  gt.d = key.d;
  gt.alpha = spec.alpha;
  if (key.r < key.d) gt.rank = key.r;
  gt.seed = key.seed;
  gt.sigma = spec.sigma;
  return generate_ground_truth(gt);
}

// Mean over the seed axis; runtime averaged, seed set to -1, status "avg".
std::vector<ResultRecord> seed_averages(const std::vector<ResultRecord>& raw) {
  struct Group {
    ResultRecord sum;
    int count = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Group> groups;
  for (const ResultRecord& rec : raw) {
    if (rec.status != "ok" && rec.status != "nonconv") continue;
    std::ostringstream key;
    key << rec.d << '|' << rec.p << '|' << rec.p_student << '|' << rec.r << '|'
        << rec.N << '|' << rec.T << '|' << rec.estimator << '|'
        << format_double(rec.lambda) << '|' << format_double(rec.step_size);
    auto [it, inserted] = groups.try_emplace(key.str());
    if (inserted) {
      order.push_back(key.str());
      it->second.sum = rec;
      it->second.sum.error_frob_sq = 0.0;
      it->second.sum.train_loss = 0.0;
      it->second.sum.kappa = 0.0;
      it->second.sum.eta = 0.0;
      it->second.sum.runtime_ms = 0.0;
    }
    Group& g = it->second;
    g.sum.error_frob_sq += rec.error_frob_sq;
    g.sum.train_loss += rec.train_loss;
    g.sum.kappa += rec.kappa;
    g.sum.eta += rec.eta;
    g.sum.runtime_ms += rec.runtime_ms;
    g.count += 1;
  }
  std::vector<ResultRecord> out;
  for (const std::string& key : order) {
    Group& g = groups[key];
    ResultRecord avg = g.sum;
    avg.error_frob_sq /= g.count;
    avg.train_loss /= g.count;
    avg.kappa /= g.count;
    avg.eta /= g.count;
    avg.runtime_ms /= g.count;
    avg.seed = -1;
    avg.status = "avg";
    out.push_back(std::move(avg));
  }
  return out;
}

}  // namespace

ResultTable run_sweep(const SweepSpec& spec, int workers) {
  spec.validate();
  std::vector<CellJob> jobs = enumerate_cells(spec);

  // Phase 1: unique truths and their (kappa, eta) diagnostics.
  std::map<TruthKey, ARModel> truths;
  struct DiagKey {
    TruthKey truth;
    int T, p_student;
    bool operator<(const DiagKey& o) const {
      return std::tie(truth, T, p_student) < std::tie(o.truth, o.T, o.p_student);
    }
  };
  std::map<DiagKey, std::pair<double, double>> diag_cache;  // kappa, eta
  for (const CellJob& job : jobs) {
    const TruthKey tk{job.cell.p, job.cell.d, job.cell.r, job.seed};
    truths.try_emplace(tk, ARModel{});
    diag_cache.try_emplace(DiagKey{tk, job.cell.T, job.cell.p_student}, 0.0, 1.0);
  }
  for (auto& [key, model] : truths) {
    model = make_truth(key, spec);  // cheap; QR of p small matrices
  }
  {
    std::vector<std::pair<const DiagKey*, std::pair<double, double>*>> items;
    items.reserve(diag_cache.size());
    for (auto& [key, value] : diag_cache) items.emplace_back(&key, &value);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(items.size()); ++i) {
      const DiagKey& key = *items[static_cast<size_t>(i)].first;
      const ARModel& truth = truths.at(key.truth);
      double kappa = std::nan("");
      double eta = 1.0;
      try {
        kappa = condition_number(truth, key.T, spec.diag).kappa;
        if (key.p_student < key.truth.p) {
          eta = misspec_factors(truth, key.p_student, key.T, spec.diag).eta;
        }
      } catch (const std::exception&) {
      }
      *items[static_cast<size_t>(i)].second = {kappa, eta};
    }
  }

  // Phase 2: cells, order-independent storage.
  std::vector<ResultRecord> raw(jobs.size());
  const int nthreads = workers > 0 ? workers : 0;
#pragma omp parallel for schedule(dynamic) num_threads(nthreads > 0 ? nthreads : omp_get_max_threads())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i) {
    CellJob job = jobs[static_cast<size_t>(i)];
    const TruthKey tk{job.cell.p, job.cell.d, job.cell.r, job.seed};
    const auto diag =
        diag_cache.at(DiagKey{tk, job.cell.T, job.cell.p_student});
    job.cell.kappa = diag.first;
    job.cell.eta = diag.second;
    raw[static_cast<size_t>(i)] = run_cell(truths.at(tk), job.cell, job.seed);
  }

  ResultTable table;
  table.rows = raw;
  const std::vector<ResultRecord> averages = seed_averages(raw);
  table.rows.insert(table.rows.end(), averages.begin(), averages.end());
  return table;
}

SweepSpec preset_sweep(const std::string& name) {
  SweepSpec spec;
  if (name == "appendix-e-full") {
    spec.d = {5, 10, 15};
    spec.p = {5, 10, 15};
    spec.N = {1, 5, 10};
    spec.T_multipliers = {1, 5, 10, 25, 50};
    spec.estimators = {EstimatorKind::ols};
    spec.lambda_grid = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    spec.step_grid = {1e-1, 1e-2, 1e-3};
    spec.seeds = {1, 2, 3};
  } else if (name == "appendix-e-desk") {
    spec.d = {5, 10};
    spec.p = {5, 10};
    spec.N = {5};
    spec.T_multipliers = {5, 25, 50};
    spec.estimators = {EstimatorKind::ols};
    spec.seeds = {1, 2, 3};
  } else if (name == "misspec-desk") {
    spec.d = {5};
    spec.p = {15};
    spec.p_student = {5, 10, 15};
    spec.N = {5};
    spec.T_multipliers = {5, 25, 50};
    spec.estimators = {EstimatorKind::ols};
    spec.seeds = {1, 2, 3};
  } else if (name == "lowrank-desk") {
    spec.d = {10};
    spec.p = {5};
    spec.r = {3};
    spec.N = {5};
    spec.T_multipliers = {5};
    spec.estimators = {EstimatorKind::ols, EstimatorKind::group_nuclear_prox};
    spec.lambda_grid = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    spec.step_grid = {1e-1, 1e-2};
    spec.seeds = {1, 2, 3};
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return spec;
}

std::vector<std::string> preset_names() {
  return {"appendix-e-full", "appendix-e-desk", "misspec-desk", "lowrank-desk"};
}

bool records_equivalent(const ResultRecord& a, const ResultRecord& b) {
  return a.d == b.d && a.p == b.p && a.p_student == b.p_student && a.r == b.r &&
         a.N == b.N && a.T == b.T && a.seed == b.seed && a.estimator == b.estimator &&
         a.lambda == b.lambda && a.step_size == b.step_size &&
         a.error_frob_sq == b.error_frob_sq && a.train_loss == b.train_loss &&
         a.beta == b.beta && a.gamma == b.gamma && a.beta_tilde == b.beta_tilde &&
         a.kappa == b.kappa && a.eta == b.eta && a.status == b.status;
}

std::vector<TunedCell> tune_grid(const ResultTable& table, int expected_points) {
  std::vector<std::string> order;
  std::map<std::string, TunedCell> cells;
  for (const ResultRecord& rec : table.rows) {
    if (rec.status != "avg") continue;
    std::ostringstream key;
    key << rec.d << '|' << rec.p << '|' << rec.p_student << '|' << rec.r << '|'
        << rec.N << '|' << rec.T << '|' << rec.estimator;
    auto [it, inserted] = cells.try_emplace(key.str());
    if (inserted) {
      order.push_back(key.str());
      it->second.best = rec;
      it->second.points = 1;
    } else {
      TunedCell& cell = it->second;
      cell.points += 1;
      // diverged fits report non-finite error and can never win
      const bool rec_ok = std::isfinite(rec.error_frob_sq);
      const bool best_ok = std::isfinite(cell.best.error_frob_sq);
      const bool better =
          (rec_ok && !best_ok) ||
          (rec_ok && best_ok &&
           (rec.error_frob_sq < cell.best.error_frob_sq ||
            (rec.error_frob_sq == cell.best.error_frob_sq &&
             rec.lambda > cell.best.lambda)));
      if (better) cell.best = rec;
    }
  }
  std::vector<TunedCell> out;
  for (const std::string& key : order) {
    TunedCell cell = cells[key];
    cell.complete = cell.points >= expected_points;
    out.push_back(std::move(cell));
  }
  return out;
}

namespace {

std::vector<const ResultRecord*> plot_rows(const ResultTable& table) {
  std::vector<const ResultRecord*> rows;
  for (const ResultRecord& rec : table.rows) {
    if (rec.status == "avg") rows.push_back(&rec);
  }
  if (rows.empty()) {
    for (const ResultRecord& rec : table.rows) {
      if (rec.status == "ok" || rec.status == "nonconv") rows.push_back(&rec);
    }
  }
  return rows;
}

}  // namespace

SlopeFit fit_slope(const ResultTable& table, XQuantity x) {
  std::vector<double> lx, ly;
  std::vector<double> distinct;
  for (const ResultRecord* rec : plot_rows(table)) {
    const double xv = x == XQuantity::beta_over_gamma
                          ? static_cast<double>(rec->beta) / rec->gamma
                          : rec->beta_tilde / rec->gamma;
    if (!(xv > 0.0) || !(rec->error_frob_sq > 0.0) ||
        !std::isfinite(rec->error_frob_sq)) {
      continue;
    }
    lx.push_back(std::log(xv));
    ly.push_back(std::log(rec->error_frob_sq));
    if (std::none_of(distinct.begin(), distinct.end(),
                     [xv](double v) { return v == xv; })) {
      distinct.push_back(xv);
    }
  }
  if (distinct.size() < 3) {
    throw std::invalid_argument("fit_slope: needs at least 3 distinct x values");
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  SlopeFit fit;
  fit.points = static_cast<int>(lx.size());
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (size_t i = 0; i < lx.size(); ++i) {
    const double pred = fit.intercept + fit.slope * lx[i];
    ss_res += (ly[i] - pred) * (ly[i] - pred);
    ss_tot += (ly[i] - mean_y) * (ly[i] - mean_y);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res <= 1e-300 ? 1.0 : 0.0);
  return fit;
}

void export_csv(const ResultTable& table, const std::string& path) {
  std::ostringstream out;
  out << "d,p,p_student,r,N,T,seed,estimator,lambda,step_size,error_frob_sq,"
         "train_loss,beta,gamma,beta_tilde,kappa,eta,runtime_ms,status\n";
  for (const ResultRecord& r : table.rows) {
    out << r.d << ',' << r.p << ',' << r.p_student << ',' << r.r << ',' << r.N
        << ',' << r.T << ',' << r.seed << ',' << r.estimator << ','
        << format_double(r.lambda) << ',' << format_double(r.step_size) << ','
        << format_double(r.error_frob_sq) << ',' << format_double(r.train_loss)
        << ',' << r.beta << ',' << r.gamma << ',' << format_double(r.beta_tilde)
        << ',' << format_double(r.kappa) << ',' << format_double(r.eta) << ','
        << format_double(r.runtime_ms) << ',' << r.status << '\n';
  }
  write_text_atomic(path, out.str());
}

ResultTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results csv " + path);
  ResultTable table;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 19) throw std::runtime_error("malformed results row: " + line);
    ResultRecord r;
    r.d = std::stoi(fields[0]);
    r.p = std::stoi(fields[1]);
    r.p_student = std::stoi(fields[2]);
    r.r = std::stoi(fields[3]);
    r.N = std::stoi(fields[4]);
    r.T = std::stoi(fields[5]);
    r.seed = std::stoll(fields[6]);
    r.estimator = fields[7];
    r.lambda = std::stod(fields[8]);
    r.step_size = std::stod(fields[9]);
    r.error_frob_sq = std::stod(fields[10]);
    r.train_loss = std::stod(fields[11]);
    r.beta = std::stoll(fields[12]);
    r.gamma = std::stoll(fields[13]);
    r.beta_tilde = std::stod(fields[14]);
    r.kappa = std::stod(fields[15]);
    r.eta = std::stod(fields[16]);
    r.runtime_ms = std::stod(fields[17]);
    r.status = fields[18];
    table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace arsid
