#include "arsid/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace arsid {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sidecar_path(const std::string& dataset_path) {
  const std::string suffix = ".csv";
  if (dataset_path.size() > suffix.size() &&
      dataset_path.compare(dataset_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return dataset_path.substr(0, dataset_path.size() - suffix.size()) + ".meta.json";
  }
  return dataset_path + ".meta.json";
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ostringstream out;
  out << "n,t,i,value\n";
  for (int n = 0; n < ds.N; ++n) {
    const Mat& traj = ds.traj[static_cast<size_t>(n)];
    for (int t = 1; t <= ds.T; ++t) {
      for (int i = 0; i < ds.d; ++i) {
        out << n << ',' << t << ',' << i << ',' << format_double(traj(t - 1, i)) << '\n';
      }
    }
  }
  write_text_atomic(path, out.str());

  json meta;
  meta["N"] = ds.N;
  meta["T"] = ds.T;
  meta["d"] = ds.d;
  meta["seed"] = ds.seed;
  if (ds.noise) {
    meta["noise_family"] = to_string(ds.noise->family);
    meta["sigma"] = ds.noise->sigma;
  } else {
    meta["noise_family"] = nullptr;
    meta["sigma"] = nullptr;
  }
  write_text_atomic(sidecar_path(path), meta.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream meta_in(sidecar_path(path));
  if (!meta_in) throw std::runtime_error("missing dataset sidecar " + sidecar_path(path));
  json meta = json::parse(meta_in);

  Dataset ds;
  ds.N = meta.at("N").get<int>();
  ds.T = meta.at("T").get<int>();
  ds.d = meta.at("d").get<int>();
  ds.seed = meta.value("seed", std::uint64_t{0});
  if (meta.contains("noise_family") && !meta["noise_family"].is_null()) {
    NoiseSpec spec;
    spec.family = noise_family_from_string(meta["noise_family"].get<std::string>());
    spec.sigma = meta.value("sigma", 1.0);
    ds.noise = spec;
  }
  if (ds.N < 1 || ds.T < 1 || ds.d < 1) {
    throw std::runtime_error("dataset sidecar has invalid dimensions");
  }
  ds.traj.assign(static_cast<size_t>(ds.N), Mat::Zero(ds.T, ds.d));

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int n = 0, t = 0, i = 0;
    double value = 0.0;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf", &n, &t, &i, &value) != 4) {
      throw std::runtime_error("malformed dataset row: " + line);
    }
    if (n < 0 || n >= ds.N || t < 1 || t > ds.T || i < 0 || i >= ds.d) {
      throw std::runtime_error("dataset row out of range: " + line);
    }
    ds.traj[static_cast<size_t>(n)](t - 1, i) = value;
  }
  return ds;
}

void save_blocks(const std::vector<Mat>& blocks, const std::string& path) {
  std::ostringstream out;
  out << "k,row,col,value\n";
  for (size_t k = 0; k < blocks.size(); ++k) {
    const Mat& b = blocks[k];
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.cols(); ++c) {
        out << (k + 1) << ',' << r << ',' << c << ',' << format_double(b(r, c)) << '\n';
      }
    }
  }
  write_text_atomic(path, out.str());
}

std::vector<Mat> load_blocks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open blocks file " + path);
  std::string line;
  std::getline(in, line);
  struct Entry {
    int k, r, c;
    double v;
  };
  std::vector<Entry> entries;
  int max_k = 0, max_rc = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Entry e{};
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf", &e.k, &e.r, &e.c, &e.v) != 4) {
      throw std::runtime_error("malformed blocks row: " + line);
    }
    max_k = std::max(max_k, e.k);
    max_rc = std::max({max_rc, e.r + 1, e.c + 1});
    entries.push_back(e);
  }
  if (max_k < 1 || max_rc < 1) throw std::runtime_error("blocks file is empty");
  std::vector<Mat> blocks(static_cast<size_t>(max_k), Mat::Zero(max_rc, max_rc));
  for (const Entry& e : entries) {
    blocks[static_cast<size_t>(e.k - 1)](e.r, e.c) = e.v;
  }
  return blocks;
}

std::string model_to_json(const ARModel& m) {
  json j;
  j["p"] = m.p;
  j["d"] = m.d;
  j["sigma"] = m.sigma;
  json blocks = json::array();
  for (const Mat& b : m.blocks) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < b.cols(); ++c) row.push_back(b(r, c));
      rows.push_back(row);
    }
    blocks.push_back(rows);
  }
  j["blocks"] = blocks;
  return j.dump(2) + "\n";
}

ARModel model_from_json(const std::string& text) {
  json j = json::parse(text);
  ARModel m;
  m.p = j.at("p").get<int>();
  m.d = j.at("d").get<int>();
  m.sigma = j.value("sigma", 1.0);
  for (const auto& block : j.at("blocks")) {
    Mat b(m.d, m.d);
    for (int r = 0; r < m.d; ++r) {
      for (int c = 0; c < m.d; ++c) b(r, c) = block.at(r).at(c).get<double>();
    }
    m.blocks.push_back(std::move(b));
  }
  validate_model(m);
  return m;
}

void save_model(const ARModel& m, const std::string& path) {
  write_text_atomic(path, model_to_json(m));
}

ARModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

std::string diagnostics_to_json(const Diagnostics& diag) {
  json j;
  j["op_norm_M"] = diag.op_norm_M;
  j["kappa"] = diag.kappa;
  j["zeta"] = diag.zeta;
  j["spectral_radius"] = diag.spectral_radius;
  j["stability"] = to_string(diag.stability);
  if (diag.eta) j["eta"] = *diag.eta;
  if (diag.d_prime) j["d_prime"] = *diag.d_prime;
  return j.dump(2) + "\n";
}

std::string estimate_report_to_json(const EstimateReport& rep,
                                    const std::string& blocks_file) {
  json j;
  j["p_student"] = rep.p_student;
  j["final_loss"] = rep.final_loss;
  j["final_objective"] = rep.final_objective;
  j["iters"] = rep.iters;
  j["converged"] = rep.converged;
  j["certificate_vs_truth"] =
      rep.certificate_vs_truth ? json(*rep.certificate_vs_truth) : json(nullptr);
  j["surplus_eps"] = rep.surplus_eps ? json(*rep.surplus_eps) : json(nullptr);
  j["blocks_file"] = blocks_file;
  return j.dump(2) + "\n";
}

namespace {

template <typename T>
void read_vec(const json& j, const char* key, std::vector<T>& out) {
  if (j.contains(key)) out = j.at(key).get<std::vector<T>>();
}

}  // namespace

SweepSpec sweep_spec_from_json(const std::string& text) {
  json j = json::parse(text);
  SweepSpec spec;
  read_vec(j, "d", spec.d);
  read_vec(j, "p", spec.p);
  read_vec(j, "p_student", spec.p_student);
  read_vec(j, "r", spec.r);
  read_vec(j, "N", spec.N);
  read_vec(j, "T_multipliers", spec.T_multipliers);
  read_vec(j, "lambda_grid", spec.lambda_grid);
  read_vec(j, "step_grid", spec.step_grid);
  read_vec(j, "seeds", spec.seeds);
  if (j.contains("estimators")) {
    spec.estimators.clear();
    for (const auto& name : j.at("estimators")) {
      spec.estimators.push_back(estimator_kind_from_string(name.get<std::string>()));
    }
  }
  if (j.contains("range_mode")) {
    spec.range_mode = loss_range_from_string(j.at("range_mode").get<std::string>());
  }
  spec.alpha = j.value("alpha", spec.alpha);
  spec.sigma = j.value("sigma", spec.sigma);
  spec.D = j.value("D", spec.D);
  spec.max_iters = j.value("max_iters", spec.max_iters);
  spec.tol = j.value("tol", spec.tol);
  spec.diag.tol = j.value("diag_tol", spec.diag.tol);
  spec.diag.max_iters = j.value("diag_iters", spec.diag.max_iters);
  spec.validate();
  return spec;
}

std::string sweep_spec_to_json(const SweepSpec& spec) {
  json j;
  j["d"] = spec.d;
  j["p"] = spec.p;
  j["p_student"] = spec.p_student;
  j["r"] = spec.r;
  j["N"] = spec.N;
  j["T_multipliers"] = spec.T_multipliers;
  json est = json::array();
  for (EstimatorKind k : spec.estimators) est.push_back(to_string(k));
  j["estimators"] = est;
  j["lambda_grid"] = spec.lambda_grid;
  j["step_grid"] = spec.step_grid;
  j["seeds"] = spec.seeds;
  j["range_mode"] = to_string(spec.range_mode);
  j["alpha"] = spec.alpha;
  j["sigma"] = spec.sigma;
  j["D"] = spec.D;
  j["max_iters"] = spec.max_iters;
  j["tol"] = spec.tol;
  j["diag_tol"] = spec.diag.tol;
  j["diag_iters"] = spec.diag.max_iters;
  return j.dump(2) + "\n";
}

SweepSpec load_sweep_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sweep spec " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sweep_spec_from_json(ss.str());
}

}  // namespace arsid
