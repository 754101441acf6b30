#pragma once

#include <string>
#include <vector>

#include "arsid/estimators.hpp"
#include "arsid/harness.hpp"
#include "arsid/operators.hpp"
#include "arsid/types.hpp"

namespace arsid {

// All writers go through a temp file + rename in the destination directory.
void write_text_atomic(const std::string& path, const std::string& content);

// Doubles formatted with 17 significant digits so text round-trips are exact.
std::string format_double(double v);

// Dataset container: CSV with header n,t,i,value (n 0-based trajectory,
// t 1-based time, i 0-based coordinate) plus a JSON sidecar
// {N, T, d, seed, noise_family, sigma} at sidecar_path(path).
std::string sidecar_path(const std::string& dataset_path);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Block matrices: CSV with header k,row,col,value (k 1-based block index).
void save_blocks(const std::vector<Mat>& blocks, const std::string& path);
std::vector<Mat> load_blocks(const std::string& path);

// Model JSON: {"p":, "d":, "sigma":, "blocks": [[[row], ...], ...]}.
std::string model_to_json(const ARModel& m);
ARModel model_from_json(const std::string& text);
void save_model(const ARModel& m, const std::string& path);
ARModel load_model(const std::string& path);

// Diagnostics JSON with fixed field names; eta / d_prime appear only when
// they were computed (p' < p).
std::string diagnostics_to_json(const Diagnostics& diag);

std::string estimate_report_to_json(const EstimateReport& rep,
                                    const std::string& blocks_file);

// Sweep configuration mirroring SweepSpec field names; absent fields keep
// their defaults.
SweepSpec sweep_spec_from_json(const std::string& text);
std::string sweep_spec_to_json(const SweepSpec& spec);
SweepSpec load_sweep_spec(const std::string& path);

}  // namespace arsid
