#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "swarmdet/ifs.hpp"
#include "swarmdet/mcgassl.hpp"

namespace swarmdet {

// One experiment description, loaded from JSON. Field names in the file
// match the member names below; unknown keys are rejected so typos fail
// loudly instead of silently running defaults.
struct ExperimentConfig {
  std::string problem;  // "p1" | "p2" | "meta" | "purity"
  std::vector<IfsKind> ifs_kinds;
  std::vector<std::vector<int>> cluster_sizes;  // one grid entry per scenario
  int trials = 20;
  std::uint64_t seed = 1;
  std::string out_dir;
  Eigen::Vector3d arena{1000.0, 1000.0, 100.0};
  bool save_artifacts = true;
  int purity_seeds = 10;
  std::string meta_checkpoint;  // optional pre-trained encoder for p2/purity
  GasslHyper gassl;
  McHyper mc;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);

// The follow strategy used by experiments: defaults for f1..f6, the frozen
// network (derived from the config seed) for f7.
IfsSpec experiment_ifs(IfsKind kind, std::uint64_t config_seed);

struct P1Trial {
  std::string ifs;
  int m = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  int true_head = -1;
  std::vector<int> candidates;
  double j_s = 0.0;
};

struct P1Cell {
  std::string ifs;
  int m = 0;
  int trials = 0;
  double detection_rate = 0.0;  // 1 + mean J_s
};

struct P2Trial {
  std::string ifs;
  int scenario = 0;
  std::vector<int> sizes;
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  int rounds = 0;
  double j_m = 0.0;        // valid when success
  double redundancy = 0.0;
  DetectionLedger ledger;
};

struct P2Scenario {
  std::string ifs;
  int scenario = 0;
  std::vector<int> sizes;
  int clusters = 0;
  int total = 0;
  int trials = 0;
  double success_rate = 0.0;
  double mean_rounds = 0.0;      // over successful trials
  double mean_redundancy = 0.0;  // over successful trials
  double mean_j_m = 0.0;
};

struct PurityRow {
  std::string ifs;
  int trial = 0;
  std::uint64_t seed = 0;
  double gru = 0.0;
  double raw = 0.0;
};

struct PurityCell {
  std::string ifs;
  int trials = 0;
  double mean_gru = 0.0;
  double mean_raw = 0.0;
};

struct ReportBundle {
  std::vector<P1Trial> p1_trials;
  std::vector<P1Cell> p1_cells;
  std::vector<P2Trial> p2_trials;
  std::vector<P2Scenario> p2_scenarios;
  std::vector<PurityRow> purity_rows;
  std::vector<PurityCell> purity_cells;
  std::vector<std::string> files;  // paths written, relative to out_dir
};

// Single-cluster detection grid (ifs kind x cluster size x trials). Writes
// trial and cell CSVs, a JSON report, and (optionally) the attention
// artifacts of each cell's first trial.
ReportBundle run_p1_suite(const ExperimentConfig& config);

// Multi-cluster detection grid. Trains the meta encoder unless a checkpoint
// is configured; writes per-trial ledgers, scenario CSVs, and the encoder.
ReportBundle run_p2_suite(const ExperimentConfig& config);

// Meta-training alone: writes the encoder checkpoint and the per-episode
// query loss curve.
ReportBundle run_meta(const ExperimentConfig& config);

// K-Means purity on encoded features versus raw flattened windows, per ifs
// kind, averaged over purity_seeds trials.
ReportBundle compare_purity_baselines(const ExperimentConfig& config);

// Rewrites every attention artifact JSON in run_dir as matrix CSVs (one
// mean matrix plus one per head). Returns the paths written.
std::vector<std::string> emit_attention_heatmap(const std::string& run_dir);

// Attention artifact schema shared by run_p1_suite and the heatmap emitter.
nlohmann::json artifacts_to_json(const TrainArtifacts& artifacts, const LeaderVote& vote);

GruEncoderParams load_encoder(const std::string& path);
void save_encoder(const GruEncoderParams& enc, const std::string& path);

}  // namespace swarmdet
