#pragma once

#include <iosfwd>

#include "pbrl/envgen.hpp"

namespace pbrl {

/// One experiment cell: an environment family, an algorithm, hyperparameters
/// and a list of seeds. Each seed generates its own environment instance and
/// RNG streams.
struct ExperimentConfig {
  enum class Experiment { Stackelberg, Incentive, Shaping, Preference };
  enum class Algo { PbrlValue, PbrlBellman, PbrlNi, IndependentPg };

  Experiment experiment = Experiment::Stackelberg;
  Algo algo = Algo::PbrlValue;

  double lambda = 2.0;
  double alpha = 0.1;
  double tau = 0.5;
  double gamma = 0.9;
  int outer_iters = 300;
  int inner_iters = 1;   // T
  double oracle_eta = 0.1;
  int traj_len = 5;
  int batch = 16;
  GradMode grad_mode = GradMode::MonteCarlo;

  int env_size = 20;
  int n_actions1 = 5;
  int n_actions2 = 5;
  double sparsity = 0.7;

  // preference experiment
  int n_pairs = 500;
  int segment_len = 5;

  std::vector<uint64_t> seeds = {0};
  std::string out_dir;

  /// Hyperparameters used for the published figures (per experiment/algo);
  /// also restores the full environment sizes.
  void apply_paper_defaults();
  void validate() const;
  std::string canonical_text() const;
  uint64_t hash() const;
};

struct ExperimentResult {
  std::vector<RunTrace> traces;  // aligned with config.seeds
  int diverged_count = 0;
  uint64_t config_hash = 0;
};

/// Runs every seed (worker pool bounded by PBRL_THREADS), writes per-run
/// trace files and a cross-seed summary when out_dir is set. Per-run
/// divergence is recorded, not fatal.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Trace persistence ("pbrl-trace v1": header lines, one row per iteration,
// all doubles round-trippable).
void save_trace(std::ostream& out, const RunTrace& trace);
RunTrace load_trace(std::istream& in);
void save_trace_file(const std::string& path, const RunTrace& trace);
RunTrace load_trace_file(const std::string& path);

/// Columnar plot file: env_steps (cross-seed mean), metric mean, metric std,
/// then one column per seed. Unknown metric names raise ValidationError
/// listing the available metrics.
void emit_plot_data(const std::vector<RunTrace>& traces, const std::string& metric,
                    std::ostream& out);
void emit_plot_data_file(const std::vector<RunTrace>& traces, const std::string& metric,
                         const std::string& path);

/// Per-row metric accessor shared by emit_plot_data and the summary writer.
double trace_metric(const RunTrace& trace, const TraceRow& row, const std::string& metric);
std::vector<std::string> trace_metric_names(const RunTrace& trace);

/// Cross-seed per-iteration mean and std of every metric.
void write_summary(const ExperimentResult& result, std::ostream& out);

}  // namespace pbrl
