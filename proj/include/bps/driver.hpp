#pragma once

#include <string>
#include <vector>

#include "bps/config.hpp"
#include "bps/eval.hpp"
#include "bps/ldf.hpp"
#include "bps/macro_series.hpp"
#include "bps/smc.hpp"

namespace bps::driver {

struct InterventionRecord {
  int t = 0;  ///< 1-based time index
  double ess = 0.0;
  int chain_size = 0;
  double seconds = 0.0;
};

struct FilterRun {
  std::vector<eval::ForecastRecord> records;  ///< one per synthesis step
  std::vector<InterventionRecord> interventions;
  Eigen::VectorXd log_scores;                 ///< aligned with records
  std::vector<double> step_seconds;           ///< wall time
  std::vector<double> step_cpu_seconds;       ///< process CPU time (load-independent)
};

struct BaselineRun {
  std::vector<eval::ForecastRecord> records;  ///< evaluated steps only (stride)
  Eigen::VectorXd log_scores;
  std::vector<int> eval_ts;                   ///< 1-based time of each record
  std::vector<double> step_seconds;           ///< wall time
  std::vector<double> step_cpu_seconds;
};

struct LdfGridRun {
  std::vector<eval::ForecastRecord> records;
  Eigen::VectorXd log_scores;
  std::vector<std::pair<double, double>> selected;  ///< (beta, delta) per step
  int total_interventions = 0;
};

struct TwoLayerRun {
  std::vector<eval::ForecastRecord> records;
  Eigen::VectorXd log_scores;
  std::vector<double> selected_gamma1;
};

/// Rao-Blackwellized bootstrap filter with interventions over the synthesis
/// and evaluation periods.
FilterRun run_filter(const cli::RunConfig& config, const agents::MacroSeries& data);

/// Repeated-sampler baseline: a fresh chain at every evaluated step.
BaselineRun run_gibbs_baseline(const cli::RunConfig& config, const agents::MacroSeries& data);

/// Grid-of-discounts combination (first layer = DBPS pipelines).
LdfGridRun run_ldf_grid(const cli::RunConfig& config, const agents::MacroSeries& data);

/// Two-layer combination over the agent densities.
TwoLayerRun run_ldf_two_layer(const cli::RunConfig& config, const agents::MacroSeries& data);

/// Projected wall time of the repeated-sampler baseline from the per-step
/// cost of the filter: 3 (T - t0 + 1) (N/M) step_seconds.
double estimate_mcmc_time(int t_end, int t_begin, int chain, int particles, double step_seconds);

/// Warm an agent bank through the pre-synthesis learning period.
agents::AgentBank warmed_bank(const cli::RunConfig& config, const agents::MacroSeries& data);

void write_interventions(const std::vector<InterventionRecord>& events, const std::string& path);
void write_step_times(const std::vector<int>& ts, const std::vector<double>& seconds,
                      const std::string& path);
void write_selected_factors(const std::vector<eval::ForecastRecord>& records,
                            const std::vector<std::pair<double, double>>& selected,
                            const std::string& path);

}  // namespace bps::driver
