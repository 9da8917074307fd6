#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bps/agents.hpp"
#include "bps/ldf.hpp"
#include "bps/macro_series.hpp"
#include "bps/smc.hpp"
#include "bps/synthesis.hpp"

namespace bps::cli {

/// Data source: either one combined quarterly CSV, or a quarterly target
/// plus monthly covariate files collapsed on ingestion.
struct DataConfig {
  std::string quarterly;
  std::string y_quarterly, u_monthly, r_monthly;

  [[nodiscard]] bool combined() const { return !quarterly.empty(); }
};

struct PeriodConfig {
  int learn1_end = 65;   ///< 1-based inclusive end of the agent-only period
  int learn2_end = 116;  ///< end of the synthesis learning period
  int eval_end = 248;    ///< end of the evaluation period
};

struct SmcSection {
  int particles = 10000;
  double ess_threshold = 500.0;
  int chain = 10000;
  int chain_burn = -1;
  std::string resampling = "multinomial";
  bool adaptive = false;
};

struct GibbsSection {
  int chain = 10000;
  int burn_in = -1;
  int stride = 1;  ///< evaluate the repeated-sampler baseline every stride-th step
};

struct LdfSection {
  std::string grid = "s35";       ///< preset name or "singleton"
  double singleton_beta = 0.99;
  double singleton_delta = 0.95;
  double gamma = 0.98;
  std::string weight = "argmax";  ///< first layer for the grid variant
  double gamma2 = 0.98;
  std::string first_weight = "softmax";
  std::string second_weight = "argmax";
  std::string variant = "grid";   ///< "grid" (DBPS first layer) or "two-layer"
};

struct SynthesisSection {
  double n0 = 10.0;
  double s0 = 0.002;
  double beta = 0.99;
  double delta = 0.95;
  double m0_intercept = 0.0;
  std::optional<double> m0_coef;  ///< default 1/K
  double c0_scale = 1.0;
};

/// Full run configuration; file values can be overridden by CLI flags.
struct RunConfig {
  DataConfig data;
  PeriodConfig periods;
  std::vector<agents::AgentSpec> agent_specs = agents::default_macro_agents();
  SynthesisSection synthesis;
  SmcSection smc;
  GibbsSection gibbs;
  LdfSection ldf;
  std::uint64_t seed = 20230901;
  int threads = 0;  ///< 0: hardware concurrency
  std::string out = "out";
  bool quantiles = true;

  void validate(Eigen::Index series_length) const;

  [[nodiscard]] synthesis::Config make_synthesis() const;
  [[nodiscard]] smc::Config make_smc() const;
  [[nodiscard]] ldf::DiscountGrid make_grid() const;
  [[nodiscard]] int effective_threads() const;
};

RunConfig load_config(const std::string& path);

/// Optional flag overrides, applied after the file is read.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> particles;
  std::optional<int> chain;
  std::optional<double> ess_threshold;
  std::optional<std::string> grid;
  std::optional<double> gamma;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void apply_overrides(RunConfig& config, const FlagOverrides& flags);

/// Load the configured dataset.
agents::MacroSeries load_data(const RunConfig& config);

}  // namespace bps::cli
