#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include "bps/driver.hpp"
#include "bps/eval.hpp"

namespace {

struct CommonFlags {
  std::string config_path = "configs/default.json";
  bps::cli::FlagOverrides overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration file (JSON)");
  auto opt = [&](const char* name, auto& slot, const char* help) {
    cmd->add_option_function<std::remove_reference_t<decltype(*slot)>>(
        name, [&slot](const auto& v) { slot = v; }, help);
  };
  opt("--seed", flags.overrides.seed, "root RNG seed");
  opt("--particles", flags.overrides.particles, "SMC particle count M");
  opt("--chain", flags.overrides.chain, "chain size N (interventions and baseline)");
  opt("--ess-threshold", flags.overrides.ess_threshold, "intervention threshold C");
  opt("--grid", flags.overrides.grid, "discount grid preset (s35 or singleton)");
  opt("--gamma", flags.overrides.gamma, "loss-discounting factor");
  opt("--out", flags.overrides.out, "output directory");
  opt("--threads", flags.overrides.threads, "worker threads (0: all cores)");
}

bps::cli::RunConfig resolve(const CommonFlags& flags) {
  auto config = bps::cli::load_config(flags.config_path);
  bps::cli::apply_overrides(config, flags.overrides);
  return config;
}

std::string out_path(const bps::cli::RunConfig& config, const std::string& name) {
  std::filesystem::create_directories(config.out);
  return (std::filesystem::path(config.out) / name).string();
}

std::vector<int> record_ts(const std::vector<bps::eval::ForecastRecord>& records) {
  std::vector<int> ts;
  ts.reserve(records.size());
  for (const auto& rec : records) ts.push_back(rec.t);
  return ts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential predictive synthesis of DLM agent forecasts"};
  app.require_subcommand(1);

  CommonFlags filter_flags, gibbs_flags, ldf_flags, bench_flags;
  auto* filter_cmd =
      app.add_subcommand("filter", "particle filter with sampler interventions");
  add_common(filter_cmd, filter_flags);
  auto* gibbs_cmd =
      app.add_subcommand("gibbs", "repeated-sampler baseline at every evaluated step");
  add_common(gibbs_cmd, gibbs_flags);
  auto* ldf_cmd = app.add_subcommand("ldf", "discounted-score combination runs");
  add_common(ldf_cmd, ldf_flags);
  auto* bench_cmd = app.add_subcommand("bench", "time filter steps, project baseline cost");
  add_common(bench_cmd, bench_flags);
  int bench_steps = 20;
  bench_cmd->add_option("--steps", bench_steps, "filter steps to time");

  CLI11_PARSE(app, argc, argv);

  try {
    if (filter_cmd->parsed()) {
      const auto config = resolve(filter_flags);
      const auto data = bps::cli::load_data(config);
      const auto run = bps::driver::run_filter(config, data);
      bps::eval::emit_traces(run.records, out_path(config, "filter_trace.csv"));
      bps::driver::write_interventions(run.interventions,
                                       out_path(config, "filter_interventions.csv"));
      bps::driver::write_step_times(record_ts(run.records), run.step_seconds,
                                    out_path(config, "filter_times.csv"));
      std::printf("filter: %zu steps, %zu interventions, total log score %.6f\n",
                  run.records.size(), run.interventions.size(), run.log_scores.sum());
    } else if (gibbs_cmd->parsed()) {
      const auto config = resolve(gibbs_flags);
      const auto data = bps::cli::load_data(config);
      const auto run = bps::driver::run_gibbs_baseline(config, data);
      bps::eval::emit_traces(run.records, out_path(config, "gibbs_trace.csv"));
      bps::driver::write_step_times(run.eval_ts, run.step_seconds,
                                    out_path(config, "gibbs_times.csv"));
      std::printf("gibbs baseline: %zu evaluated steps, total log score %.6f\n",
                  run.records.size(), run.log_scores.sum());
    } else if (ldf_cmd->parsed()) {
      const auto config = resolve(ldf_flags);
      const auto data = bps::cli::load_data(config);
      if (config.ldf.variant == "two-layer") {
        const auto run = bps::driver::run_ldf_two_layer(config, data);
        bps::eval::emit_traces(run.records, out_path(config, "ldf2_trace.csv"));
        std::ofstream sel(out_path(config, "ldf2_selected.csv"), std::ios::binary);
        sel << "t,date,gamma1\n";
        for (std::size_t i = 0; i < run.records.size(); ++i)
          sel << run.records[i].t << ',' << run.records[i].date.str() << ','
              << bps::eval::detail::format_value(run.selected_gamma1[i]) << '\n';
        std::printf("two-layer ldf: %zu steps, total log score %.6f\n", run.records.size(),
                    run.log_scores.sum());
      } else {
        const auto run = bps::driver::run_ldf_grid(config, data);
        bps::eval::emit_traces(run.records, out_path(config, "ldf_trace.csv"));
        bps::driver::write_selected_factors(run.records, run.selected,
                                            out_path(config, "ldf_selected.csv"));
        std::printf("grid ldf: %zu steps, %d interventions, total log score %.6f\n",
                    run.records.size(), run.total_interventions, run.log_scores.sum());
      }
    } else if (bench_cmd->parsed()) {
      auto config = resolve(bench_flags);
      config.quantiles = false;
      const auto data = bps::cli::load_data(config);
      auto trimmed = config;
      trimmed.periods.eval_end =
          std::min(config.periods.eval_end, config.periods.learn2_end + bench_steps);
      const auto run = bps::driver::run_filter(trimmed, data);
      const double mean_step =
          std::accumulate(run.step_seconds.begin(), run.step_seconds.end(), 0.0) /
          static_cast<double>(run.step_seconds.size());
      const double projected = bps::driver::estimate_mcmc_time(
          config.periods.eval_end, config.periods.learn1_end + 1, config.gibbs.chain,
          config.smc.particles, mean_step);
      std::printf("mean filter step: %.4f s over %zu steps\n", mean_step,
                  run.step_seconds.size());
      std::printf("projected repeated-sampler total (N=%d, M=%d, %d steps): %.1f s\n",
                  config.gibbs.chain, config.smc.particles,
                  config.periods.eval_end - config.periods.learn1_end, projected);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
