#include "bps/driver.hpp"

#include <ctime>
#include <chrono>
#include <fstream>
#include <stdexcept>

#include "bps/eval.hpp"
#include "bps/gibbs.hpp"

namespace bps::driver {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

eval::ForecastRecord base_record(const agents::MacroSeries& data, int t, const std::string& method,
                                 double score) {
  eval::ForecastRecord rec;
  rec.t = t + 1;  // 1-based in traces
  rec.date = data.dates[static_cast<std::size_t>(t)];
  rec.y = data.y[t];
  rec.log_scores = {{method, score}};
  return rec;
}

void fill_quantiles(eval::ForecastRecord& rec, const mix::StudentTMixture& mixture, int threads) {
  const auto q = eval::predictive_quantiles(mixture, {0.05, 0.5, 0.95}, 1e-6, threads);
  rec.q05 = q[0];
  rec.q50 = q[1];
  rec.q95 = q[2];
}

}  // namespace

agents::AgentBank warmed_bank(const cli::RunConfig& config, const agents::MacroSeries& data) {
  agents::AgentBank bank(config.agent_specs);
  const int t0 = config.periods.learn1_end;  // 0-based index of the first synthesis step
  for (int t = bank.first_time(); t < t0; ++t) bank.step(data, t);
  return bank;
}

FilterRun run_filter(const cli::RunConfig& config, const agents::MacroSeries& data) {
  config.validate(data.size());
  const int t0 = config.periods.learn1_end;
  const int t_end = config.periods.eval_end - 1;

  auto bank = warmed_bank(config, data);
  auto smc_cfg = config.make_smc();
  // histories are kept when interventions can fire; they feed diagnostics only
  smc_cfg.retain_history = smc_cfg.ess_threshold > 1.0;
  smc::Pipeline pipeline(smc_cfg, config.make_synthesis(),
                         rng::Key{config.seed}.child(rng::kPipeline, 0));

  FilterRun run;
  run.log_scores.resize(t_end - t0 + 1);
  for (int t = t0; t <= t_end; ++t) {
    const auto h = bank.forecast(data, t);
    const auto start = Clock::now();
    const double cpu_start = cpu_seconds();
    const auto res = pipeline.step(h, data.y[t]);
    run.step_cpu_seconds.push_back(cpu_seconds() - cpu_start);
    run.step_seconds.push_back(seconds_since(start));

    auto rec = base_record(data, t, "smc", res.log_score);
    rec.ess = res.ess;
    rec.intervened = res.intervened;
    if (config.quantiles) fill_quantiles(rec, res.predictive, smc_cfg.threads);
    run.records.push_back(std::move(rec));
    run.log_scores[t - t0] = res.log_score;
    bank.assimilate(data, t);
  }
  for (const auto& ev : pipeline.interventions())
    run.interventions.push_back(InterventionRecord{t0 + ev.step + 1, ev.ess, ev.chain_size,
                                                   ev.seconds});
  return run;
}

BaselineRun run_gibbs_baseline(const cli::RunConfig& config, const agents::MacroSeries& data) {
  config.validate(data.size());
  const int t0 = config.periods.learn1_end;
  const int eval_start = config.periods.learn2_end;
  const int t_end = config.periods.eval_end - 1;
  const auto synth = config.make_synthesis();
  const int threads = config.effective_threads();
  const rng::Key root = rng::Key{config.seed}.child(rng::kBaseline);

  auto bank = warmed_bank(config, data);
  BaselineRun run;
  std::vector<agents::AgentForecast> h_hist;
  std::vector<double> scores;

  for (int t = t0; t <= t_end; ++t) {
    const auto h = bank.forecast(data, t);
    const bool evaluate = t >= eval_start && (t - eval_start) % config.gibbs.stride == 0;
    if (evaluate) {
      const auto start = Clock::now();
      const double cpu_start = cpu_seconds();
      const Eigen::VectorXd y_hist =
          data.y.segment(t0, t - t0);  // observations assimilated so far
      const auto chain_key = root.child(static_cast<std::uint64_t>(t));
      const auto paths = gibbs::run_chain(y_hist, h_hist, synth,
                                          gibbs::Config{config.gibbs.chain, config.gibbs.burn_in},
                                          chain_key, threads);
      // refit each retained path into an equal-weight cloud and read the
      // synthesized predictive off it
      smc::Cloud cloud;
      cloud.moments.assign(paths.size(), synth.init);
      parallel_for(paths.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          dlm::Momentsd moments = synth.init;
          for (Eigen::Index s = 0; s < paths[i].cols(); ++s)
            moments = synthesis::scored_update(moments, synth.discounts, paths[i].col(s),
                                               y_hist[s]).posterior;
          cloud.moments[i] = std::move(moments);
        }
      });
      cloud.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(paths.size()),
                                                1.0 / static_cast<double>(paths.size()));
      cloud.steps = t - t0;
      const auto mixture =
          smc::synthesized_predictive(cloud, synth, h, chain_key.child(rng::kPredictive), threads);
      const double score = mixture.log_pdf(data.y[t]);
      run.step_cpu_seconds.push_back(cpu_seconds() - cpu_start);
      run.step_seconds.push_back(seconds_since(start));

      auto rec = base_record(data, t, "gibbs", score);
      if (config.quantiles) fill_quantiles(rec, mixture, threads);
      run.records.push_back(std::move(rec));
      run.eval_ts.push_back(t + 1);
      scores.push_back(score);
    }
    h_hist.push_back(h);
    bank.assimilate(data, t);
  }
  run.log_scores = Eigen::Map<Eigen::VectorXd>(scores.data(),
                                               static_cast<Eigen::Index>(scores.size()));
  return run;
}

LdfGridRun run_ldf_grid(const cli::RunConfig& config, const agents::MacroSeries& data) {
  config.validate(data.size());
  const int t0 = config.periods.learn1_end;
  const int t_end = config.periods.eval_end - 1;

  auto bank = warmed_bank(config, data);
  ldf::LdfBpsOptions opt(config.make_grid(), config.make_synthesis().init);
  opt.gamma = config.ldf.gamma;
  opt.weight_fn = config.ldf.weight == "softmax" ? ldf::WeightFn::kSoftmax : ldf::WeightFn::kArgmax;
  opt.smc = config.make_smc();
  if (config.quantiles) opt.quantile_probs = {0.05, 0.5, 0.95};
  const auto result =
      ldf::run_ldf_bps(data, bank, t0, t_end, opt, rng::Key{config.seed});

  LdfGridRun run;
  run.log_scores.resize(t_end - t0 + 1);
  for (int t = t0; t <= t_end; ++t) {
    const int s = t - t0;
    auto rec = base_record(data, t, "ldf", result.combined_log_score[static_cast<std::size_t>(s)]);
    if (!result.quantiles.empty()) {
      rec.q05 = result.quantiles[static_cast<std::size_t>(s)][0];
      rec.q50 = result.quantiles[static_cast<std::size_t>(s)][1];
      rec.q95 = result.quantiles[static_cast<std::size_t>(s)][2];
    }
    for (const auto& events : result.events)
      for (const auto& ev : events)
        if (ev.step == s) rec.intervened = true;
    run.records.push_back(std::move(rec));
    run.log_scores[s] = result.combined_log_score[static_cast<std::size_t>(s)];
    run.selected.push_back(opt.grid.pairs[static_cast<std::size_t>(
        result.selected[static_cast<std::size_t>(s)])]);
  }
  for (const auto& events : result.events)
    run.total_interventions += static_cast<int>(events.size());
  return run;
}

TwoLayerRun run_ldf_two_layer(const cli::RunConfig& config, const agents::MacroSeries& data) {
  config.validate(data.size());
  const int t0 = config.periods.learn1_end;
  const int t_end = config.periods.eval_end - 1;

  auto bank = warmed_bank(config, data);
  ldf::TwoLayerOptions opt;
  opt.gamma1_grid = ldf::gamma1_grid15();
  opt.gamma2 = config.ldf.gamma2;
  opt.first = config.ldf.first_weight == "argmax" ? ldf::WeightFn::kArgmax : ldf::WeightFn::kSoftmax;
  opt.second =
      config.ldf.second_weight == "softmax" ? ldf::WeightFn::kSoftmax : ldf::WeightFn::kArgmax;
  const auto result = ldf::run_two_layer_ldf(data, bank, t0, t_end, opt);

  TwoLayerRun run;
  run.log_scores.resize(t_end - t0 + 1);
  const int threads = config.effective_threads();
  for (int t = t0; t <= t_end; ++t) {
    const int s = t - t0;
    auto rec =
        base_record(data, t, "ldf2", result.combined_log_score[static_cast<std::size_t>(s)]);
    if (config.quantiles)
      fill_quantiles(rec, result.combined[static_cast<std::size_t>(s)], threads);
    run.records.push_back(std::move(rec));
    run.log_scores[s] = result.combined_log_score[static_cast<std::size_t>(s)];
    run.selected_gamma1.push_back(
        opt.gamma1_grid[result.selected_gamma1[static_cast<std::size_t>(s)]]);
  }
  return run;
}

double estimate_mcmc_time(int t_end, int t_begin, int chain, int particles, double step_seconds) {
  if (t_end < t_begin || chain < 0 || particles <= 0 || step_seconds < 0.0)
    throw std::invalid_argument("estimate_mcmc_time: invalid arguments");
  return 3.0 * static_cast<double>(t_end - t_begin + 1) *
         (static_cast<double>(chain) / static_cast<double>(particles)) * step_seconds;
}

void write_interventions(const std::vector<InterventionRecord>& events, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,ess,chain,seconds\n";
  for (const auto& ev : events)
    out << ev.t << ',' << eval::detail::format_value(ev.ess) << ',' << ev.chain_size << ','
        << eval::detail::format_value(ev.seconds) << '\n';
}

void write_step_times(const std::vector<int>& ts, const std::vector<double>& seconds,
                      const std::string& path) {
  if (ts.size() != seconds.size()) throw std::invalid_argument("write_step_times: length mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,seconds\n";
  for (std::size_t i = 0; i < ts.size(); ++i)
    out << ts[i] << ',' << eval::detail::format_value(seconds[i]) << '\n';
}

void write_selected_factors(const std::vector<eval::ForecastRecord>& records,
                            const std::vector<std::pair<double, double>>& selected,
                            const std::string& path) {
  if (records.size() != selected.size())
    throw std::invalid_argument("write_selected_factors: length mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,date,beta,delta\n";
  for (std::size_t i = 0; i < records.size(); ++i)
    out << records[i].t << ',' << records[i].date.str() << ','
        << eval::detail::format_value(selected[i].first) << ','
        << eval::detail::format_value(selected[i].second) << '\n';
}

}  // namespace bps::driver
