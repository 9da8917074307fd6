// Acceptance suite: end-to-end checks of the filter, the sampler, the
// discounted combinations and the evaluation tooling, one printed line per
// criterion. The repeated-sampler baseline in criterion 3 runs in a reduced
// configuration (N=1000, every 4th step, tolerance 3) unless BPS_ACCEPT_FULL
// is set, which switches to N=10000 at every step with tolerance 2.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bps/config.hpp"
#include "bps/driver.hpp"
#include "bps/gibbs.hpp"
#include "bps/ldf.hpp"
#include "bps/smc.hpp"
#include "support/batch_nig.hpp"
#include "support/non_rb_filter.hpp"

using namespace bps;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %2d %-34s %s  (%s)\n", criterion, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct SlopeFit {
  double slope = 0.0;
  double t_stat = 0.0;
};

/// Linear-fit slope with a Newey-West (HAC) standard error; wall-clock noise
/// is autocorrelated, so plain OLS errors would overstate significance.
SlopeFit ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double mx = sx / n, my = sy / n;
  const double sxx_c = sxx - n * mx * mx;
  const double slope = (sxy - n * mx * my) / sxx_c;
  const double intercept = my - slope * mx;

  std::vector<double> score(x.size());  // (x - mx) * resid
  for (std::size_t i = 0; i < x.size(); ++i)
    score[i] = (x[i] - mx) * (y[i] - intercept - slope * x[i]);
  const int lags = static_cast<int>(std::floor(0.75 * std::cbrt(n)));
  double lrv = 0.0;
  for (double s : score) lrv += s * s;
  for (int lag = 1; lag <= lags; ++lag) {
    double acc = 0.0;
    for (std::size_t i = static_cast<std::size_t>(lag); i < score.size(); ++i)
      acc += score[i] * score[i - static_cast<std::size_t>(lag)];
    lrv += 2.0 * (1.0 - static_cast<double>(lag) / (lags + 1.0)) * acc;
  }
  const double se = std::sqrt(lrv) / sxx_c;
  return SlopeFit{slope, slope / se};
}

cli::RunConfig paper_config() {
  cli::RunConfig config;
  config.data.quarterly = std::string(BPS_DATA_DIR) + "/macro_quarterly.csv";
  config.periods = {65, 116, 248};
  config.smc.particles = 10000;
  config.smc.ess_threshold = 500.0;
  config.smc.chain = 10000;
  config.gibbs.chain = 10000;
  config.seed = 20230901;
  config.threads = 0;
  config.quantiles = false;
  return config;
}

struct Synthetic {
  std::vector<agents::AgentForecast> forecasts;
  VectorXd y;
};

Synthetic easy_dataset(int T, int K, double scale2, unsigned seed) {
  Synthetic data;
  auto eng = rng::Key{seed}.engine();
  data.y.resize(T);
  for (int t = 0; t < T; ++t) {
    agents::AgentForecast h;
    h.dof = VectorXd::Constant(K, 8.0);
    h.loc.resize(K);
    for (int k = 0; k < K; ++k) h.loc[k] = std::sin(0.23 * t + k);
    h.scale2 = VectorXd::Constant(K, scale2);
    data.forecasts.push_back(h);
    data.y[t] = 0.1 + 0.8 * h.loc.mean() + rng::draw_normal(eng, 0.0, 0.15);
  }
  return data;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  auto eng = rng::Key{1}.engine();
  const int T = 100;
  MatrixXd F(3, T);
  VectorXd y(T);
  for (int t = 0; t < T; ++t) {
    F(0, t) = 1.0;
    F(1, t) = rng::draw_normal(eng);
    F(2, t) = rng::draw_normal(eng);
    y[t] = 0.4 + 1.1 * F(1, t) - 0.7 * F(2, t) + rng::draw_normal(eng, 0.0, 0.5);
  }
  const VectorXd m0 = VectorXd::Zero(3);
  const MatrixXd C0 = MatrixXd::Identity(3, 3);
  const double start = now_seconds();
  const auto steps =
      dlm::forward_filter(F, y, dlm::Momentsd(m0, C0, 2.0, 0.01), dlm::DiscountConfigd(1.0, 1.0));
  const double elapsed = now_seconds() - start;
  const auto batch = oracle::batch_nig_posterior(m0, C0, 2.0, 0.01, F, y);
  const auto& post = steps.back().posterior;
  const double err = std::max({(post.m - batch.m).cwiseAbs().maxCoeff(),
                               (post.C - batch.C).cwiseAbs().maxCoeff(),
                               std::fabs(post.n - batch.n), std::fabs(post.s - batch.s)});
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max err %.2e, %.3f s", err, elapsed);
  report(1, "conjugate-oracle exactness", err < 1e-8 && elapsed < 1.0, detail);
}

void criterion_2() {
  const int T = 40, K = 2;
  auto eng = rng::Key{2}.engine();
  std::vector<agents::AgentForecast> forecasts;
  VectorXd y(T);
  for (int t = 0; t < T; ++t) {
    agents::AgentForecast h;
    h.dof = VectorXd::Constant(K, 6.0);
    h.loc = (VectorXd(K) << std::sin(0.3 * t), std::cos(0.2 * t)).finished();
    h.scale2 = VectorXd::Zero(K);
    forecasts.push_back(h);
    y[t] = 0.4 + 0.8 * h.loc[0] - 0.3 * h.loc[1] + rng::draw_normal(eng, 0.0, 0.25);
  }
  const auto synth = synthesis::default_config(K);
  MatrixXd F(K + 1, T);
  for (int t = 0; t < T; ++t) F.col(t) = synthesis::regressor(forecasts[t].loc);
  const auto analytic = dlm::forward_filter(F, y, synth.init, synth.discounts);

  double worst_score = 0.0, worst_ess = 0.0, worst_moment = 0.0;
  for (const int m : {2, 7, 64}) {
    smc::Config cfg;
    cfg.particles = m;
    cfg.ess_threshold = 1.0;
    smc::Pipeline pipeline(cfg, synth, rng::Key{20});
    for (int t = 0; t < T; ++t) {
      const auto res = pipeline.step(forecasts[t], y[t]);
      worst_score = std::max(worst_score, std::fabs(res.log_score - analytic[t].log_score));
      worst_ess = std::max(worst_ess, std::fabs(res.ess - m) / m);
    }
    const auto& post = pipeline.cloud().moments.front();
    const auto& expect = analytic.back().posterior;
    worst_moment = std::max({worst_moment, (post.m - expect.m).cwiseAbs().maxCoeff(),
                             (post.C - expect.C).cwiseAbs().maxCoeff(),
                             std::fabs(post.s - expect.s)});
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail), "score err %.1e, moment err %.1e, rel ess err %.1e",
                worst_score, worst_moment, worst_ess);
  report(2, "degenerate-agent exactness", worst_score < 1e-10 && worst_moment < 1e-10 &&
                                              worst_ess < 1e-9, detail);
}

struct PipelineLegs {
  driver::FilterRun with_interventions;
  driver::FilterRun without_interventions;
  driver::BaselineRun baseline;
  bool full = false;
};

PipelineLegs run_paper_legs() {
  PipelineLegs legs;
  legs.full = std::getenv("BPS_ACCEPT_FULL") != nullptr;
  auto config = paper_config();
  const auto data = cli::load_data(config);

  legs.with_interventions = driver::run_filter(config, data);

  auto no_int = config;
  no_int.smc.ess_threshold = 1.0;
  legs.without_interventions = driver::run_filter(no_int, data);

  auto base = config;
  if (legs.full) {
    base.gibbs.chain = 10000;
    base.gibbs.stride = 1;
  } else {
    base.gibbs.chain = 1000;
    base.gibbs.stride = 4;
  }
  legs.baseline = driver::run_gibbs_baseline(base, data);
  return legs;
}

void criterion_3(const PipelineLegs& legs) {
  std::map<int, double> smc_scores, noint_scores;
  for (const auto& rec : legs.with_interventions.records)
    smc_scores[rec.t] = rec.log_scores.front().second;
  for (const auto& rec : legs.without_interventions.records)
    noint_scores[rec.t] = rec.log_scores.front().second;

  double lpdr_int = 0.0, lpdr_noint = 0.0, worst_step = 0.0;
  int worst_t = 0;
  for (std::size_t i = 0; i < legs.baseline.eval_ts.size(); ++i) {
    const int t = legs.baseline.eval_ts[i];
    const double d = smc_scores.at(t) - legs.baseline.log_scores[static_cast<Eigen::Index>(i)];
    lpdr_int += d;
    lpdr_noint += noint_scores.at(t) - legs.baseline.log_scores[static_cast<Eigen::Index>(i)];
    if (std::fabs(d) > std::fabs(worst_step)) {
      worst_step = d;
      worst_t = t;
    }
  }
  const double tol = legs.full ? 2.0 : 3.0;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "LPDR_T %.3f (tol %.0f, %s baseline), no-int %.3f, max step |d| %.2f at t=%d",
                lpdr_int, tol, legs.full ? "full" : "reduced", lpdr_noint, worst_step, worst_t);
  report(3, "agreement with repeated sampler", std::fabs(lpdr_int) <= tol && lpdr_noint < lpdr_int,
         detail);
}

double cpu_now() {
  timespec ts{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

void criterion_4() {
  // Per-step cost is measured by replaying snapshotted steps in shuffled
  // order, on process CPU time: host load and frequency drift then land on
  // random time indices instead of masquerading as a cost trend. "Flat"
  // additionally accepts a fitted drift below 5% of the mean step cost;
  // the chain-based side must both test positive and grow by more than half.
  auto config = paper_config();
  const auto data = cli::load_data(config);
  const auto synth = config.make_synthesis();
  auto bank = driver::warmed_bank(config, data);

  smc::Config cfg;
  cfg.particles = 2000;
  cfg.ess_threshold = 1.0;
  cfg.threads = 1;

  std::vector<smc::Cloud> snapshots;
  std::vector<agents::AgentForecast> forecasts;
  smc::Pipeline pipeline(cfg, synth, rng::Key{41}.child(rng::kPipeline, 0));
  for (int t = 65; t <= 247; ++t) {
    const auto h = bank.forecast(data, t);
    snapshots.push_back(pipeline.cloud());
    forecasts.push_back(h);
    pipeline.step(h, data.y[t]);
    bank.assimilate(data, t);
  }

  const int steps = 182;  // replayable steps (the init step is excluded)
  std::vector<int> order(steps);
  for (int i = 0; i < steps; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  std::mt19937_64 shuffler(99);
  std::shuffle(order.begin(), order.end(), shuffler);
  {  // warm pass
    smc::Cloud cloud = snapshots[static_cast<std::size_t>(order[0])];
    (void)smc::step(cloud, cfg, synth, forecasts[static_cast<std::size_t>(order[0])],
                    data.y[65 + order[0]], rng::Key{41}.child(rng::kPipeline, 0));
  }
  std::vector<double> smc_x(order.size()), smc_y(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int s = order[k];
    smc::Cloud cloud = snapshots[static_cast<std::size_t>(s)];
    const double c0 = cpu_now();
    (void)smc::step(cloud, cfg, synth, forecasts[static_cast<std::size_t>(s)], data.y[65 + s],
                    rng::Key{41}.child(rng::kPipeline, 0));
    smc_x[k] = 66.0 + s;
    smc_y[k] = cpu_now() - c0;
  }
  const auto smc_fit = ols_slope(smc_x, smc_y);
  const double smc_mean = std::accumulate(smc_y.begin(), smc_y.end(), 0.0) / smc_y.size();
  const double smc_drift = std::fabs(smc_fit.slope) * 182.0;  // fitted drift across the window

  // repeated-sampler cost at strided evaluation steps, same shuffled protocol
  std::vector<int> eval_ts;
  for (int t = 116; t <= 247; t += 4) eval_ts.push_back(t);
  std::shuffle(eval_ts.begin(), eval_ts.end(), shuffler);
  std::vector<double> gx(eval_ts.size()), gy(eval_ts.size());
  for (std::size_t k = 0; k < eval_ts.size(); ++k) {
    const int t = eval_ts[k];
    const Eigen::VectorXd y_hist = data.y.segment(65, t - 65);
    std::vector<agents::AgentForecast> h_hist(forecasts.begin(),
                                              forecasts.begin() + (t - 65));
    const double c0 = cpu_now();
    (void)gibbs::run_chain(y_hist, h_hist, synth, gibbs::Config{500, 50},
                           rng::Key{42}.child(static_cast<std::uint64_t>(t)), 1);
    gx[k] = static_cast<double>(t + 1);
    gy[k] = cpu_now() - c0;
  }
  const auto gibbs_fit = ols_slope(gx, gy);
  const double gibbs_mean = std::accumulate(gy.begin(), gy.end(), 0.0) / gy.size();
  const double gibbs_growth = gibbs_fit.slope * 132.0;

  // two-sided 95% critical value, df > 30
  const bool smc_flat = std::fabs(smc_fit.t_stat) < 1.98 || smc_drift < 0.05 * smc_mean;
  const bool gibbs_rising = gibbs_fit.t_stat > 1.98 && gibbs_growth > 0.5 * gibbs_mean;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "smc t-stat %.2f drift %.1f%%, sampler t-stat %.1f growth %.0f%%",
                smc_fit.t_stat, 100.0 * smc_drift / smc_mean, gibbs_fit.t_stat,
                100.0 * gibbs_growth / gibbs_mean);
  report(4, "per-step cost profile", smc_flat && gibbs_rising, detail);
}

void criterion_5(const PipelineLegs& legs) {
  const auto& run = legs.with_interventions;
  const int count = static_cast<int>(run.interventions.size());

  bool trigger_exact = true;
  for (const auto& rec : run.records) {
    const bool should = rec.ess < 500.0;
    if (rec.intervened != should) trigger_exact = false;
  }
  const bool none_at_c1 = legs.without_interventions.interventions.empty();

  // C = M forces an intervention at every step with non-degenerate weights
  const auto small = easy_dataset(10, 1, 0.5, 21);
  smc::Config cfg;
  cfg.particles = 50;
  cfg.ess_threshold = 50.0;
  cfg.chain_size = 50;
  smc::Pipeline busy(cfg, synthesis::default_config(1), rng::Key{4});
  int fired = 0;
  for (int t = 0; t < 10; ++t) fired += busy.step(small.forecasts[t], small.y[t]).intervened;

  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d interventions at C=500, trigger %s, C=1 none %s, C=M fired %d/10", count,
                trigger_exact ? "exact" : "BROKEN", none_at_c1 ? "ok" : "BROKEN", fired);
  report(5, "intervention mechanics", count >= 2 && count <= 10 && trigger_exact && none_at_c1 &&
                                          fired == 10, detail);
}

void criterion_6() {
  // getting-it-right: joint-draw initialization, pooled marginals stable
  const int T = 10, K = 2, reps = 2500, sweeps = 4;
  std::vector<agents::AgentForecast> forecasts;
  for (int t = 0; t < T; ++t) {
    agents::AgentForecast h;
    h.dof = VectorXd::Constant(K, 8.0 + 0.1 * t);
    h.loc = (VectorXd(K) << 0.3 * t, 1.0 - 0.1 * t).finished();
    h.scale2 = (VectorXd(K) << 0.5, 0.9).finished();
    forecasts.push_back(h);
  }
  const auto synth = synthesis::default_config(K);
  const rng::Key root{606};
  MatrixXd chain_sum = MatrixXd::Zero(K, T), chain_sq = MatrixXd::Zero(K, T);
  MatrixXd direct_sum = MatrixXd::Zero(K, T), direct_sq = MatrixXd::Zero(K, T);
  for (int rep = 0; rep < reps; ++rep) {
    auto eng = root.child(rng::kSimulate, static_cast<std::uint64_t>(rep)).engine();
    gibbs::ChainState state;
    state.x.resize(K, T);
    state.sigma2.resize(K, T);
    VectorXd y(T);
    dlm::Momentsd moments = synth.init;
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        const auto& h = forecasts[t];
        state.sigma2(k, t) = rng::draw_inverse_gamma(eng, h.dof[k] / 2.0, h.dof[k] / 2.0);
        state.x(k, t) =
            rng::draw_normal(eng, h.loc[k], std::sqrt(state.sigma2(k, t) * h.scale2[k]));
      }
      const auto prior = dlm::prior_step(moments, synth.discounts);
      const auto f = synthesis::regressor(state.x.col(t));
      const auto pred = dlm::predictive(prior, f);
      y[t] = dlm::draw(pred, eng);
      moments = dlm::posterior_update(prior, f, y[t]);
    }
    for (int n = 0; n < sweeps; ++n)
      gibbs::sweep(state, y, forecasts, synth,
                   root.child(rng::kXSweep, static_cast<std::uint64_t>(rep),
                              static_cast<std::uint64_t>(n)));
    chain_sum += state.x;
    chain_sq += state.x.cwiseProduct(state.x);
    auto deng = root.child(rng::kPredictive, static_cast<std::uint64_t>(rep)).engine();
    for (int t = 0; t < T; ++t) {
      const auto draw = agents::sample_agent_draw(forecasts[t], deng);
      direct_sum.col(t) += draw;
      direct_sq.col(t) += draw.cwiseProduct(draw);
    }
  }
  double worst_z = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) {
      const double ma = chain_sum(k, t) / reps, va = chain_sq(k, t) / reps - ma * ma;
      const double mb = direct_sum(k, t) / reps, vb = direct_sq(k, t) / reps - mb * mb;
      worst_z = std::max(worst_z, std::fabs((ma - mb) / std::sqrt(va / reps + vb / reps)));
    }
  }

  // point-mass agents: paths pinned, FFBS posterior matches the analytic one
  const int T2 = 20;
  std::vector<agents::AgentForecast> pm;
  VectorXd y2(T2);
  auto eng = rng::Key{7}.engine();
  for (int t = 0; t < T2; ++t) {
    agents::AgentForecast h;
    h.dof = VectorXd::Constant(2, 6.0);
    h.loc = (VectorXd(2) << std::sin(0.3 * t), std::cos(0.2 * t)).finished();
    h.scale2 = VectorXd::Zero(2);
    pm.push_back(h);
    y2[t] = 0.4 + 0.8 * h.loc[0] - 0.3 * h.loc[1] + rng::draw_normal(eng, 0.0, 0.2);
  }
  const auto synth2 = synthesis::default_config(2);
  bool paths_pinned = true;
  gibbs::ChainState state = gibbs::initial_state(pm);
  MatrixXd mu_path(2, T2);
  for (int t = 0; t < T2; ++t) mu_path.col(t) = pm[static_cast<std::size_t>(t)].loc;
  const auto analytic =
      dlm::forward_filter(gibbs::path_regressors(mu_path), y2, synth2.init, synth2.discounts);
  const auto& target = analytic.back().posterior;
  const int draws = 10000;
  VectorXd theta_sum = VectorXd::Zero(3);
  for (int n = 0; n < draws; ++n) {
    const auto phi = gibbs::sweep(state, y2, pm, synth2,
                                  rng::Key{808}.child(static_cast<std::uint64_t>(n)));
    if ((state.x - mu_path).cwiseAbs().maxCoeff() != 0.0) paths_pinned = false;
    theta_sum += phi.theta.col(T2 - 1);
  }
  const VectorXd theta_mean = theta_sum / draws;
  const MatrixXd post_cov = target.n / (target.n - 2.0) * target.C;
  bool mean_ok = true;
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(post_cov(i, i) / draws);
    if (std::fabs(theta_mean[i] - target.m[i]) > 3.0 * se) mean_ok = false;
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail), "worst |z| %.2f over 20 marginals, point-mass %s/%s",
                worst_z, paths_pinned ? "pinned" : "BROKEN", mean_ok ? "mean ok" : "mean off");
  report(6, "sampler correctness", worst_z < 4.0 && paths_pinned && mean_ok, detail);
}

void criterion_7() {
  const dlm::DiscountConfigd cfg(0.97, 0.92);
  auto eng = rng::Key{9}.engine();
  const int T = 10;
  MatrixXd F(2, T);
  VectorXd y(T);
  for (int t = 0; t < T; ++t) {
    F(0, t) = 1.0;
    F(1, t) = rng::draw_normal(eng);
    y[t] = 0.5 + F(1, t) + rng::draw_normal(eng, 0.0, 0.4);
  }
  const auto filter = dlm::forward_filter(
      F, y, dlm::Momentsd(VectorXd::Zero(2), MatrixXd::Identity(2, 2), 6.0, 0.1), cfg);
  const auto& post = filter.back().posterior;
  const int draws = 100000;
  VectorXd mean = VectorXd::Zero(2);
  MatrixXd sq = MatrixXd::Zero(2, 2);
  auto feng = rng::Key{33}.engine();
  for (int i = 0; i < draws; ++i) {
    const auto path = gibbs::ffbs(filter, cfg, feng);
    mean += path.theta.col(T - 1);
    sq += path.theta.col(T - 1) * path.theta.col(T - 1).transpose();
  }
  mean /= draws;
  const MatrixXd cov = sq / draws - mean * mean.transpose();
  const MatrixXd expect_cov = post.n / (post.n - 2.0) * post.C;
  bool mean_ok = true;
  for (int i = 0; i < 2; ++i) {
    const double se = std::sqrt(expect_cov(i, i) / draws);
    if (std::fabs(mean[i] - post.m[i]) > 3.0 * se) mean_ok = false;
  }
  const double cov_err = (cov - expect_cov).norm() / expect_cov.norm();
  char detail[128];
  std::snprintf(detail, sizeof(detail), "mean %s, cov rel err %.3f", mean_ok ? "ok" : "off",
                cov_err);
  report(7, "backward-sampling marginal", mean_ok && cov_err < 0.05, detail);
}

void criterion_8() {
  // discounted-ledger identity at gamma = 1
  auto eng = rng::Key{11}.engine();
  ldf::Ledger ledger(1, 1.0);
  double cumulative = 0.0;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double s = rng::draw_normal(eng, -1.0, 2.0);
    cumulative += s;
    ledger.update(VectorXd::Constant(1, s));
    worst = std::max(worst, std::fabs(ledger.scores[0] - cumulative));
  }

  // weight-function identities
  VectorXd a(3);
  a << -1.0, 0.4, 2.2;
  const auto soft = ldf::softmax_weights(a);
  const auto soft_shift = ldf::softmax_weights((a.array() + 1000.0).matrix());
  const bool softmax_ok = std::fabs(soft.sum() - 1.0) < 1e-12 &&
                          (soft - soft_shift).cwiseAbs().maxCoeff() < 1e-13 &&
                          (soft.array() > 0).all();
  const auto hard = ldf::argmax_weights(a);
  const bool argmax_ok = hard[2] == 1.0 && hard.sum() == 1.0 &&
                         ldf::argmax_weights(3.0 * a) == hard;

  // singleton grid == plain pipeline, bitwise
  auto config = paper_config();
  config.periods = {65, 116, 146};
  config.smc.particles = 200;
  config.smc.ess_threshold = 12.0;
  config.smc.chain = 200;
  const auto data = cli::load_data(config);
  auto bank = driver::warmed_bank(config, data);
  ldf::LdfBpsOptions opt(ldf::DiscountGrid::singleton(0.99, 0.95), config.make_synthesis().init);
  opt.smc = config.make_smc();
  const auto grid_run =
      ldf::run_ldf_bps(data, bank, 65, 145, opt, rng::Key{config.seed});

  auto bank2 = driver::warmed_bank(config, data);
  smc::Pipeline plain(config.make_smc(), config.make_synthesis(),
                      rng::Key{config.seed}.child(rng::kPipeline, 0));
  bool bitwise = true;
  for (int t = 65; t <= 145; ++t) {
    const auto h = bank2.forecast(data, t);
    const auto res = plain.step(h, data.y[t]);
    if (grid_run.pipeline_scores(0, t - 65) != res.log_score) bitwise = false;
    bank2.assimilate(data, t);
  }

  char detail[160];
  std::snprintf(detail, sizeof(detail), "ledger err %.1e, weights %s, singleton %s", worst,
                softmax_ok && argmax_ok ? "ok" : "BROKEN", bitwise ? "bitwise" : "DIVERGED");
  report(8, "discounted-combination identities", worst < 1e-12 && softmax_ok && argmax_ok && bitwise,
         detail);
}

struct LdfLegs {
  driver::LdfGridRun grid;
  driver::FilterRun benchmark;
  cli::RunConfig config;
};

LdfLegs run_ldf_legs() {
  LdfLegs legs;
  legs.config = paper_config();
  legs.config.smc.particles = 2500;
  legs.config.smc.ess_threshold = 175.0;  // keeps the C/M ratio of the full run
  legs.config.smc.chain = 2500;
  legs.config.ldf.grid = "s35";
  legs.config.ldf.gamma = 0.98;
  legs.config.ldf.weight = "argmax";
  const auto data = cli::load_data(legs.config);
  legs.grid = driver::run_ldf_grid(legs.config, data);
  legs.benchmark = driver::run_filter(legs.config, data);
  return legs;
}

void criterion_9(const LdfLegs& legs) {
  // LPDR of the grid combination against the fixed-(0.99, 0.95) pipeline over
  // the evaluation period; the 2020-2022 window must carry most of the gain
  const int t0 = 66, eval_start = 117, t_end = 248;  // 1-based
  double lpdr = 0.0, lpdr_through_235 = 0.0;
  for (int t = eval_start; t <= t_end; ++t) {
    const int s = t - t0;
    lpdr += legs.grid.log_scores[s] - legs.benchmark.log_scores[s];
    if (t <= 235) lpdr_through_235 = lpdr;
  }
  const double window_gain = lpdr - lpdr_through_235;
  char detail[160];
  std::snprintf(detail, sizeof(detail), "LPDR_T %.2f, 2020-2022 gain %.2f", lpdr, window_gain);
  report(9, "grid combination outperformance", lpdr > 0.0 && window_gain > 0.5 * lpdr, detail);
}

void criterion_10(const LdfLegs& legs) {
  const int t0 = 66, eval_start = 117, t_end = 248;
  double min_beta = 2.0, min_delta = 2.0, win_beta = 2.0, win_delta = 2.0;
  for (int t = eval_start; t <= t_end; ++t) {
    const auto& [b, d] = legs.grid.selected[static_cast<std::size_t>(t - t0)];
    min_beta = std::min(min_beta, b);
    min_delta = std::min(min_delta, d);
    if (t >= 237) {  // 2020Q1 onward
      win_beta = std::min(win_beta, b);
      win_delta = std::min(win_delta, d);
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail), "eval min (%.2f, %.2f), 2020-2022 min (%.2f, %.2f)",
                min_beta, min_delta, win_beta, win_delta);
  report(10, "selected-factor adaptation", win_beta == min_beta && win_delta == min_delta, detail);
}

void criterion_11() {
  const auto data = easy_dataset(60, 1, 0.0005, 47);
  const auto synth = synthesis::default_config(1);

  smc::Config cfg;
  cfg.particles = 10000;
  cfg.ess_threshold = 1.0;
  smc::Pipeline pipeline(cfg, synth, rng::Key{100});
  for (int t = 0; t < 60; ++t) pipeline.step(data.forecasts[t], data.y[t]);
  const double oracle_logz =
      oracle::importance_sampling_log_evidence(200000, synth, data.forecasts, data.y, rng::Key{9});
  const double gap = std::fabs(pipeline.cloud().log_evidence - oracle_logz);

  const int runs = 50, m = 1024;
  std::vector<double> rb, plain;
  for (int r = 0; r < runs; ++r) {
    smc::Config small;
    small.particles = m;
    small.ess_threshold = 1.0;
    smc::Pipeline p(small, synth, rng::Key{300}.child(static_cast<std::uint64_t>(r)));
    for (int t = 0; t < 60; ++t) p.step(data.forecasts[t], data.y[t]);
    rb.push_back(p.cloud().log_evidence);
    plain.push_back(oracle::non_rb_log_evidence(m, synth, data.forecasts, data.y,
                                                rng::Key{400}.child(static_cast<std::uint64_t>(r))));
  }
  auto variance = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size() - 1);
  };
  const double var_rb = variance(rb), var_plain = variance(plain);
  char detail[160];
  std::snprintf(detail, sizeof(detail), "|gap| %.4f (tol 0.05), var RB %.2e vs sampled %.2e", gap,
                var_rb, var_plain);
  report(11, "evidence estimator", gap <= 0.05 && var_rb <= var_plain, detail);
}

}  // namespace

int main() {
  const double start = now_seconds();
  criterion_1();
  criterion_2();
  const auto legs = run_paper_legs();
  criterion_3(legs);
  criterion_4();
  criterion_5(legs);
  criterion_6();
  criterion_7();
  criterion_8();
  const auto ldf_legs = run_ldf_legs();
  criterion_9(ldf_legs);
  criterion_10(ldf_legs);
  criterion_11();
  std::printf("acceptance: %s (%d failed) in %.1f s\n", g_failures == 0 ? "PASS" : "FAIL",
              g_failures, now_seconds() - start);
  return g_failures == 0 ? 0 : 1;
}
