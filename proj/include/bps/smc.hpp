#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bps/agents.hpp"
#include "bps/gibbs.hpp"
#include "bps/mixture.hpp"
#include "bps/parallel.hpp"
#include "bps/rng.hpp"
#include "bps/synthesis.hpp"

namespace bps::smc {

enum class Resampling { kMultinomial, kSystematic };

struct Config {
  int particles = 1000;         ///< M
  double ess_threshold = 1.0;   ///< C in [1, M]; C = 1 disables interventions
  int chain_size = -1;          ///< N for interventions; -1 means current cloud size
  int chain_burn = -1;          ///< -1 means N/10
  Resampling resampling = Resampling::kMultinomial;
  bool adaptive_resampling = false;  ///< resample only when ESS < M/2 (off: every step)
  bool retain_history = false;       ///< per-particle draw histories (diagnostics)
  int threads = 1;

  void validate() const {
    if (particles < 2) throw std::invalid_argument("smc: particle count must be >= 2");
    if (!(ess_threshold >= 1.0 && ess_threshold <= static_cast<double>(particles)))
      throw std::invalid_argument("smc: ess threshold must lie in [1, M]");
  }
};

/// Weighted particle approximation of the synthesis posterior. Each particle
/// carries the conjugate moments of the synthesis DLM conditional on its own
/// agent-draw history; the calibration parameters are never sampled.
struct Cloud {
  std::vector<dlm::Momentsd> moments;
  Eigen::VectorXd weights;                         ///< normalized
  std::vector<std::vector<double>> histories;      ///< flat K-per-step draws, optional
  int steps = 0;                                   ///< observations assimilated
  double log_evidence = 0.0;

  [[nodiscard]] Eigen::Index size() const { return weights.size(); }

  void validate() const {
    if (size() < 2) throw std::invalid_argument("Cloud: fewer than two particles");
    if (static_cast<Eigen::Index>(moments.size()) != size())
      throw std::invalid_argument("Cloud: weight/moment count mismatch");
    if ((weights.array() < 0.0).any()) throw std::invalid_argument("Cloud: negative weight");
    if (std::fabs(weights.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("Cloud: weights must sum to one");
  }
};

struct InterventionEvent {
  int step = 0;           ///< pipeline step index (0-based) at which the cloud was rebuilt
  double ess = 0.0;       ///< ESS that triggered the rebuild
  int chain_size = 0;
  double seconds = 0.0;
};

struct StepResult {
  double log_score = 0.0;  ///< log of the synthesized predictive at the realized y
  double ess = 0.0;        ///< ESS of the updated weights
  bool intervened = false;
  mix::StudentTMixture predictive;  ///< the mixture the score was read from
};

inline double ess(const Eigen::VectorXd& weights) { return 1.0 / weights.squaredNorm(); }
inline double ess(const Cloud& cloud) { return ess(cloud.weights); }

/// Normalize log weights; returns the normalized vector and log(sum exp).
/// Scalar std::exp keeps exact -inf -> 0 semantics.
inline std::pair<Eigen::VectorXd, double> normalized_from_log(const Eigen::VectorXd& lw) {
  const double m = lw.maxCoeff();
  if (!std::isfinite(m))
    throw std::runtime_error("smc: all particle weights vanished (model-data mismatch)");
  Eigen::VectorXd w(lw.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < lw.size(); ++i) {
    w[i] = std::exp(lw[i] - m);
    total += w[i];
  }
  w /= total;
  return {std::move(w), m + std::log(total)};
}

/// Ancestor indices drawn from the weighted empirical distribution.
inline std::vector<Eigen::Index> resample_indices(const Eigen::VectorXd& weights,
                                                  Eigen::Index count, Resampling scheme,
                                                  rng::Engine& eng) {
  const auto n = weights.size();
  Eigen::VectorXd cum(n);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += weights[i];
    cum[i] = acc;
  }
  cum[n - 1] = 1.0;
  std::vector<Eigen::Index> out(static_cast<std::size_t>(count));
  auto locate = [&](double u) {
    return static_cast<Eigen::Index>(
        std::lower_bound(cum.data(), cum.data() + n, u) - cum.data());
  };
  if (scheme == Resampling::kMultinomial) {
    for (auto& idx : out) idx = locate(rng::draw_uniform(eng));
  } else {
    const double m = static_cast<double>(count);
    const double u0 = rng::draw_uniform(eng) / m;
    for (Eigen::Index j = 0; j < count; ++j)
      out[static_cast<std::size_t>(j)] = locate(u0 + static_cast<double>(j) / m);
  }
  return out;
}

namespace detail {

struct Staged {
  std::vector<dlm::Momentsd> moments;
  Eigen::VectorXd log_weight;
  mix::StudentTMixture predictive;
  std::vector<std::vector<double>> histories;
};

/// Propagate and weight all particles: draw x ~ h, evaluate the closed-form
/// conditional t predictive at y, update the per-particle moments.
inline Staged propagate(const Cloud& cloud, const std::vector<Eigen::Index>* ancestors,
                        const Config& cfg, const synthesis::Config& synth,
                        const agents::AgentForecast& h, double y, rng::Key key) {
  const auto m = cloud.size();
  Staged staged;
  staged.moments.assign(static_cast<std::size_t>(m), synth.init);
  staged.log_weight.resize(m);
  staged.predictive.weight.resize(m);
  staged.predictive.dof.resize(m);
  staged.predictive.loc.resize(m);
  staged.predictive.scale2.resize(m);
  if (cfg.retain_history) staged.histories.resize(static_cast<std::size_t>(m));

  const auto step_tag = static_cast<std::uint64_t>(cloud.steps);
  parallel_for(static_cast<std::size_t>(m), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const Eigen::Index src = ancestors ? (*ancestors)[i] : ii;
      auto eng = key.child(rng::kProposal, step_tag, i).engine();
      const Eigen::VectorXd x = agents::sample_agent_draw(h, eng);
      const auto upd = synthesis::scored_update(cloud.moments[static_cast<std::size_t>(src)],
                                                synth.discounts, x, y);
      staged.moments[i] = upd.posterior;
      staged.log_weight[ii] = upd.log_score;
      staged.predictive.dof[ii] = upd.predictive.dof;
      staged.predictive.loc[ii] = upd.predictive.loc;
      staged.predictive.scale2[ii] = upd.predictive.scale2;
      if (cfg.retain_history) {
        auto& hist = staged.histories[i];
        hist = cloud.histories.empty() ? std::vector<double>{}
                                       : cloud.histories[static_cast<std::size_t>(src)];
        hist.insert(hist.end(), x.data(), x.data() + x.size());
      }
    }
  });
  return staged;
}

}  // namespace detail

/// Start the filter: draw x from the first forecast, weight by the prior
/// predictive at y, normalize.
inline std::pair<Cloud, StepResult> init_cloud(const Config& cfg, const synthesis::Config& synth,
                                               const agents::AgentForecast& h, double y,
                                               rng::Key pipeline_key) {
  cfg.validate();
  Cloud cloud;
  cloud.moments.assign(static_cast<std::size_t>(cfg.particles), synth.init);
  cloud.weights = Eigen::VectorXd::Constant(cfg.particles, 1.0 / cfg.particles);
  if (cfg.retain_history) cloud.histories.assign(static_cast<std::size_t>(cfg.particles), {});

  auto staged = detail::propagate(cloud, nullptr, cfg, synth, h, y, pipeline_key);
  auto [w, lse] = normalized_from_log(staged.log_weight);
  StepResult result;
  result.log_score = lse - std::log(static_cast<double>(cfg.particles));
  cloud.moments = std::move(staged.moments);
  cloud.weights = std::move(w);
  cloud.histories = std::move(staged.histories);
  cloud.steps = 1;
  cloud.log_evidence = result.log_score;
  result.ess = ess(cloud);
  result.predictive = std::move(staged.predictive);
  result.predictive.weight.setConstant(1.0 / static_cast<double>(cfg.particles));
  return {std::move(cloud), std::move(result)};
}

/// One filter step: resample ancestors (every step unless the adaptive flag
/// is set), propagate x_t ~ h_t, weight by the closed-form t predictive at
/// y_t, normalize, and accumulate the evidence increment.
inline StepResult step(Cloud& cloud, const Config& cfg, const synthesis::Config& synth,
                       const agents::AgentForecast& h, double y, rng::Key pipeline_key) {
  const auto m = cloud.size();
  const bool resample =
      !cfg.adaptive_resampling || ess(cloud) < 0.5 * static_cast<double>(m);

  std::optional<std::vector<Eigen::Index>> ancestors;
  if (resample) {
    auto eng = pipeline_key.child(rng::kResample, static_cast<std::uint64_t>(cloud.steps)).engine();
    ancestors = resample_indices(cloud.weights, m, cfg.resampling, eng);
  }
  auto staged = detail::propagate(cloud, ancestors ? &*ancestors : nullptr, cfg, synth, h, y,
                                  pipeline_key);

  StepResult result;
  if (resample) {
    auto [w, lse] = normalized_from_log(staged.log_weight);
    result.log_score = lse - std::log(static_cast<double>(m));
    cloud.weights = std::move(w);
    staged.predictive.weight.setConstant(1.0 / static_cast<double>(m));
  } else {
    const Eigen::VectorXd lw = staged.log_weight + cloud.weights.array().log().matrix();
    auto [w, lse] = normalized_from_log(lw);
    result.log_score = lse;
    staged.predictive.weight = cloud.weights;
    cloud.weights = std::move(w);
  }
  cloud.moments = std::move(staged.moments);
  cloud.histories = std::move(staged.histories);
  cloud.steps += 1;
  cloud.log_evidence += result.log_score;
  result.ess = ess(cloud);
  result.predictive = std::move(staged.predictive);
  return result;
}

/// Rebuild the cloud from a fresh Gibbs chain when ESS fell below the
/// threshold: refit each retained path through the synthesis filter, reset
/// to equal weights. The cloud size becomes the chain size.
inline std::optional<InterventionEvent> maybe_intervene(
    Cloud& cloud, const Config& cfg, const synthesis::Config& synth, const Eigen::VectorXd& y_hist,
    const std::vector<agents::AgentForecast>& h_hist, rng::Key pipeline_key) {
  const double current = ess(cloud);
  if (current >= cfg.ess_threshold) return std::nullopt;
  if (y_hist.size() != cloud.steps || h_hist.size() != static_cast<std::size_t>(cloud.steps))
    throw std::invalid_argument("maybe_intervene: history length mismatch");

  const auto start = std::chrono::steady_clock::now();
  const int n = cfg.chain_size > 0 ? cfg.chain_size : static_cast<int>(cloud.size());
  const auto chain_key = pipeline_key.child(rng::kIntervention,
                                            static_cast<std::uint64_t>(cloud.steps));
  const auto paths = gibbs::run_chain(y_hist, h_hist, synth,
                                      gibbs::Config{n, cfg.chain_burn}, chain_key, cfg.threads);

  std::vector<dlm::Momentsd> refit(static_cast<std::size_t>(n), synth.init);
  parallel_for(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      dlm::Momentsd moments = synth.init;
      const auto& path = paths[i];
      for (Eigen::Index t = 0; t < path.cols(); ++t) {
        moments = synthesis::scored_update(moments, synth.discounts, path.col(t), y_hist[t])
                      .posterior;
      }
      refit[i] = std::move(moments);
    }
  });

  cloud.moments = std::move(refit);
  cloud.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  if (cfg.retain_history) {
    cloud.histories.assign(static_cast<std::size_t>(n), {});
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
      const auto& path = paths[i];
      cloud.histories[i].assign(path.data(), path.data() + path.size());
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return InterventionEvent{cloud.steps - 1, current, n, seconds};
}

/// One-step-ahead synthesized predictive from the current cloud: per
/// particle, a fresh draw x ~ h_next and the conditional t density; the
/// estimate is the weight mixture. Does not advance the cloud.
inline mix::StudentTMixture synthesized_predictive(const Cloud& cloud,
                                                   const synthesis::Config& synth,
                                                   const agents::AgentForecast& h_next,
                                                   rng::Key pipeline_key, int threads = 1) {
  const auto m = cloud.size();
  mix::StudentTMixture out;
  out.weight = cloud.weights;
  out.dof.resize(m);
  out.loc.resize(m);
  out.scale2.resize(m);
  const auto step_tag = static_cast<std::uint64_t>(cloud.steps);
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      auto eng = pipeline_key.child(rng::kPredictive, step_tag, i).engine();
      const Eigen::VectorXd x = agents::sample_agent_draw(h_next, eng);
      const auto prior = dlm::prior_step(cloud.moments[i], synth.discounts);
      const auto pred = dlm::predictive(prior, synthesis::regressor(x));
      out.dof[ii] = pred.dof;
      out.loc[ii] = pred.loc;
      out.scale2[ii] = pred.scale2;
    }
  });
  return out;
}

/// Stateful convenience wrapper sequencing init, step and the intervention
/// check, keeping the (y, forecast) history the Gibbs refit needs.
class Pipeline {
 public:
  Pipeline(Config cfg, synthesis::Config synth, rng::Key pipeline_key)
      : cfg_(cfg), synth_(std::move(synth)), key_(pipeline_key) {
    cfg_.validate();
  }

  StepResult step(const agents::AgentForecast& h, double y) {
    h_hist_.push_back(h);
    y_hist_.conservativeResize(y_hist_.size() + 1);
    y_hist_[y_hist_.size() - 1] = y;

    StepResult result;
    if (cloud_.steps == 0) {
      auto [cloud, res] = init_cloud(cfg_, synth_, h, y, key_);
      cloud_ = std::move(cloud);
      result = std::move(res);
    } else {
      result = smc::step(cloud_, cfg_, synth_, h, y, key_);
    }
    if (auto event = maybe_intervene(cloud_, cfg_, synth_, y_hist_, h_hist_, key_)) {
      result.intervened = true;
      events_.push_back(*event);
    }
    return result;
  }

  [[nodiscard]] mix::StudentTMixture predict(const agents::AgentForecast& h_next) const {
    return synthesized_predictive(cloud_, synth_, h_next, key_, cfg_.threads);
  }

  [[nodiscard]] const Cloud& cloud() const { return cloud_; }
  [[nodiscard]] const std::vector<InterventionEvent>& interventions() const { return events_; }
  [[nodiscard]] const Config& config() const { return cfg_; }

 private:
  Config cfg_;
  synthesis::Config synth_;
  rng::Key key_;
  Cloud cloud_;
  Eigen::VectorXd y_hist_;
  std::vector<agents::AgentForecast> h_hist_;
  std::vector<InterventionEvent> events_;
};

}  // namespace bps::smc
