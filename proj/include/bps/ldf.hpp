#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bps/agents.hpp"
#include "bps/macro_series.hpp"
#include "bps/mixture.hpp"
#include "bps/smc.hpp"
#include "bps/synthesis.hpp"

namespace bps::ldf {

/// Exponentially discounted cumulative log predictive scores, one slot per
/// model: score_j <- gamma * score_j + step_score_j. The recursion equals
/// the explicit discounted sum.
struct Ledger {
  Eigen::VectorXd scores;
  double discount;

  Ledger(Eigen::Index models, double gamma) : scores(Eigen::VectorXd::Zero(models)), discount(gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("Ledger: gamma must lie in (0, 1]");
  }

  void update(const Eigen::VectorXd& step_scores) {
    if (step_scores.size() != scores.size())
      throw std::invalid_argument("Ledger: score count mismatch");
    if (!step_scores.allFinite()) throw std::invalid_argument("Ledger: non-finite score");
    scores = discount * scores + step_scores;
  }
};

/// Shift-stable softmax; -inf entries get zero weight.
inline Eigen::VectorXd softmax_weights(const Eigen::VectorXd& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) throw std::invalid_argument("softmax_weights: all scores are -inf");
  Eigen::VectorXd w(a.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    w[i] = std::exp(a[i] - m);
    total += w[i];
  }
  return w / total;
}

/// One-hot at the maximizer; ties broken by the lowest index.
inline Eigen::VectorXd argmax_weights(const Eigen::VectorXd& a) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < a.size(); ++i)
    if (a[i] > a[best]) best = i;
  if (!std::isfinite(a[best])) throw std::invalid_argument("argmax_weights: no finite maximum");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(a.size());
  w[best] = 1.0;
  return w;
}

enum class WeightFn { kSoftmax, kArgmax };

inline Eigen::VectorXd weights(WeightFn fn, const Eigen::VectorXd& a) {
  return fn == WeightFn::kSoftmax ? softmax_weights(a) : argmax_weights(a);
}

/// Weighted mixture of component predictives (log-sum-exp evaluable,
/// sampleable by component selection).
inline mix::StudentTMixture combine_predictives(const Eigen::VectorXd& w,
                                                const std::vector<mix::StudentTMixture>& parts) {
  return mix::combine(w, parts);
}

/// Grid of (beta, delta) discount pairs.
struct DiscountGrid {
  std::vector<std::pair<double, double>> pairs;

  void validate() const {
    if (pairs.empty()) throw std::invalid_argument("DiscountGrid: empty grid");
    for (const auto& [b, d] : pairs)
      if (!(b > 0.0 && b <= 1.0 && d > 0.0 && d <= 1.0))
        throw std::invalid_argument("DiscountGrid: pairs must lie in (0, 1]^2");
  }

  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(pairs.size()); }

  /// The standard 35-pair set:
  ///   {(r, r)        : r = 0.99 - 0.01 i, i = 1..20}
  /// u {(r, r - 0.02) : r = 0.99 - 0.02 i, i = 0..4}
  /// u {(r, r - 0.04) : r = 0.99 - 0.02 i, i = 0..4}
  /// u {(r, r - 0.06) : r = 0.99 - 0.02 i, i = 0..4}
  static DiscountGrid s35() {
    DiscountGrid grid;
    for (int i = 1; i <= 20; ++i) {
      const double r = 0.99 - 0.01 * i;
      grid.pairs.emplace_back(r, r);
    }
    for (const double gap : {0.02, 0.04, 0.06}) {
      for (int i = 0; i <= 4; ++i) {
        const double r = 0.99 - 0.02 * i;
        grid.pairs.emplace_back(r, r - gap);
      }
    }
    return grid;
  }

  static DiscountGrid singleton(double beta, double delta) {
    DiscountGrid grid;
    grid.pairs.emplace_back(beta, delta);
    return grid;
  }
};

/// The standard 15-value first-layer discount grid.
inline Eigen::VectorXd gamma1_grid15() {
  Eigen::VectorXd g(15);
  g << 0.01, 0.3, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.92, 0.95, 0.97, 0.98, 0.99, 1.0;
  return g;
}

struct LdfBpsOptions {
  DiscountGrid grid;
  dlm::Momentsd synthesis_init;        ///< shared across grid members
  double gamma = 0.98;
  WeightFn weight_fn = WeightFn::kArgmax;
  smc::Config smc;                     ///< particles, threshold, chain size, threads
  std::vector<double> quantile_probs;  ///< empty: skip quantile traces
  double quantile_tol = 1e-6;

  LdfBpsOptions(DiscountGrid grid_, dlm::Momentsd synthesis_init_)
      : grid(std::move(grid_)), synthesis_init(std::move(synthesis_init_)) {}
};

struct LdfBpsResult {
  std::vector<double> combined_log_score;              ///< per step, at the realized y
  std::vector<std::array<double, 3>> quantiles;        ///< empty unless requested
  std::vector<int> selected;                           ///< grid index used for the step's prediction
  Eigen::MatrixXd pipeline_scores;                     ///< J x steps per-pipeline log scores
  std::vector<std::vector<smc::InterventionEvent>> events;  ///< per pipeline
};

/// J parallel DBPS pipelines, one per (beta_j, delta_j), combined per step by
/// discounted-score weights. Agent forecasts are computed once and broadcast;
/// weights for predicting y_t use scores through t-1. The bank must be warmed
/// up to t_begin; it is advanced through [t_begin, t_end].
inline LdfBpsResult run_ldf_bps(const agents::MacroSeries& data, agents::AgentBank& bank,
                                int t_begin, int t_end, const LdfBpsOptions& opt, rng::Key root) {
  opt.grid.validate();
  const auto J = opt.grid.size();
  const int steps = t_end - t_begin + 1;
  if (steps <= 0) throw std::invalid_argument("run_ldf_bps: empty period");

  // parallelism goes across grid members; inner pipelines run serially and
  // drop particle histories (the grid multiplies their memory cost)
  const int outer_threads = opt.smc.threads;
  smc::Config member_cfg = opt.smc;
  if (J > 1) {
    member_cfg.threads = 1;
    member_cfg.retain_history = false;
  }
  std::vector<smc::Pipeline> pipelines;
  pipelines.reserve(static_cast<std::size_t>(J));
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto& [beta, delta] = opt.grid.pairs[static_cast<std::size_t>(j)];
    synthesis::Config synth(opt.synthesis_init, dlm::DiscountConfigd(beta, delta));
    pipelines.emplace_back(member_cfg, synth,
                           root.child(rng::kPipeline, static_cast<std::uint64_t>(j)));
  }

  Ledger ledger(J, opt.gamma);
  LdfBpsResult result;
  result.pipeline_scores.resize(J, steps);
  result.events.resize(static_cast<std::size_t>(J));

  for (int t = t_begin; t <= t_end; ++t) {
    const int s = t - t_begin;
    const auto h = bank.forecast(data, t);
    const Eigen::VectorXd w = weights(opt.weight_fn, ledger.scores);
    int selected = 0;
    w.maxCoeff(&selected);
    result.selected.push_back(selected);

    std::vector<mix::StudentTMixture> mixtures(static_cast<std::size_t>(J));
    Eigen::VectorXd step_scores(J);
    parallel_for(static_cast<std::size_t>(J), outer_threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        auto res = pipelines[j].step(h, data.y[t]);
        step_scores[static_cast<Eigen::Index>(j)] = res.log_score;
        mixtures[j] = std::move(res.predictive);
      }
    });

    const auto combined = combine_predictives(w, mixtures);
    result.combined_log_score.push_back(combined.log_pdf(data.y[t]));
    if (!opt.quantile_probs.empty()) {
      std::array<double, 3> q{};
      for (std::size_t i = 0; i < opt.quantile_probs.size() && i < 3; ++i)
        q[i] = mix::quantile(combined, opt.quantile_probs[i], opt.quantile_tol, outer_threads);
      result.quantiles.push_back(q);
    }
    result.pipeline_scores.col(s) = step_scores;
    ledger.update(step_scores);
    bank.assimilate(data, t);
  }
  for (Eigen::Index j = 0; j < J; ++j)
    result.events[static_cast<std::size_t>(j)] = pipelines[static_cast<std::size_t>(j)].interventions();
  return result;
}

struct TwoLayerOptions {
  Eigen::VectorXd gamma1_grid;
  double gamma2 = 0.98;
  WeightFn first = WeightFn::kSoftmax;
  WeightFn second = WeightFn::kArgmax;
};

struct TwoLayerResult {
  std::vector<double> combined_log_score;  ///< per step, at the realized y
  std::vector<int> selected_gamma1;        ///< grid index used for the step's prediction
  Eigen::MatrixXd layer_scores;            ///< |gamma1| x steps first-layer combination scores
  Eigen::MatrixXd agent_scores;            ///< K x steps agent log scores
  std::vector<mix::StudentTMixture> combined;  ///< per-step final mixtures
};

/// Two-layer discounted combination over the agent densities: the first
/// layer combines the K agents per gamma1, the second combines those
/// combinations with discount gamma2. Purely analytic, no Monte Carlo.
inline TwoLayerResult run_two_layer_ldf(const agents::MacroSeries& data, agents::AgentBank& bank,
                                        int t_begin, int t_end, const TwoLayerOptions& opt) {
  const auto G = opt.gamma1_grid.size();
  if (G == 0) throw std::invalid_argument("run_two_layer_ldf: empty gamma1 grid");
  const int steps = t_end - t_begin + 1;
  if (steps <= 0) throw std::invalid_argument("run_two_layer_ldf: empty period");
  const auto K = bank.size();

  std::vector<Ledger> first;
  first.reserve(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) first.emplace_back(K, opt.gamma1_grid[g]);
  Ledger second(G, opt.gamma2);

  TwoLayerResult result;
  result.layer_scores.resize(G, steps);
  result.agent_scores.resize(K, steps);

  for (int t = t_begin; t <= t_end; ++t) {
    const int s = t - t_begin;
    const auto h = bank.forecast(data, t);

    std::vector<mix::StudentTMixture> agent_mixtures(static_cast<std::size_t>(K));
    Eigen::VectorXd agent_scores(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      mix::StudentTMixture one;
      one.weight = Eigen::VectorXd::Ones(1);
      one.dof = h.dof.segment(k, 1);
      one.loc = h.loc.segment(k, 1);
      one.scale2 = h.scale2.segment(k, 1);
      agent_mixtures[static_cast<std::size_t>(k)] = std::move(one);
      agent_scores[k] = dlm::log_pdf(dlm::StudentTd(h.dof[k], h.loc[k], h.scale2[k]), data.y[t]);
    }

    std::vector<mix::StudentTMixture> layer(static_cast<std::size_t>(G));
    Eigen::VectorXd layer_scores(G);
    for (Eigen::Index g = 0; g < G; ++g) {
      const auto w = weights(opt.first, first[static_cast<std::size_t>(g)].scores);
      layer[static_cast<std::size_t>(g)] = combine_predictives(w, agent_mixtures);
      layer_scores[g] = layer[static_cast<std::size_t>(g)].log_pdf(data.y[t]);
    }

    const auto w2 = weights(opt.second, second.scores);
    int selected = 0;
    w2.maxCoeff(&selected);
    result.selected_gamma1.push_back(selected);
    auto combined = combine_predictives(w2, layer);
    result.combined_log_score.push_back(combined.log_pdf(data.y[t]));
    result.combined.push_back(std::move(combined));

    for (Eigen::Index g = 0; g < G; ++g) first[static_cast<std::size_t>(g)].update(agent_scores);
    second.update(layer_scores);
    result.layer_scores.col(s) = layer_scores;
    result.agent_scores.col(s) = agent_scores;
    bank.assimilate(data, t);
  }
  return result;
}

}  // namespace bps::ldf
