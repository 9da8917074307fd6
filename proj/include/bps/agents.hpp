#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bps/dlm.hpp"
#include "bps/macro_series.hpp"
#include "bps/rng.hpp"

namespace bps::agents {

/// Dataset column a predictor lag refers to.
enum class Var { Y, U, R };

/// One forecasting agent: a discount DLM on lagged predictors.
/// Regressor order is the listed predictor order, intercept first.
struct AgentSpec {
  std::vector<std::pair<Var, int>> predictors;  ///< (variable, lag >= 1)
  dlm::Momentsd init;
  dlm::DiscountConfigd discounts;

  AgentSpec(std::vector<std::pair<Var, int>> predictors_, dlm::Momentsd init_,
            dlm::DiscountConfigd discounts_)
      : predictors(std::move(predictors_)), init(std::move(init_)), discounts(discounts_) {
    for (const auto& [var, lag] : predictors) {
      (void)var;
      if (lag < 1) throw std::invalid_argument("AgentSpec: lags must be >= 1");
    }
    if (init.dim() != static_cast<Eigen::Index>(predictors.size()) + 1)
      throw std::invalid_argument("AgentSpec: init dimension must be 1 + #predictors");
  }

  [[nodiscard]] int max_lag() const {
    int lag = 0;
    for (const auto& p : predictors) lag = std::max(lag, p.second);
    return lag;
  }
};

/// Per-time one-step-ahead t forecasts of the K agents, in the
/// scale-mixture parametrization (dof, location, squared scale).
/// Squared scales may be zero, the point-mass limit.
struct AgentForecast {
  Eigen::VectorXd dof;
  Eigen::VectorXd loc;
  Eigen::VectorXd scale2;

  [[nodiscard]] Eigen::Index size() const { return dof.size(); }

  void validate() const {
    if (loc.size() != dof.size() || scale2.size() != dof.size())
      throw std::invalid_argument("AgentForecast: field lengths differ");
    if ((dof.array() <= 0.0).any()) throw std::invalid_argument("AgentForecast: dof must be positive");
    if ((scale2.array() < 0.0).any())
      throw std::invalid_argument("AgentForecast: scale2 must be non-negative");
  }
};

/// Regressor (1, predictors...) for agent `spec` at time index t (0-based).
inline Eigen::VectorXd build_regressors(const AgentSpec& spec, const MacroSeries& data, int t) {
  if (t < spec.max_lag())
    throw std::out_of_range("build_regressors: insufficient history at t = " + std::to_string(t));
  if (t >= data.size()) throw std::out_of_range("build_regressors: t beyond series end");
  Eigen::VectorXd f(static_cast<Eigen::Index>(spec.predictors.size()) + 1);
  f[0] = 1.0;
  Eigen::Index i = 1;
  for (const auto& [var, lag] : spec.predictors) {
    const int idx = t - lag;
    switch (var) {
      case Var::Y: f[i] = data.y[idx]; break;
      case Var::U: f[i] = data.u[idx]; break;
      case Var::R: f[i] = data.r[idx]; break;
    }
    ++i;
  }
  return f;
}

/// The bank of K agent DLMs. Forecasting at t reads only data before t;
/// assimilation advances each agent with the realized y_t.
class AgentBank {
 public:
  explicit AgentBank(std::vector<AgentSpec> specs) : specs_(std::move(specs)) {
    if (specs_.empty()) throw std::invalid_argument("AgentBank: no agents");
    for (const auto& spec : specs_) states_.push_back(spec.init);
  }

  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(specs_.size()); }

  /// First time index with enough history for every agent.
  [[nodiscard]] int first_time() const {
    int lag = 0;
    for (const auto& spec : specs_) lag = std::max(lag, spec.max_lag());
    return lag;
  }

  /// One-step-ahead forecast densities for time t; never reads row t.
  [[nodiscard]] AgentForecast forecast(const MacroSeries& data, int t) const {
    AgentForecast h;
    const auto k = size();
    h.dof.resize(k);
    h.loc.resize(k);
    h.scale2.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto prior = dlm::prior_step(states_[i], specs_[i].discounts);
      const auto pred = dlm::predictive(prior, build_regressors(specs_[i], data, t));
      h.dof[i] = pred.dof;
      h.loc[i] = pred.loc;
      h.scale2[i] = pred.scale2;
    }
    return h;
  }

  /// Advance every agent with the observed y_t.
  void assimilate(const MacroSeries& data, int t) {
    for (Eigen::Index i = 0; i < size(); ++i) {
      const auto prior = dlm::prior_step(states_[i], specs_[i].discounts);
      states_[i] =
          dlm::posterior_update(prior, build_regressors(specs_[i], data, t), data.y[t]);
    }
  }

  /// Forecast-then-update; forecasting precedes updating.
  AgentForecast step(const MacroSeries& data, int t) {
    AgentForecast h = forecast(data, t);
    assimilate(data, t);
    return h;
  }

  [[nodiscard]] const dlm::Momentsd& moments(Eigen::Index k) const { return states_.at(k); }
  [[nodiscard]] const std::vector<AgentSpec>& specs() const { return specs_; }

 private:
  std::vector<AgentSpec> specs_;
  std::vector<dlm::Momentsd> states_;
};

/// Independent draws x_k ~ t(dof_k, loc_k, scale2_k) via the scale mixture:
/// sigma2 ~ IG(dof/2, dof/2), then x ~ N(loc, sigma2 * scale2).
inline Eigen::VectorXd sample_agent_draw(const AgentForecast& h, rng::Engine& eng) {
  Eigen::VectorXd x(h.size());
  for (Eigen::Index k = 0; k < h.size(); ++k) {
    if (h.scale2[k] == 0.0) {
      x[k] = h.loc[k];
      continue;
    }
    const double sigma2 = rng::draw_inverse_gamma(eng, h.dof[k] / 2.0, h.dof[k] / 2.0);
    x[k] = rng::draw_normal(eng, h.loc[k], std::sqrt(sigma2 * h.scale2[k]));
  }
  return x;
}

/// The four standard macro agents sharing hyperparameters
/// (m0, C0, n0, s0, beta, delta) = (0, I, 2, 0.01, 0.99, 0.95):
///   1: y lag 1
///   2: y, u, r lags 3..1
///   3: y lags 3..1
///   4: y, u, r lag 1
inline std::vector<AgentSpec> default_macro_agents() {
  const dlm::DiscountConfigd disc(0.99, 0.95);
  auto make = [&](std::vector<std::pair<Var, int>> preds) {
    const auto p = static_cast<Eigen::Index>(preds.size()) + 1;
    return AgentSpec(std::move(preds),
                     dlm::Momentsd(Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p), 2.0,
                                   0.01),
                     disc);
  };
  std::vector<AgentSpec> specs;
  specs.push_back(make({{Var::Y, 1}}));
  specs.push_back(make({{Var::Y, 3}, {Var::Y, 2}, {Var::Y, 1},
                        {Var::U, 3}, {Var::U, 2}, {Var::U, 1},
                        {Var::R, 3}, {Var::R, 2}, {Var::R, 1}}));
  specs.push_back(make({{Var::Y, 3}, {Var::Y, 2}, {Var::Y, 1}}));
  specs.push_back(make({{Var::Y, 1}, {Var::U, 1}, {Var::R, 1}}));
  return specs;
}

}  // namespace bps::agents
