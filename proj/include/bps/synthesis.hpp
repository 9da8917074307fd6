#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "bps/dlm.hpp"

namespace bps::synthesis {

/// Hyperparameters of the synthesis DLM on the regressor (1, x_1, ..., x_K).
/// The calibration state carries an intercept and one coefficient per agent,
/// so dim(init) = K + 1; the observation variance is marginalized
/// analytically and lives in (n, s).
struct Config {
  dlm::Momentsd init;
  dlm::DiscountConfigd discounts;

  Config(dlm::Momentsd init_, dlm::DiscountConfigd discounts_)
      : init(std::move(init_)), discounts(discounts_) {}

  [[nodiscard]] Eigen::Index num_agents() const { return init.dim() - 1; }
};

/// Default hyperparameters for a K-agent synthesis:
/// m0 = (0, 1'/K)', C0 = I, n0 = 10, s0 = 0.002, beta = 0.99, delta = 0.95.
inline Config default_config(Eigen::Index K, double beta = 0.99, double delta = 0.95) {
  Eigen::VectorXd m0 = Eigen::VectorXd::Constant(K + 1, K > 0 ? 1.0 / static_cast<double>(K) : 0.0);
  m0[0] = 0.0;
  return Config(dlm::Momentsd(m0, Eigen::MatrixXd::Identity(K + 1, K + 1), 10.0, 0.002),
                dlm::DiscountConfigd(beta, delta));
}

/// Synthesis regressor (1, x_1, ..., x_K)'.
template <typename Derived>
Eigen::VectorXd regressor(const Eigen::MatrixBase<Derived>& x) {
  Eigen::VectorXd f(x.size() + 1);
  f[0] = 1.0;
  f.tail(x.size()) = x;
  return f;
}

struct ScoredUpdate {
  double log_score;
  dlm::StudentTd predictive;
  dlm::Momentsd posterior;
};

/// One conditional filter step of the synthesis DLM given an agent draw x:
/// evolve, score y under the closed-form t predictive, update. The score is
/// exact (no Monte Carlo enters the weight).
inline ScoredUpdate scored_update(const dlm::Momentsd& moments, const dlm::DiscountConfigd& discounts,
                                  const Eigen::VectorXd& x, double y) {
  if (x.size() + 1 != moments.dim())
    throw std::invalid_argument("scored_update: agent draw dimension mismatch");
  const auto prior = dlm::prior_step(moments, discounts);
  const Eigen::VectorXd f = regressor(x);
  auto pred = dlm::predictive(prior, f);
  const double score = dlm::log_pdf(pred, y);
  return ScoredUpdate{score, pred, dlm::posterior_update(prior, f, y)};
}

}  // namespace bps::synthesis
