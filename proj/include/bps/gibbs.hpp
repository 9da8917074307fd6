#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "bps/agents.hpp"
#include "bps/dlm.hpp"
#include "bps/parallel.hpp"
#include "bps/rng.hpp"
#include "bps/synthesis.hpp"

namespace bps::gibbs {

namespace detail {

/// Draw from N(mean, cov) for PSD (possibly singular) cov via pivoted LDLT
/// with negative pivots clamped to zero. A zero covariance returns the mean.
inline Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                rng::Engine& eng) {
  const auto p = mean.size();
  if (cov.rows() != p || cov.cols() != p) throw std::invalid_argument("mvn_draw: shape mismatch");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success) throw std::domain_error("mvn_draw: decomposition failed");
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z[i] = rng::draw_normal(eng);
  z = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z;
  z = ldlt.matrixL() * z;
  return mean + ldlt.transpositionsP().transpose() * z;
}

}  // namespace detail

/// Sampled calibration path: theta column per time, volatility per time.
struct PhiPath {
  Eigen::MatrixXd theta;  // p x T
  Eigen::VectorXd nu;     // T
};

/// Forward filtering, backward sampling. Draws one (theta, nu) path from the
/// smoothing posterior given the forward-filter output.
///
/// Backward volatility recursion: nu_t^{-1} = beta nu_{t+1}^{-1} + gamma_t,
/// gamma_t ~ Gamma((1-beta) n_t / 2, rate n_t s_t / 2); state recursion:
/// theta_t ~ N(m_t + delta (theta_{t+1} - m_t), (1-delta)(nu_t/s_t) C_t).
inline PhiPath ffbs(const std::vector<dlm::FilterStepd>& filter, const dlm::DiscountConfigd& cfg,
                    rng::Engine& eng) {
  if (filter.empty()) throw std::invalid_argument("ffbs: empty filter output");
  const auto T = static_cast<Eigen::Index>(filter.size());
  const auto p = filter.back().posterior.dim();
  PhiPath path;
  path.theta.resize(p, T);
  path.nu.resize(T);

  const auto& last = filter[static_cast<std::size_t>(T - 1)].posterior;
  double nu = rng::draw_inverse_gamma(eng, last.n / 2.0, last.n * last.s / 2.0);
  path.nu[T - 1] = nu;
  path.theta.col(T - 1) = detail::mvn_draw(last.m, (nu / last.s) * last.C, eng);

  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const auto& post = filter[static_cast<std::size_t>(t)].posterior;
    const double gamma = rng::draw_gamma_rate(eng, (1.0 - cfg.beta) * post.n / 2.0,
                                              post.n * post.s / 2.0);
    nu = 1.0 / (cfg.beta / nu + gamma);
    path.nu[t] = nu;
    const Eigen::VectorXd mean = post.m + cfg.delta * (path.theta.col(t + 1) - post.m);
    if (cfg.delta == 1.0) {
      path.theta.col(t) = mean;
    } else {
      path.theta.col(t) = detail::mvn_draw(mean, (1.0 - cfg.delta) * (nu / post.s) * post.C, eng);
    }
  }
  return path;
}

/// Mean and covariance of the x_t full conditional given (theta_t, nu_t,
/// sigma2_t, y_t). With H = diag(sigma2_k H_k), c = y - theta_0 - mu'theta_1:K,
/// g = nu + theta'H theta, b = H theta / g:
/// x_t ~ N(mu + b c, H - b b' g).
struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline ConditionalGaussian x_conditional(const Eigen::VectorXd& theta, double nu,
                                         const agents::AgentForecast& forecast,
                                         const Eigen::VectorXd& sigma2, double y) {
  const auto K = forecast.size();
  if (theta.size() != K + 1 || sigma2.size() != K)
    throw std::invalid_argument("x_conditional: dimension mismatch");
  if (!(nu > 0.0)) throw std::invalid_argument("x_conditional: nu must be positive");
  const Eigen::VectorXd coef = theta.tail(K);
  const Eigen::VectorXd h = sigma2.cwiseProduct(forecast.scale2);
  const double c = y - theta[0] - forecast.loc.dot(coef);
  const double g = nu + coef.dot(h.cwiseProduct(coef));
  const Eigen::VectorXd b = h.cwiseProduct(coef) / g;
  ConditionalGaussian out;
  out.mean = forecast.loc + b * c;
  out.cov = Eigen::MatrixXd(h.asDiagonal());
  out.cov.noalias() -= g * (b * b.transpose());
  return out;
}

inline Eigen::VectorXd sample_x(const Eigen::VectorXd& theta, double nu,
                                const agents::AgentForecast& forecast,
                                const Eigen::VectorXd& sigma2, double y, rng::Engine& eng) {
  const auto cond = x_conditional(theta, nu, forecast, sigma2, y);
  return detail::mvn_draw(cond.mean, cond.cov, eng);
}

/// Latent scale full conditional: sigma2_k ~ IG((e_k+1)/2, (e_k+d_k)/2) with
/// d_k = (x_k - mu_k)^2 / H_k (zero in the point-mass limit H_k = 0).
inline Eigen::VectorXd sample_sigma2(const Eigen::VectorXd& x, const agents::AgentForecast& forecast,
                                     rng::Engine& eng) {
  const auto K = forecast.size();
  if (x.size() != K) throw std::invalid_argument("sample_sigma2: dimension mismatch");
  Eigen::VectorXd out(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double diff = x[k] - forecast.loc[k];
    const double d = forecast.scale2[k] > 0.0 ? diff * diff / forecast.scale2[k] : 0.0;
    out[k] = rng::draw_inverse_gamma(eng, (forecast.dof[k] + 1.0) / 2.0,
                                     (forecast.dof[k] + d) / 2.0);
  }
  return out;
}

/// Synthesis regressor matrix (K+1 x T) for an agent-draw path (K x T).
inline Eigen::MatrixXd path_regressors(const Eigen::MatrixXd& x_path) {
  Eigen::MatrixXd F(x_path.rows() + 1, x_path.cols());
  F.row(0).setOnes();
  F.bottomRows(x_path.rows()) = x_path;
  return F;
}

struct ChainState {
  Eigen::MatrixXd x;       // K x T agent-draw path
  Eigen::MatrixXd sigma2;  // K x T latent scales
};

/// One systematic Gibbs scan: Phi | x by FFBS, then x_t | Phi, sigma2 and
/// sigma2_kt | x for all t (each parallel across t). Returns the Phi draw.
inline PhiPath sweep(ChainState& state, const Eigen::VectorXd& y,
                     const std::vector<agents::AgentForecast>& forecasts,
                     const synthesis::Config& synth, rng::Key sweep_key, int threads = 1) {
  const auto T = y.size();
  const auto filter =
      dlm::forward_filter(path_regressors(state.x), y, synth.init, synth.discounts);
  auto ffbs_eng = sweep_key.child(rng::kFfbs).engine();
  PhiPath phi = ffbs(filter, synth.discounts, ffbs_eng);

  parallel_for(static_cast<std::size_t>(T), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      auto eng = sweep_key.child(rng::kXSweep, t).engine();
      state.x.col(ti) = sample_x(phi.theta.col(ti), phi.nu[ti], forecasts[t],
                                 state.sigma2.col(ti), y[ti], eng);
    }
  });
  parallel_for(static_cast<std::size_t>(T), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      auto eng = sweep_key.child(rng::kSigmaSweep, t).engine();
      state.sigma2.col(ti) = sample_sigma2(state.x.col(ti), forecasts[t], eng);
    }
  });
  return phi;
}

struct Config {
  int retained;     ///< retained chain size N
  int burn_in = -1;  ///< extra discarded sweeps; -1 means retained/10

  [[nodiscard]] int burn() const { return burn_in >= 0 ? burn_in : retained / 10; }
};

/// Deterministic chain start: agent forecast means and unit scales.
inline ChainState initial_state(const std::vector<agents::AgentForecast>& forecasts) {
  const auto T = static_cast<Eigen::Index>(forecasts.size());
  const auto K = forecasts.front().size();
  ChainState state;
  state.x.resize(K, T);
  state.sigma2 = Eigen::MatrixXd::Ones(K, T);
  for (Eigen::Index t = 0; t < T; ++t) state.x.col(t) = forecasts[static_cast<std::size_t>(t)].loc;
  return state;
}

/// Block Gibbs sampler over (Phi, x, sigma2); returns the retained agent-draw
/// paths (Phi and sigma2 chains dropped). Runs retained + burn sweeps.
inline std::vector<Eigen::MatrixXd> run_chain(const Eigen::VectorXd& y,
                                              const std::vector<agents::AgentForecast>& forecasts,
                                              const synthesis::Config& synth, const Config& cfg,
                                              rng::Key chain_key, int threads = 1) {
  if (cfg.retained <= 0) throw std::invalid_argument("run_chain: retained size must be positive");
  if (static_cast<std::size_t>(y.size()) != forecasts.size())
    throw std::invalid_argument("run_chain: observation/forecast length mismatch");
  if (y.size() == 0) throw std::invalid_argument("run_chain: empty history");

  ChainState state = initial_state(forecasts);
  std::vector<Eigen::MatrixXd> retained;
  retained.reserve(static_cast<std::size_t>(cfg.retained));
  const int total = cfg.retained + cfg.burn();
  for (int n = 0; n < total; ++n) {
    sweep(state, y, forecasts, synth, chain_key.child(static_cast<std::uint64_t>(n)), threads);
    if (n >= cfg.burn()) retained.push_back(state.x);
  }
  return retained;
}

}  // namespace bps::gibbs
