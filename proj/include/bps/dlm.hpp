#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bps/student_t.hpp"

namespace bps::dlm {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// State and volatility discount factors, both in (0, 1].
template <typename Scalar>
struct DiscountConfig {
  Scalar beta;   ///< volatility discount
  Scalar delta;  ///< state discount

  DiscountConfig(Scalar beta_, Scalar delta_) : beta(beta_), delta(delta_) {
    if (!(beta > Scalar(0) && beta <= Scalar(1)))
      throw std::invalid_argument("DiscountConfig: beta must lie in (0, 1]");
    if (!(delta > Scalar(0) && delta <= Scalar(1)))
      throw std::invalid_argument("DiscountConfig: delta must lie in (0, 1]");
  }
};

/// Normal-inverse-gamma sufficient statistics of a discount DLM posterior:
/// theta | nu ~ N(m, (nu/s) C), nu ~ IG(n/2, n s/2).
template <typename Scalar>
struct Moments {
  Vector<Scalar> m;  ///< state posterior mean
  Matrix<Scalar> C;  ///< state posterior scale matrix
  Scalar n;          ///< volatility degrees of freedom
  Scalar s;          ///< volatility point estimate

  Moments(Vector<Scalar> m_, Matrix<Scalar> C_, Scalar n_, Scalar s_)
      : m(std::move(m_)), C(std::move(C_)), n(n_), s(s_) {
    if (C.rows() != C.cols() || C.rows() != m.size())
      throw std::invalid_argument("Moments: C must be square and match dim(m)");
    if (!(n > Scalar(0))) throw std::invalid_argument("Moments: n must be positive");
    if (!(s > Scalar(0))) throw std::invalid_argument("Moments: s must be positive");
  }

  Eigen::Index dim() const { return m.size(); }
};

/// One-step-ahead prior: theta | nu ~ N(a, (nu/s_prev) R), nu ~ IG(r/2, r s_prev/2).
template <typename Scalar>
struct Prior {
  Vector<Scalar> a;
  Matrix<Scalar> R;
  Scalar r;
  Scalar s_prev;  ///< volatility estimate carried from the posterior

  Prior(Vector<Scalar> a_, Matrix<Scalar> R_, Scalar r_, Scalar s_prev_)
      : a(std::move(a_)), R(std::move(R_)), r(r_), s_prev(s_prev_) {
    if (R.rows() != R.cols() || R.rows() != a.size())
      throw std::invalid_argument("Prior: R must be square and match dim(a)");
    if (!(r > Scalar(0))) throw std::invalid_argument("Prior: r must be positive");
    if (!(s_prev > Scalar(0))) throw std::invalid_argument("Prior: s_prev must be positive");
  }

  Eigen::Index dim() const { return a.size(); }
};

using DiscountConfigd = DiscountConfig<double>;
using Momentsd = Moments<double>;
using Priord = Prior<double>;

/// Posterior-to-prior evolution: a = m, R = C/delta, r = beta n.
template <typename Scalar>
Prior<Scalar> prior_step(const Moments<Scalar>& post, const DiscountConfig<Scalar>& cfg) {
  return Prior<Scalar>(post.m, post.C / cfg.delta, cfg.beta * post.n, post.s);
}

/// One-step-ahead predictive t(r, F'a, s_prev + F'RF).
template <typename Scalar, typename Derived>
StudentT<Scalar> predictive(const Prior<Scalar>& prior, const Eigen::MatrixBase<Derived>& F) {
  if (F.size() != prior.a.size()) throw std::invalid_argument("predictive: regressor dimension mismatch");
  const Scalar f = prior.a.dot(F);
  const Scalar q = prior.s_prev + F.dot(prior.R * F);
  return StudentT<Scalar>(prior.r, f, q);
}

/// Prior-to-posterior update given the observation y.
/// q = s_prev + F'RF, e = y - F'a, z = (r + e^2/q)/(r+1), A = RF/q,
/// m = a + A e, C = (R - A A' q) z, n = r + 1, s = s_prev z.
/// C is re-symmetrized explicitly to control floating-point drift.
template <typename Scalar, typename Derived>
Moments<Scalar> posterior_update(const Prior<Scalar>& prior, const Eigen::MatrixBase<Derived>& F,
                                 Scalar y) {
  if (F.size() != prior.a.size())
    throw std::invalid_argument("posterior_update: regressor dimension mismatch");
  const Vector<Scalar> rf = prior.R * F;
  const Scalar q = prior.s_prev + F.dot(rf);
  if (!(q > Scalar(0))) throw std::domain_error("posterior_update: q <= 0 (corrupted prior scale)");
  const Scalar e = y - prior.a.dot(F);
  const Scalar z = (prior.r + e * e / q) / (prior.r + Scalar(1));
  const Vector<Scalar> gain = rf / q;
  Vector<Scalar> m = prior.a + gain * e;
  Matrix<Scalar> C = (prior.R - q * (gain * gain.transpose())) * z;
  C = (Scalar(0.5) * (C + C.transpose())).eval();
  return Moments<Scalar>(std::move(m), std::move(C), prior.r + Scalar(1), prior.s_prev * z);
}

template <typename Scalar>
struct FilterStep {
  Prior<Scalar> prior;
  Moments<Scalar> posterior;
  StudentT<Scalar> predictive;
  Scalar log_score;
};

using FilterStepd = FilterStep<double>;

/// Forward filtering over a sequence. Column t of `regressors` is F_t.
/// Returns every intermediate quantity needed by backward sampling and by
/// predictive scoring.
template <typename Scalar>
std::vector<FilterStep<Scalar>> forward_filter(const Matrix<Scalar>& regressors,
                                               const Vector<Scalar>& y, Moments<Scalar> init,
                                               const DiscountConfig<Scalar>& cfg) {
  if (regressors.cols() != y.size())
    throw std::invalid_argument("forward_filter: regressors/observations length mismatch");
  std::vector<FilterStep<Scalar>> out;
  out.reserve(static_cast<std::size_t>(y.size()));
  Moments<Scalar> current = std::move(init);
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    Prior<Scalar> prior = prior_step(current, cfg);
    StudentT<Scalar> pred = predictive(prior, regressors.col(t));
    const Scalar score = log_pdf(pred, y[t]);
    current = posterior_update(prior, regressors.col(t), y[t]);
    out.push_back(FilterStep<Scalar>{std::move(prior), current, pred, score});
  }
  return out;
}

}  // namespace bps::dlm
