#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bps/parallel.hpp"
#include "bps/rng.hpp"
#include "bps/student_t.hpp"

namespace bps::mix {

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// Finite mixture of one-dimensional Student-t densities, stored as
/// parallel arrays. Weights are non-negative and sum to one.
struct StudentTMixture {
  Eigen::VectorXd weight;
  Eigen::VectorXd dof;
  Eigen::VectorXd loc;
  Eigen::VectorXd scale2;

  [[nodiscard]] Eigen::Index size() const { return weight.size(); }

  void validate() const {
    if (dof.size() != size() || loc.size() != size() || scale2.size() != size())
      throw std::invalid_argument("StudentTMixture: field lengths differ");
    if (size() == 0) throw std::invalid_argument("StudentTMixture: empty mixture");
    if ((weight.array() < 0.0).any()) throw std::invalid_argument("StudentTMixture: negative weight");
    if (std::fabs(weight.sum() - 1.0) > 1e-9)
      throw std::invalid_argument("StudentTMixture: weights must sum to one");
  }

  [[nodiscard]] double log_pdf(double y) const {
    Eigen::VectorXd terms(size());
    for (Eigen::Index i = 0; i < size(); ++i) {
      terms[i] = weight[i] > 0.0
                     ? std::log(weight[i]) +
                           dlm::log_pdf(dlm::StudentTd(dof[i], loc[i], scale2[i]), y)
                     : -std::numeric_limits<double>::infinity();
    }
    return log_sum_exp(terms);
  }

  [[nodiscard]] double cdf(double y, int threads = 1) const {
    const auto n = static_cast<std::size_t>(size());
    if (threads <= 1 || n < 4096) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < size(); ++i) {
        if (weight[i] > 0.0) acc += weight[i] * dlm::cdf(dlm::StudentTd(dof[i], loc[i], scale2[i]), y);
      }
      return acc;
    }
    std::vector<double> partial(static_cast<std::size_t>(threads), 0.0);
    const std::size_t chunk = (n + threads - 1) / static_cast<std::size_t>(threads);
    parallel_for(static_cast<std::size_t>(threads), threads, [&](std::size_t wb, std::size_t we) {
      for (std::size_t w = wb; w < we; ++w) {
        double acc = 0.0;
        const std::size_t b = w * chunk, e = std::min(n, b + chunk);
        for (std::size_t i = b; i < e; ++i) {
          const auto j = static_cast<Eigen::Index>(i);
          if (weight[j] > 0.0)
            acc += weight[j] * dlm::cdf(dlm::StudentTd(dof[j], loc[j], scale2[j]), y);
        }
        partial[w] = acc;
      }
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
  }

  [[nodiscard]] double sample(rng::Engine& eng) const {
    const double u = rng::draw_uniform(eng);
    double acc = 0.0;
    Eigen::Index pick = size() - 1;
    for (Eigen::Index i = 0; i < size(); ++i) {
      acc += weight[i];
      if (u <= acc) {
        pick = i;
        break;
      }
    }
    if (scale2[pick] == 0.0) return loc[pick];
    return dlm::draw(dlm::StudentTd(dof[pick], loc[pick], scale2[pick]), eng);
  }

  /// Weighted mean and variance of the mixture (finite when all dof > 2).
  [[nodiscard]] double mean() const { return weight.dot(loc); }
  [[nodiscard]] double variance() const {
    const double mu = mean();
    double v = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i) {
      const double comp_var = dof[i] > 2.0 ? dof[i] / (dof[i] - 2.0) * scale2[i] : scale2[i] * 3.0;
      v += weight[i] * (comp_var + (loc[i] - mu) * (loc[i] - mu));
    }
    return v;
  }
};

/// Mixture quantile by CDF bisection, deterministic; `prob_tol` bounds the
/// CDF error at the returned point.
inline double quantile(const StudentTMixture& mixture, double p, double prob_tol = 1e-6,
                       int threads = 1) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p must lie in (0, 1)");
  const double center = mixture.mean();
  const double spread = std::sqrt(std::max(mixture.variance(), 1e-300));
  double lo = center - 8.0 * spread;
  double hi = center + 8.0 * spread;
  while (mixture.cdf(lo, threads) > p) lo = center + 2.0 * (lo - center);
  while (mixture.cdf(hi, threads) < p) hi = center + 2.0 * (hi - center);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = mixture.cdf(mid, threads);
    if (std::fabs(f - p) <= prob_tol) return mid;
    if (f < p) lo = mid; else hi = mid;
    if (hi - lo < 1e-12 * (1.0 + std::fabs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

/// Weighted union of mixtures, flattened. Zero-weight members are dropped,
/// so argmax-style combinations stay compact.
inline StudentTMixture combine(const Eigen::VectorXd& weights,
                               const std::vector<StudentTMixture>& parts) {
  if (static_cast<std::size_t>(weights.size()) != parts.size())
    throw std::invalid_argument("combine: weight/component count mismatch");
  if (parts.empty()) throw std::invalid_argument("combine: no components");
  Eigen::Index total = 0;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    if (weights[j] < 0.0) throw std::invalid_argument("combine: negative weight");
    if (weights[j] > 0.0) total += parts[static_cast<std::size_t>(j)].size();
  }
  StudentTMixture out;
  out.weight.resize(total);
  out.dof.resize(total);
  out.loc.resize(total);
  out.scale2.resize(total);
  Eigen::Index at = 0;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    const auto& part = parts[static_cast<std::size_t>(j)];
    const auto n = part.size();
    out.weight.segment(at, n) = weights[j] * part.weight;
    out.dof.segment(at, n) = part.dof;
    out.loc.segment(at, n) = part.loc;
    out.scale2.segment(at, n) = part.scale2;
    at += n;
  }
  return out;
}

}  // namespace bps::mix
