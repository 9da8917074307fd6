#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bps/macro_series.hpp"
#include "bps/mixture.hpp"

namespace bps::eval {

/// One evaluated forecast step: realized value, per-method log scores,
/// predictive quantiles, and filter diagnostics.
struct ForecastRecord {
  int t = 0;  ///< 1-based time index
  agents::QuarterDate date;
  double y = 0.0;
  std::vector<std::pair<std::string, double>> log_scores;
  double q05 = std::numeric_limits<double>::quiet_NaN();
  double q50 = std::numeric_limits<double>::quiet_NaN();
  double q95 = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
  bool intervened = false;
};

/// Cumulative log predictive density ratio of a method against a baseline,
/// accumulated from `start` (index into the aligned series).
inline Eigen::VectorXd lpdr(const Eigen::VectorXd& method, const Eigen::VectorXd& baseline,
                            Eigen::Index start = 0) {
  if (method.size() != baseline.size()) throw std::invalid_argument("lpdr: misaligned series");
  if (start < 0 || start >= method.size()) throw std::invalid_argument("lpdr: bad start index");
  Eigen::VectorXd out(method.size() - start);
  double acc = 0.0;
  for (Eigen::Index i = start; i < method.size(); ++i) {
    acc += method[i] - baseline[i];
    out[i - start] = acc;
  }
  return out;
}

/// Quantiles of an analytic mixture by CDF bisection; monotone in probs.
inline std::vector<double> predictive_quantiles(const mix::StudentTMixture& mixture,
                                                const std::vector<double>& probs,
                                                double prob_tol = 1e-6, int threads = 1) {
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0 && probs[i] < 1.0))
      throw std::invalid_argument("predictive_quantiles: probs must lie in (0, 1)");
    if (i > 0 && probs[i] <= probs[i - 1])
      throw std::invalid_argument("predictive_quantiles: probs must be sorted");
  }
  std::vector<double> out;
  out.reserve(probs.size());
  for (const double p : probs) {
    double q = mix::quantile(mixture, p, prob_tol, threads);
    if (!out.empty()) q = std::max(q, out.back());
    out.push_back(q);
  }
  return out;
}

namespace detail {

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Write records as a comma-delimited table, one row per step, columns
/// t, date, y, logscore_<method>..., q05, q50, q95, ess, intervened (0/1).
/// UTF-8, LF line endings, full double precision.
inline void emit_traces(const std::vector<ForecastRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("emit_traces: no records");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_traces: cannot open " + path);
  out << "t,date,y";
  for (const auto& [name, value] : records.front().log_scores) {
    (void)value;
    out << ",logscore_" << name;
  }
  out << ",q05,q50,q95,ess,intervened\n";
  for (const auto& rec : records) {
    if (rec.log_scores.size() != records.front().log_scores.size())
      throw std::invalid_argument("emit_traces: inconsistent method columns");
    out << rec.t << ',' << rec.date.str() << ',' << detail::format_value(rec.y);
    for (const auto& [name, value] : rec.log_scores) {
      (void)name;
      out << ',' << detail::format_value(value);
    }
    out << ',' << detail::format_value(rec.q05) << ',' << detail::format_value(rec.q50) << ','
        << detail::format_value(rec.q95) << ',' << detail::format_value(rec.ess) << ','
        << (rec.intervened ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("emit_traces: write failed for " + path);
}

/// Inverse of emit_traces.
inline std::vector<ForecastRecord> parse_traces(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("parse_traces: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_traces: empty file");
  std::vector<std::string> names;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) names.push_back(cell);
  }
  if (names.size() < 8) throw std::runtime_error("parse_traces: malformed header");
  const std::size_t methods = names.size() - 8;
  std::vector<ForecastRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    ForecastRecord rec;
    std::getline(row, cell, ',');
    rec.t = std::stoi(cell);
    std::getline(row, cell, ',');
    const auto qpos = cell.find('Q');
    rec.date = agents::QuarterDate{std::stoi(cell.substr(0, qpos)),
                                   std::stoi(cell.substr(qpos + 1))};
    std::getline(row, cell, ',');
    rec.y = std::stod(cell);
    for (std::size_t m = 0; m < methods; ++m) {
      std::getline(row, cell, ',');
      rec.log_scores.emplace_back(names[3 + m].substr(std::string("logscore_").size()),
                                  std::stod(cell));
    }
    std::getline(row, cell, ',');
    rec.q05 = std::stod(cell);
    std::getline(row, cell, ',');
    rec.q50 = std::stod(cell);
    std::getline(row, cell, ',');
    rec.q95 = std::stod(cell);
    std::getline(row, cell, ',');
    rec.ess = std::stod(cell);
    std::getline(row, cell, ',');
    rec.intervened = cell == "1";
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace bps::eval
