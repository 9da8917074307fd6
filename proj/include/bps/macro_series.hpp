#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace bps::agents {

/// Calendar quarter, e.g. 1961Q1.
struct QuarterDate {
  int year = 0;
  int quarter = 1;  // 1..4

  friend bool operator==(const QuarterDate&, const QuarterDate&) = default;

  [[nodiscard]] QuarterDate next() const {
    return quarter == 4 ? QuarterDate{year + 1, 1} : QuarterDate{year, quarter + 1};
  }
  [[nodiscard]] bool before(const QuarterDate& other) const {
    return year < other.year || (year == other.year && quarter < other.quarter);
  }
  [[nodiscard]] std::string str() const {
    return std::to_string(year) + "Q" + std::to_string(quarter);
  }
};

/// Quarterly macro dataset: inflation (y), unemployment (u), short rate (r).
/// Equal lengths, strictly increasing dates, no gaps.
struct MacroSeries {
  std::vector<QuarterDate> dates;
  Eigen::VectorXd y;
  Eigen::VectorXd u;
  Eigen::VectorXd r;

  [[nodiscard]] Eigen::Index size() const { return y.size(); }

  void validate() const {
    const auto n = static_cast<std::size_t>(y.size());
    if (dates.size() != n || static_cast<std::size_t>(u.size()) != n ||
        static_cast<std::size_t>(r.size()) != n)
      throw std::invalid_argument("MacroSeries: column lengths differ");
    for (std::size_t i = 1; i < n; ++i) {
      if (!dates[i - 1].before(dates[i]))
        throw std::invalid_argument("MacroSeries: dates not strictly increasing at " +
                                    dates[i].str());
      if (!(dates[i - 1].next() == dates[i]))
        throw std::invalid_argument("MacroSeries: gap before " + dates[i].str());
    }
  }
};

}  // namespace bps::agents
