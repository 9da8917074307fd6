#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "bps/macro_series.hpp"

namespace bps::io {

/// Calendar month, e.g. 1961-01.
struct MonthDate {
  int year = 0;
  int month = 1;  // 1..12
  friend bool operator==(const MonthDate&, const MonthDate&) = default;
};

struct MonthlySeries {
  std::vector<MonthDate> dates;
  std::vector<double> values;
};

/// Parse a combined quarterly file with header `date,y,u,r` and dates like
/// `1961Q1`. Rejects gaps, non-monotone dates and non-numeric cells, naming
/// the offending row and column.
agents::MacroSeries ingest_quarterly_csv(const std::string& path);

/// Parse a single-series file with header `date,value`. Quarterly dates look
/// like `1961Q1`, monthly like `1961-01`.
std::pair<std::vector<agents::QuarterDate>, Eigen::VectorXd> ingest_quarterly_series(
    const std::string& path);
MonthlySeries ingest_monthly_series(const std::string& path);

/// Collapse a monthly series to quarterly frequency using the value of the
/// last month of each quarter (months 3, 6, 9, 12). Requires complete
/// quarters and no gaps.
std::pair<std::vector<agents::QuarterDate>, Eigen::VectorXd> collapse_monthly(
    const MonthlySeries& series);

/// Compose a MacroSeries from a quarterly target file and monthly covariate
/// files, aligning on the common date range.
agents::MacroSeries compose(const std::string& y_quarterly_path, const std::string& u_monthly_path,
                            const std::string& r_monthly_path);

}  // namespace bps::io
