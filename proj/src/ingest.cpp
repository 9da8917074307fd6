#include "bps/ingest.hpp"

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bps::io {

namespace {

std::runtime_error parse_error(const std::string& path, std::size_t row, const std::string& what) {
  return std::runtime_error(path + ":" + std::to_string(row) + ": " + what);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& path, std::size_t row, const std::string& column,
                  const std::string& cell) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw parse_error(path, row, "column " + column + ": non-numeric cell '" + cell + "'");
  }
}

agents::QuarterDate parse_quarter(const std::string& path, std::size_t row, const std::string& cell) {
  const auto qpos = cell.find('Q');
  if (qpos == std::string::npos || qpos == 0 || qpos + 1 >= cell.size())
    throw parse_error(path, row, "column date: expected YYYYQn, got '" + cell + "'");
  try {
    const int year = std::stoi(cell.substr(0, qpos));
    const int quarter = std::stoi(cell.substr(qpos + 1));
    if (quarter < 1 || quarter > 4) throw std::invalid_argument("quarter out of range");
    return agents::QuarterDate{year, quarter};
  } catch (const std::exception&) {
    throw parse_error(path, row, "column date: expected YYYYQn, got '" + cell + "'");
  }
}

MonthDate parse_month(const std::string& path, std::size_t row, const std::string& cell) {
  const auto dash = cell.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 >= cell.size())
    throw parse_error(path, row, "column date: expected YYYY-MM, got '" + cell + "'");
  try {
    const int year = std::stoi(cell.substr(0, dash));
    const int month = std::stoi(cell.substr(dash + 1));
    if (month < 1 || month > 12) throw std::invalid_argument("month out of range");
    return MonthDate{year, month};
  } catch (const std::exception&) {
    throw parse_error(path, row, "column date: expected YYYY-MM, got '" + cell + "'");
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  return in;
}

void check_quarter_continuity(const std::string& path, std::size_t row,
                              const agents::QuarterDate& prev, const agents::QuarterDate& cur) {
  if (!prev.before(cur))
    throw parse_error(path, row, "dates not strictly increasing at " + cur.str());
  if (!(prev.next() == cur))
    throw parse_error(path, row, "missing quarter " + prev.next().str() + " before " + cur.str());
}

}  // namespace

agents::MacroSeries ingest_quarterly_csv(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw parse_error(path, row, "empty file");
  if (split_row(line) != std::vector<std::string>{"date", "y", "u", "r"})
    throw parse_error(path, row, "expected header date,y,u,r");

  agents::MacroSeries out;
  std::vector<double> y, u, r;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != 4)
      throw parse_error(path, row, "expected 4 cells, got " + std::to_string(cells.size()));
    const auto date = parse_quarter(path, row, cells[0]);
    if (!out.dates.empty()) check_quarter_continuity(path, row, out.dates.back(), date);
    out.dates.push_back(date);
    y.push_back(parse_cell(path, row, "y", cells[1]));
    u.push_back(parse_cell(path, row, "u", cells[2]));
    r.push_back(parse_cell(path, row, "r", cells[3]));
  }
  if (out.dates.empty()) throw parse_error(path, row, "no data rows");
  out.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  out.u = Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  out.r = Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
  out.validate();
  return out;
}

std::pair<std::vector<agents::QuarterDate>, Eigen::VectorXd> ingest_quarterly_series(
    const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw parse_error(path, row, "empty file");
  if (split_row(line) != std::vector<std::string>{"date", "value"})
    throw parse_error(path, row, "expected header date,value");
  std::vector<agents::QuarterDate> dates;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != 2) throw parse_error(path, row, "expected 2 cells");
    const auto date = parse_quarter(path, row, cells[0]);
    if (!dates.empty()) check_quarter_continuity(path, row, dates.back(), date);
    dates.push_back(date);
    values.push_back(parse_cell(path, row, "value", cells[1]));
  }
  if (dates.empty()) throw parse_error(path, row, "no data rows");
  return {std::move(dates),
          Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

MonthlySeries ingest_monthly_series(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw parse_error(path, row, "empty file");
  if (split_row(line) != std::vector<std::string>{"date", "value"})
    throw parse_error(path, row, "expected header date,value");
  MonthlySeries out;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != 2) throw parse_error(path, row, "expected 2 cells");
    const auto date = parse_month(path, row, cells[0]);
    if (!out.dates.empty()) {
      const auto& prev = out.dates.back();
      const MonthDate next = prev.month == 12 ? MonthDate{prev.year + 1, 1}
                                              : MonthDate{prev.year, prev.month + 1};
      if (!(date == next))
        throw parse_error(path, row, "missing month " + std::to_string(next.year) + "-" +
                                         std::to_string(next.month));
    }
    out.dates.push_back(date);
    out.values.push_back(parse_cell(path, row, "value", cells[1]));
  }
  if (out.dates.empty()) throw parse_error(path, row, "no data rows");
  return out;
}

std::pair<std::vector<agents::QuarterDate>, Eigen::VectorXd> collapse_monthly(
    const MonthlySeries& series) {
  std::vector<agents::QuarterDate> dates;
  std::vector<double> values;
  for (std::size_t i = 0; i < series.dates.size(); ++i) {
    const auto& d = series.dates[i];
    if (d.month % 3 == 0) {  // last month of the quarter
      dates.push_back(agents::QuarterDate{d.year, d.month / 3});
      values.push_back(series.values[i]);
    }
  }
  if (dates.empty()) throw std::invalid_argument("collapse_monthly: no complete quarter");
  return {std::move(dates),
          Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

agents::MacroSeries compose(const std::string& y_quarterly_path, const std::string& u_monthly_path,
                            const std::string& r_monthly_path) {
  auto [y_dates, y_values] = ingest_quarterly_series(y_quarterly_path);
  auto [u_dates, u_values] = collapse_monthly(ingest_monthly_series(u_monthly_path));
  auto [r_dates, r_values] = collapse_monthly(ingest_monthly_series(r_monthly_path));

  auto later = [](const agents::QuarterDate& a, const agents::QuarterDate& b) {
    return a.before(b) ? b : a;
  };
  auto earlier = [](const agents::QuarterDate& a, const agents::QuarterDate& b) {
    return a.before(b) ? a : b;
  };
  const auto start = later(later(y_dates.front(), u_dates.front()), r_dates.front());
  const auto end = earlier(earlier(y_dates.back(), u_dates.back()), r_dates.back());
  if (end.before(start)) throw std::runtime_error("compose: series do not overlap");

  auto offset_of = [&](const std::vector<agents::QuarterDate>& dates) {
    for (std::size_t i = 0; i < dates.size(); ++i)
      if (dates[i] == start) return static_cast<Eigen::Index>(i);
    throw std::runtime_error("compose: alignment failure");
  };
  Eigen::Index n = 0;
  for (auto d = start; !end.before(d); d = d.next()) ++n;

  agents::MacroSeries out;
  out.y = y_values.segment(offset_of(y_dates), n);
  out.u = u_values.segment(offset_of(u_dates), n);
  out.r = r_values.segment(offset_of(r_dates), n);
  auto d = start;
  for (Eigen::Index i = 0; i < n; ++i, d = d.next()) out.dates.push_back(d);
  out.validate();
  return out;
}

}  // namespace bps::io
