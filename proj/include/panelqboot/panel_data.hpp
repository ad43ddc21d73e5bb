#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "panelqboot/errors.hpp"
#include "panelqboot/format.hpp"

namespace panelqboot {

// Balanced N x T panel with p covariates. Immutable after construction and
// safe to share across threads. Time labels are per-unit and only need to be
// contiguous; positions 0..T-1 are what the algorithms operate on.
class PanelDataset {
 public:
  // y: N x T (row i = unit i); x: (N*T) x p with row i*T + t = observation
  // (i, t). Unit ids must already be in canonical (sorted) order.
  static PanelDataset from_arrays(std::vector<std::string> unit_ids,
                                  std::vector<std::int64_t> time_start,
                                  Eigen::MatrixXd y, Eigen::MatrixXd x,
                                  std::vector<std::string> x_names = {}) {
    PanelDataset d;
    d.unit_ids_ = std::move(unit_ids);
    d.time_start_ = std::move(time_start);
    d.y_ = std::move(y);
    d.x_ = std::move(x);
    d.x_names_ = std::move(x_names);
    const auto n = static_cast<Eigen::Index>(d.unit_ids_.size());
    if (n < 1 || d.y_.rows() != n || d.y_.cols() < 2 ||
        d.x_.rows() != d.y_.rows() * d.y_.cols() || d.x_.cols() < 1 ||
        static_cast<Eigen::Index>(d.time_start_.size()) != n) {
      fail(errc::invalid_argument,
           "from_arrays: need N >= 1, T >= 2, p >= 1 and matching shapes");
    }
    if (!d.y_.allFinite() || !d.x_.allFinite()) {
      fail(errc::non_numeric_cell, "panel contains non-finite values");
    }
    if (d.x_names_.empty()) {
      for (Eigen::Index j = 0; j < d.x_.cols(); ++j) {
        d.x_names_.push_back("x" + std::to_string(j + 1));
      }
    }
    if (static_cast<Eigen::Index>(d.x_names_.size()) != d.x_.cols()) {
      fail(errc::invalid_argument, "from_arrays: covariate name count");
    }
    return d;
  }

  // Expects header `unit,time,y,x1,...,xp`. Rows may arrive in any order;
  // they are sorted by (unit, time) so shuffled input loads identically.
  static PanelDataset load_csv(std::istream& in);

  void write_csv(std::ostream& out) const {
    out << "unit,time,y";
    for (const auto& name : x_names_) out << ',' << name;
    out << '\n';
    for (int i = 0; i < n_units(); ++i) {
      for (int t = 0; t < n_periods(); ++t) {
        out << unit_ids_[i] << ',' << (time_start_[i] + t) << ','
            << fmt_g17(y_(i, t));
        for (int j = 0; j < n_covariates(); ++j) {
          out << ',' << fmt_g17(x_(flat_index(i, t), j));
        }
        out << '\n';
      }
    }
  }

  int n_units() const { return static_cast<int>(y_.rows()); }
  int n_periods() const { return static_cast<int>(y_.cols()); }
  int n_covariates() const { return static_cast<int>(x_.cols()); }
  std::int64_t n_obs() const {
    return static_cast<std::int64_t>(n_units()) * n_periods();
  }

  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  std::int64_t time_start(int i) const { return time_start_[i]; }
  const std::vector<std::int64_t>& time_starts() const { return time_start_; }

  std::int64_t flat_index(int i, int t) const {
    return static_cast<std::int64_t>(i) * n_periods() + t;
  }

  const Eigen::MatrixXd& y() const { return y_; }
  double y(int i, int t) const { return y_(i, t); }

  // Flat (N*T) x p design; row i*T + t is observation (i, t).
  const Eigen::MatrixXd& x() const { return x_; }
  auto x_row(int i, int t) const { return x_.row(flat_index(i, t)); }

  // Flattened response in the same row order as x().
  Eigen::VectorXd y_flat() const {
    Eigen::VectorXd out(n_obs());
    for (int i = 0; i < n_units(); ++i) {
      for (int t = 0; t < n_periods(); ++t) out[flat_index(i, t)] = y_(i, t);
    }
    return out;
  }

  bool operator==(const PanelDataset& other) const {
    return unit_ids_ == other.unit_ids_ && time_start_ == other.time_start_ &&
           x_names_ == other.x_names_ && y_ == other.y_ && x_ == other.x_;
  }

 private:
  PanelDataset() = default;

  std::vector<std::string> unit_ids_;
  std::vector<std::int64_t> time_start_;
  std::vector<std::string> x_names_;
  Eigen::MatrixXd y_;  // N x T
  Eigen::MatrixXd x_;  // (N*T) x p
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline double parse_double_cell(std::string_view s, std::size_t line_no,
                                std::size_t col) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    fail(errc::non_numeric_cell, "row " + std::to_string(line_no) +
                                     ", column " + std::to_string(col + 1) +
                                     ": not a finite number: '" +
                                     std::string(s) + "'");
  }
  return v;
}

inline std::int64_t parse_time_cell(std::string_view s, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(errc::non_numeric_cell, "row " + std::to_string(line_no) +
                                     ": time label is not an integer: '" +
                                     std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline PanelDataset PanelDataset::load_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    fail(errc::invalid_argument, "empty CSV input");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "unit" || header[1] != "time" ||
      header[2] != "y") {
    fail(errc::invalid_argument,
         "CSV header must be `unit,time,y,x1,...,xp`, got: " + line);
  }
  const std::size_t p = header.size() - 3;
  std::vector<std::string> x_names(header.begin() + 3, header.end());

  struct Row {
    std::int64_t time;
    double y;
    std::vector<double> x;
  };
  std::map<std::string, std::vector<Row>> by_unit;  // sorted unit order
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != p + 3) {
      fail(errc::non_numeric_cell,
           "row " + std::to_string(line_no) + ": expected " +
               std::to_string(p + 3) + " fields, got " +
               std::to_string(fields.size()));
    }
    Row r;
    r.time = detail::parse_time_cell(fields[1], line_no);
    r.y = detail::parse_double_cell(fields[2], line_no, 2);
    r.x.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      r.x[j] = detail::parse_double_cell(fields[3 + j], line_no, 3 + j);
    }
    by_unit[std::string(fields[0])].push_back(std::move(r));
  }
  if (by_unit.empty()) fail(errc::invalid_argument, "CSV has no data rows");

  const std::size_t T = by_unit.begin()->second.size();
  for (auto& [unit, rows] : by_unit) {
    if (rows.size() != T) {
      fail(errc::unbalanced_panel,
           "unit '" + unit + "' has " + std::to_string(rows.size()) +
               " observations, expected " + std::to_string(T));
    }
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.time < b.time; });
    for (std::size_t t = 0; t + 1 < rows.size(); ++t) {
      if (rows[t].time == rows[t + 1].time) {
        fail(errc::duplicate_observation,
             "unit '" + unit + "' has duplicate time " +
                 std::to_string(rows[t].time));
      }
      if (rows[t + 1].time != rows[t].time + 1) {
        fail(errc::non_contiguous_time,
             "unit '" + unit + "' jumps from time " +
                 std::to_string(rows[t].time) + " to " +
                 std::to_string(rows[t + 1].time));
      }
    }
  }
  if (T < 2) fail(errc::invalid_argument, "panel needs T >= 2 periods");

  const int N = static_cast<int>(by_unit.size());
  std::vector<std::string> unit_ids;
  std::vector<std::int64_t> time_start;
  Eigen::MatrixXd y(N, static_cast<Eigen::Index>(T));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(N * T),
                    static_cast<Eigen::Index>(p));
  int i = 0;
  for (auto& [unit, rows] : by_unit) {
    unit_ids.push_back(unit);
    time_start.push_back(rows.front().time);
    for (std::size_t t = 0; t < T; ++t) {
      y(i, static_cast<Eigen::Index>(t)) = rows[t].y;
      for (std::size_t j = 0; j < p; ++j) {
        x(static_cast<Eigen::Index>(i * T + t), static_cast<Eigen::Index>(j)) =
            rows[t].x[j];
      }
    }
    ++i;
  }
  return from_arrays(std::move(unit_ids), std::move(time_start), std::move(y),
                     std::move(x), std::move(x_names));
}

}  // namespace panelqboot
