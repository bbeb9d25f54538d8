#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sfuse/pose.hpp"

namespace sfuse {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip-exact decimal form of a double. All CSV output goes
/// through this so reruns are byte-identical and parsing loses nothing.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), n_cols_(columns.size()) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != n_cols_) throw IoError("csv row width mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << '\n';
  }

  void raw_row(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_) throw IoError("csv row width mismatch");
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  size_t n_cols_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }

  double number(size_t row, int col) const {
    return std::stod(rows[row][static_cast<size_t>(col)]);
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.columns = split_csv_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != table.columns.size())
      throw IoError("ragged csv row in " + path);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

inline const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> cols = {"t",  "px", "py", "pz",
                                                "qw", "qx", "qy", "qz"};
  return cols;
}

inline void write_trajectory_csv(const std::string& path,
                                 std::span<const TrajectorySample> traj) {
  CsvWriter w(path, trajectory_columns());
  for (const auto& s : traj) {
    const Quat& q = s.pose.orientation;
    w.row({s.t, s.pose.position.x(), s.pose.position.y(), s.pose.position.z(),
           q.w(), q.x(), q.y(), q.z()});
  }
}

inline std::vector<TrajectorySample> read_trajectory_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.columns != trajectory_columns())
    throw IoError("trajectory csv header mismatch in " + path);
  std::vector<TrajectorySample> traj;
  traj.reserve(t.rows.size());
  double prev_t = -1.0;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    TrajectorySample s;
    s.t = t.number(r, 0);
    if (s.t < 0.0 || s.t <= prev_t)
      throw IoError("trajectory times must be non-negative and strictly increasing: " + path);
    prev_t = s.t;
    s.pose = Pose6D(Vec3(t.number(r, 1), t.number(r, 2), t.number(r, 3)),
                    Quat(t.number(r, 4), t.number(r, 5), t.number(r, 6),
                         t.number(r, 7)));
    traj.push_back(s);
  }
  return traj;
}

} // namespace sfuse
