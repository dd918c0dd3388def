/**
 * @file log.hpp
 * @brief Run logging: a fixed-schema CSV of per-step quantities, written in
 *        locale-independent shortest-round-trip decimal form so identical
 *        runs produce byte-identical files.
 */
#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "semidyn/common.hpp"

namespace semidyn {

/// Shortest decimal form that parses back to the exact same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) {
    throw ContractViolation("format_double: conversion failed");
  }
  return std::string(buf, res.ptr);
}

/// One logged control step.
struct LogRow {
  double t = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd q_d;
  Eigen::VectorXd dq;
  Eigen::VectorXd dq_d;
  Eigen::VectorXd tau_meas;
  Eigen::VectorXd tau_param;
  Eigen::VectorXd tau_np;
  Eigen::VectorXd tau_fb;
  int n_components = 0;
};

/**
 * Streams LogRows to a CSV file. Column layout (for n joints):
 *   t, q_1..q_n, q_d_1..q_d_n, dq_1..dq_n, dq_d_1..dq_d_n,
 *   tau_meas_1..n, tau_param_1..n, tau_np_1..n, tau_fb_1..n, n_components
 * Timestamps must be strictly increasing.
 */
class RunLogWriter {
 public:
  RunLogWriter(const std::string& path, int dof) : out_(path), dof_(dof) {
    if (dof <= 0) {
      throw ContractViolation("RunLogWriter: dof must be positive");
    }
    if (!out_) {
      throw ContractViolation("RunLogWriter: cannot open " + path);
    }
    out_ << header(dof) << "\n";
  }

  static std::string header(int dof) {
    std::ostringstream h;
    h << "t";
    const char* groups[] = {"q",         "q_d",    "dq",     "dq_d",
                            "tau_meas",  "tau_param", "tau_np", "tau_fb"};
    for (const char* g : groups) {
      for (int j = 1; j <= dof; ++j) h << "," << g << "_" << j;
    }
    h << ",n_components";
    return h.str();
  }

  void append(const LogRow& row) {
    const Eigen::VectorXd* vecs[] = {&row.q,        &row.q_d,       &row.dq,
                                     &row.dq_d,     &row.tau_meas,  &row.tau_param,
                                     &row.tau_np,   &row.tau_fb};
    for (const auto* v : vecs) {
      if (v->size() != dof_) {
        throw ContractViolation("RunLogWriter::append: row dimension mismatch");
      }
    }
    if (has_rows_ && !(row.t > last_t_)) {
      throw ContractViolation("RunLogWriter::append: timestamps must increase");
    }
    out_ << format_double(row.t);
    for (const auto* v : vecs) {
      for (int j = 0; j < dof_; ++j) out_ << "," << format_double((*v)[j]);
    }
    out_ << "," << row.n_components << "\n";
    last_t_ = row.t;
    has_rows_ = true;
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  int dof_;
  double last_t_ = 0.0;
  bool has_rows_ = false;
};

/// Reads a run log back; the joint count is inferred from the header.
inline std::vector<LogRow> read_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ContractViolation("read_run_log: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ContractViolation("read_run_log: empty file");
  }
  long columns = 1;
  for (char c : line) {
    if (c == ',') ++columns;
  }
  // 1 (t) + 8 groups of n + 1 (component count)
  const long dof = (columns - 2) / 8;
  if (dof < 1 || columns != 2 + 8 * dof) {
    throw ContractViolation("read_run_log: unrecognized column count");
  }

  std::vector<LogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LogRow row;
    Eigen::VectorXd* vecs[] = {&row.q,        &row.q_d,       &row.dq,
                               &row.dq_d,     &row.tau_meas,  &row.tau_param,
                               &row.tau_np,   &row.tau_fb};
    for (auto* v : vecs) v->resize(dof);
    std::size_t pos = 0;
    const auto next_field = [&]() {
      const std::size_t comma = line.find(',', pos);
      const std::string field = line.substr(pos, comma - pos);
      pos = (comma == std::string::npos) ? line.size() : comma + 1;
      return field;
    };
    const auto parse_double = [&](const std::string& f) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc()) {
        throw ContractViolation("read_run_log: bad numeric field '" + f + "'");
      }
      return v;
    };
    row.t = parse_double(next_field());
    for (auto* v : vecs) {
      for (long j = 0; j < dof; ++j) (*v)[j] = parse_double(next_field());
    }
    row.n_components = static_cast<int>(parse_double(next_field()));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace semidyn
