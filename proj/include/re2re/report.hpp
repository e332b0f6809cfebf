#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace re2re {

struct MetricsRow {
  std::string method;
  std::string condition;
  std::string metric = "si_sdr_db";
  double mean = 0.0;
  std::optional<double> std;  // only when n >= 2
  std::size_t n = 0;
  std::vector<std::uint64_t> trial_seeds;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;

  const MetricsRow* find(const std::string& method, const std::string& condition) const;
  void append(const MetricsReport& other);

  /// Header "method,condition,metric,mean,std,n"; std empty for n < 2.
  std::string to_csv() const;
  /// Fixed-width table, dB values with two decimals.
  std::string to_table() const;
};

/// Unbiased (n - 1) standard deviation; nullopt below two values.
std::optional<double> sample_std(const std::vector<double>& values);

/// Summary of a list of dB values. Any perfect (+inf) value makes the mean
/// +inf and drops the std.
MetricsRow summarize(std::string method, std::string condition, const std::vector<double>& values);

std::string format_db(double value);

}  // namespace re2re
