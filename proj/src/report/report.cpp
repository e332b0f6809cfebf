#include "re2re/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "re2re/error.hpp"

namespace re2re {

namespace {

std::string fixed(double v, int decimals) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // Avoid printing "-0.00".
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

const MetricsRow* MetricsReport::find(const std::string& method, const std::string& condition) const {
  for (const auto& r : rows)
    if (r.method == method && r.condition == condition) return &r;
  return nullptr;
}

void MetricsReport::append(const MetricsReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

std::string MetricsReport::to_csv() const {
  std::string out = "method,condition,metric,mean,std,n\n";
  for (const auto& r : rows) {
    out += csv_field(r.method) + "," + csv_field(r.condition) + "," + csv_field(r.metric) + "," + fixed(r.mean, 6) +
           "," + (r.std ? fixed(*r.std, 6) : "") + "," + std::to_string(r.n) + "\n";
  }
  return out;
}

std::string MetricsReport::to_table() const {
  std::size_t wm = 6, wc = 9;
  for (const auto& r : rows) {
    wm = std::max(wm, r.method.size());
    wc = std::max(wc, r.condition.size());
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, s.size()), ' '); };
  auto rpad = [](const std::string& s, std::size_t w) { return std::string(w - std::min(w, s.size()), ' ') + s; };
  std::ostringstream os;
  os << pad("method", wm) << "  " << pad("condition", wc) << "  " << rpad("SI-SDR [dB]", 18) << "  " << rpad("n", 4)
     << "\n";
  os << std::string(wm + wc + 18 + 4 + 6, '-') << "\n";
  for (const auto& r : rows) {
    std::string value = format_db(r.mean);
    if (r.std) value += " +- " + format_db(*r.std);
    os << pad(r.method, wm) << "  " << pad(r.condition, wc) << "  " << rpad(value, 18) << "  "
       << rpad(std::to_string(r.n), 4) << "\n";
  }
  return os.str();
}

std::optional<double> sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

MetricsRow summarize(std::string method, std::string condition, const std::vector<double>& values) {
  require(!values.empty(), "summarize: no values for " + method + "/" + condition);
  MetricsRow row;
  row.method = std::move(method);
  row.condition = std::move(condition);
  row.n = values.size();
  const bool perfect = std::any_of(values.begin(), values.end(), [](double v) { return std::isinf(v) && v > 0; });
  if (perfect) {
    row.mean = std::numeric_limits<double>::infinity();
    return row;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  row.mean = sum / static_cast<double>(values.size());
  row.std = sample_std(values);
  return row;
}

std::string format_db(double value) { return fixed(value, 2); }

}  // namespace re2re
