#pragma once

#include <xmc/error.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace xmc::eval {

inline std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Named scalar results of one evaluation task. Metrics keep insertion order;
// an undefined metric is recorded as absent rather than as a number.
struct MetricsReport {
  std::string task;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<std::pair<std::string, std::optional<double>>> metrics;

  void set(const std::string& name, double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("metric '" + name + "' is not finite");
    put(name, value);
  }
  void set(const std::string& name, std::optional<double> value) {
    if (value) set(name, *value);
    else mark_absent(name);
  }
  void mark_absent(const std::string& name) { put(name, std::nullopt); }

  std::optional<double> get(const std::string& name) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return v;
    return std::nullopt;
  }
  bool has(const std::string& name) const { return get(name).has_value(); }

  // key=value lines: task, seed, config_digest, then the metrics
  std::string to_text() const {
    std::string out = "task=" + task + "\nseed=" + std::to_string(seed) + "\nconfig_digest=" + config_digest + "\n";
    for (const auto& [k, v] : metrics) out += k + "=" + (v ? format_number(*v) : std::string("absent")) + "\n";
    return out;
  }

  std::string csv_header() const {
    std::string out = "task,seed,config_digest";
    for (const auto& [k, v] : metrics) out += "," + k;
    return out;
  }
  std::string csv_row() const {
    std::string out = task + "," + std::to_string(seed) + "," + config_digest;
    for (const auto& [k, v] : metrics) out += "," + (v ? format_number(*v) : std::string("absent"));
    return out;
  }

  void write(const std::string& stem) const {
    auto dump = [](const std::string& path, const std::string& body) {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open '" + path + "' for writing");
      out << body;
      if (!out) throw IoError("write failed for '" + path + "'");
    };
    dump(stem + ".txt", to_text());
    dump(stem + ".csv", csv_header() + "\n" + csv_row() + "\n");
  }

 private:
  void put(const std::string& name, std::optional<double> v) {
    for (auto& [k, old] : metrics)
      if (k == name) {
        old = v;
        return;
      }
    metrics.emplace_back(name, v);
  }
};

}  // namespace xmc::eval
