#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wstan::eval {

struct MetricRow {
  std::string metric;            // "R", "mIoU", "DiDeMo-Rank", "random-R"
  std::size_t k = 1;
  std::optional<double> iou;     // unset for metrics without a threshold
  double value = 0.0;            // percentage
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  std::size_t samples = 0;
  std::string fingerprint;
  std::vector<std::string> notes;

  void add(std::string metric, std::size_t k, std::optional<double> iou, double value);
  /// Throws PreconditionError when absent.
  double value(const std::string& metric, std::size_t k,
               std::optional<double> iou = std::nullopt) const;

  /// CSV with header metric,k,iou,value.
  std::string to_csv() const;
  std::string to_json() const;
  void write(const std::filesystem::path& csv_path,
             const std::filesystem::path& json_path) const;
};

}  // namespace wstan::eval
