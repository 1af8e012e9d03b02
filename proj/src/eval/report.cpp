#include "wstan/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "wstan/error.hpp"

namespace wstan::eval {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void MetricsReport::add(std::string metric, std::size_t k, std::optional<double> iou,
                        double value) {
  rows.push_back({std::move(metric), k, iou, value});
}

double MetricsReport::value(const std::string& metric, std::size_t k,
                            std::optional<double> iou) const {
  for (const auto& r : rows) {
    if (r.metric != metric || r.k != k || r.iou.has_value() != iou.has_value()) continue;
    if (iou && std::abs(*r.iou - *iou) > 1e-12) continue;
    return r.value;
  }
  throw PreconditionError("metric " + metric + "@" + std::to_string(k) + " not in report");
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "metric,k,iou,value\n";
  for (const auto& r : rows)
    os << r.metric << ',' << r.k << ',' << (r.iou ? fixed(*r.iou, 2) : std::string())
       << ',' << fixed(r.value, 4) << '\n';
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["samples"] = samples;
  j["fingerprint"] = fingerprint;
  j["notes"] = notes;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["metric"] = r.metric;
    row["k"] = r.k;
    row["iou"] = r.iou ? nlohmann::ordered_json(*r.iou) : nlohmann::ordered_json(nullptr);
    row["value"] = r.value;
    arr.push_back(std::move(row));
  }
  j["metrics"] = std::move(arr);
  return j.dump(2) + "\n";
}

void MetricsReport::write(const std::filesystem::path& csv_path,
                          const std::filesystem::path& json_path) const {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write metrics: " + csv_path.string());
  csv << to_csv();
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw IoError("cannot write metrics: " + json_path.string());
  js << to_json();
}

}  // namespace wstan::eval
