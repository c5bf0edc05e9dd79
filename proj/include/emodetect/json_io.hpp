#pragma once

#include <json.hpp>

#include "emodetect/evalkit.hpp"

namespace emodetect::json_io {

inline nlohmann::json metrics_to_json(const evalkit::MetricsReport& report) {
  nlohmann::json out;
  out["precision"] = report.precision;
  out["recall"] = report.recall;
  out["f1"] = report.f1;
  out["accuracy"] = report.accuracy;
  if (report.f1_micro) out["f1_micro"] = *report.f1_micro;
  out["positive_class"] = report.positive_class;
  out["n"] = report.n;
  if (report.precision_undefined) out["precision_undefined"] = true;
  if (report.recall_undefined) out["recall_undefined"] = true;
  if (report.f1_undefined) out["f1_undefined"] = true;
  return out;
}

inline evalkit::MetricsReport metrics_from_json(const nlohmann::json& in) {
  evalkit::MetricsReport report;
  report.precision = in.value("precision", 0.0);
  report.recall = in.value("recall", 0.0);
  report.f1 = in.value("f1", 0.0);
  report.accuracy = in.value("accuracy", 0.0);
  if (in.contains("f1_micro")) report.f1_micro = in.at("f1_micro").get<double>();
  report.positive_class = in.value("positive_class", "");
  report.n = in.value("n", std::size_t{0});
  report.precision_undefined = in.value("precision_undefined", false);
  report.recall_undefined = in.value("recall_undefined", false);
  report.f1_undefined = in.value("f1_undefined", false);
  return report;
}

inline nlohmann::json metric_vector_to_json(const evalkit::MetricVector& vec) {
  nlohmann::json out;
  out["precision"] = vec.precision;
  out["recall"] = vec.recall;
  out["f1"] = vec.f1;
  out["accuracy"] = vec.accuracy;
  if (vec.f1_micro) out["f1_micro"] = *vec.f1_micro;
  return out;
}

inline evalkit::MetricVector metric_vector_from_json(const nlohmann::json& in) {
  evalkit::MetricVector vec;
  vec.precision = in.value("precision", 0.0);
  vec.recall = in.value("recall", 0.0);
  vec.f1 = in.value("f1", 0.0);
  vec.accuracy = in.value("accuracy", 0.0);
  if (in.contains("f1_micro")) vec.f1_micro = in.at("f1_micro").get<double>();
  return vec;
}

}  // namespace emodetect::json_io
