#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mapnet/model.hpp"
#include "mapnet/sample.hpp"

namespace mapnet {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  [[nodiscard]] std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// nullopt marks a metric whose denominator is zero.
struct MetricScores {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> iou;
};

// Positive iff prob > threshold. threshold must lie strictly inside (0,1).
template <typename T>
ConfusionCounts confusion_counts(const Tensor<T>& prob, const Tensor<T>& truth, double threshold);

MetricScores scores(const ConfusionCounts& c);

struct Evaluation {
  ConfusionCounts counts;
  MetricScores scores;
};

// Micro aggregation: one set of counts over every pixel of every tile,
// from infer-mode forward passes one tile at a time.
template <typename T>
Evaluation evaluate_dataset(Model<T>& model, const std::vector<Sample>& tiles, double threshold);

std::string report_header();
// One CSV row; undefined scores print as "undefined".
std::string report_row(const std::string& variant, double threshold, const Evaluation& e);

}  // namespace mapnet
