#include "mapnet/metrics.hpp"

#include <cstdio>

#include "mapnet/errors.hpp"

namespace mapnet {

template <typename T>
ConfusionCounts confusion_counts(const Tensor<T>& prob, const Tensor<T>& truth, double threshold) {
  if (prob.shape() != truth.shape()) {
    throw ShapeError("confusion_counts: prob " + prob.shape().str() + " vs truth " + truth.shape().str());
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie strictly between 0 and 1, got " + std::to_string(threshold));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const bool pred = static_cast<double>(prob[i]) > threshold;
    const bool pos = truth[i] > T{0.5};
    if (pred && pos) ++c.tp;
    else if (pred) ++c.fp;
    else if (pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricScores scores(const ConfusionCounts& c) {
  MetricScores s;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) s.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) s.recall = tp / static_cast<double>(c.tp + c.fn);
  if (s.precision && s.recall) {
    const double p = *s.precision, r = *s.recall;
    if (p + r > 0) s.f1 = 2 * p * r / (p + r);
    if (p + r - p * r > 0) s.iou = p * r / (p + r - p * r);
  }
  return s;
}

template <typename T>
Evaluation evaluate_dataset(Model<T>& model, const std::vector<Sample>& tiles, double threshold) {
  if (tiles.empty()) throw UsageError("evaluate_dataset: no tiles to evaluate");
  Evaluation e;
  for (const Sample& s : tiles) {
    const Tensor<T> prob = model.predict(tensor_cast<T>(s.image));
    e.counts += confusion_counts(prob, tensor_cast<T>(s.mask), threshold);
  }
  e.scores = scores(e.counts);
  return e;
}

std::string report_header() { return "variant,threshold,tp,fp,tn,fn,precision,recall,f1,iou"; }

std::string report_row(const std::string& variant, double threshold, const Evaluation& e) {
  auto num = [](std::optional<double> v) {
    if (!v) return std::string("undefined");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  char thr[32];
  std::snprintf(thr, sizeof thr, "%g", threshold);
  const auto& c = e.counts;
  return variant + "," + thr + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," +
         std::to_string(c.tn) + "," + std::to_string(c.fn) + "," + num(e.scores.precision) + "," +
         num(e.scores.recall) + "," + num(e.scores.f1) + "," + num(e.scores.iou);
}

template ConfusionCounts confusion_counts(const Tensor<float>&, const Tensor<float>&, double);
template ConfusionCounts confusion_counts(const Tensor<double>&, const Tensor<double>&, double);
template Evaluation evaluate_dataset(Model<float>&, const std::vector<Sample>&, double);
template Evaluation evaluate_dataset(Model<double>&, const std::vector<Sample>&, double);

}  // namespace mapnet
