#include "astr/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "astr/error.hpp"

namespace astr::metrics {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require_same(const Tensor& pred, const Tensor& gt, const char* op) {
  if (pred.shape() != gt.shape()) {
    throw DimensionError(std::string(op) + ": prediction " + shape_string(pred.shape()) +
                         " and ground truth " + shape_string(gt.shape()) + " differ");
  }
}

}  // namespace

ConfusionCounts confusion_counts(const Tensor& pred_prob, const Tensor& gt, double threshold) {
  require_same(pred_prob, gt, "confusion_counts");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = pred_prob[i] >= threshold;
    const bool g = gt[i] > 0.5;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double dice_from_counts(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }
double iou_from_counts(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }
double sensitivity_from_counts(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
double specificity_from_counts(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }

MetricReport frame_metrics(const Tensor& pred_prob, const Tensor& gt, MaeMode mae_mode, double threshold) {
  MetricReport r;
  r.counts = confusion_counts(pred_prob, gt, threshold);
  r.dice = dice_from_counts(r.counts);
  r.iou = iou_from_counts(r.counts);
  r.sen = sensitivity_from_counts(r.counts);
  r.spe = specificity_from_counts(r.counts);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double p = mae_mode == MaeMode::continuous ? pred_prob[i] : (pred_prob[i] >= threshold ? 1.0 : 0.0);
    sum += std::abs(p - gt[i]);
  }
  r.mae = sum / static_cast<double>(gt.size());
  return r;
}

MetricReport dataset_metrics(std::span<const MetricReport> per_frame) {
  if (per_frame.empty()) throw ParameterError("dataset_metrics: no frames");
  MetricReport r;
  for (const auto& f : per_frame) {
    r.mae += f.mae;
    r.iou += f.iou;
    r.dice += f.dice;
    r.sen += f.sen;
    r.spe += f.spe;
    r.fps += f.fps;
    r.counts.tp += f.counts.tp;
    r.counts.fp += f.counts.fp;
    r.counts.tn += f.counts.tn;
    r.counts.fn += f.counts.fn;
  }
  const double n = static_cast<double>(per_frame.size());
  r.mae /= n;
  r.iou /= n;
  r.dice /= n;
  r.sen /= n;
  r.spe /= n;
  r.fps /= n;
  return r;
}

FpsMeasurement measure_fps(const ClipProcessor& forward, std::span<const model::VideoClip> clips,
                           std::size_t warmup, std::size_t reps) {
  if (reps < 1) throw ParameterError("measure_fps: reps must be >= 1");
  using clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < warmup; ++i)
    for (const auto& clip : clips) forward(clip);

  std::vector<double> seconds;
  seconds.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto start = clock::now();
    for (const auto& clip : clips) forward(clip);
    seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
  }
  std::sort(seconds.begin(), seconds.end());
  const std::size_t mid = seconds.size() / 2;
  const double median = seconds.size() % 2 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);

  FpsMeasurement m;
  m.median_seconds = median;
  m.frames_per_rep = clips.size();
  m.reps = reps;
  // A pass faster than the clock resolution still reports a finite rate.
  const double floor = std::chrono::duration<double>(clock::duration(1)).count();
  m.fps = static_cast<double>(clips.size()) / std::max(median, floor);
  return m;
}

}  // namespace astr::metrics
