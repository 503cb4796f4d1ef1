#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cdn/dataio.hpp"
#include "cdn/geometry.hpp"

namespace cdn::eval {

/// Minimum IoU (exclusive) required on both the human and the object box.
inline constexpr double kIouThreshold = 0.5;

struct PairBoxes {
  Corners human;
  Corners object;
};

/// TP/FP flags for one image and one HOI class. `detections` must already
/// be sorted by descending score. A detection is a TP when an unclaimed GT
/// has both IoUs above the threshold; among several such GTs the one with
/// the larger min(iou_h, iou_o) is claimed, then the lower index.
std::vector<bool> match_to_gt(std::span<const PairBoxes> detections,
                              std::span<const PairBoxes> ground_truth);

struct PrCurve {
  std::vector<double> precision;
  std::vector<double> recall;
};

/// All-point interpolated AP (area under the monotone precision envelope).
/// Detections are ranked by score, ties kept in input order. Returns 0 when
/// num_gt is 0.
double average_precision(const std::vector<bool>& flags, std::span<const double> scores,
                         std::int64_t num_gt, PrCurve* curve = nullptr);

struct ClassResult {
  int object_class = 0;
  int action = 0;
  bool rare = false;
  std::int64_t num_gt = 0;
  double ap = 0.0;
  PrCurve curve;
};

/// Means are over classes with at least one GT; an empty subset reports 0.
struct EvalResult {
  std::vector<ClassResult> classes;
  double map_full = 0.0;
  double map_rare = 0.0;
  double map_nonrare = 0.0;
  int num_full = 0;
  int num_rare = 0;
  int num_nonrare = 0;
};

/// Default-setting mAP. Throws std::invalid_argument when the three inputs
/// disagree on the vocabulary.
EvalResult evaluate(const data::PredictionSet& predictions, const data::AnnotationSet& ground_truth,
                    const data::HoiClassTable& classes);

/// File front end; vocabulary mismatches are reported as DataError.
EvalResult evaluate_files(const std::filesystem::path& predictions,
                          const std::filesystem::path& ground_truth,
                          const std::filesystem::path& classes);

/// Plain-text report: a Full / Rare / Non-Rare table then per-class AP.
std::string format_report(const EvalResult& result);
void write_report(const std::filesystem::path& path, const EvalResult& result);

}  // namespace cdn::eval
