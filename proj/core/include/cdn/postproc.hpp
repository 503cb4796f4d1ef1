#pragma once

#include <string>
#include <vector>

#include "cdn/autograd.hpp"
#include "cdn/dataio.hpp"
#include "cdn/geometry.hpp"

namespace cdn::postproc {

/// One (query, action) candidate. score = action_score * object_score *
/// interactive_score.
struct ScoredTriplet {
  Box human_box;
  Box object_box;
  int query = 0;
  int object_class = 0;
  int action = 0;
  double score = 0.0;
  double action_score = 0.0;
  double object_score = 0.0;
  double interactive_score = 0.0;

  friend bool operator==(const ScoredTriplet&, const ScoredTriplet&) = default;
};

struct PnmsConfig {
  double alpha = 1.0;
  double beta = 0.5;
  double threshold = 0.7;
  int top_k = 100;
  /// Keep only each query's best action.
  bool argmax_only = false;
  /// Suppress across object/action classes instead of within them.
  bool class_agnostic = false;
  /// When false, inference ranks and truncates to top_k without suppression.
  bool enabled = true;

  void validate() const;
  friend bool operator==(const PnmsConfig&, const PnmsConfig&) = default;
};

/// Final-layer head outputs of one image as plain values.
struct HeadValues {
  nn::Matrix human_boxes;         // (N_d, 4) sigmoid cx, cy, w, h
  nn::Matrix object_boxes;        // (N_d, 4)
  nn::Matrix object_logits;       // (N_d, C_o + 1)
  nn::Matrix interactive_logits;  // (N_d, 1)
  nn::Matrix action_logits;       // (N_d, C_a)
};

/// One triplet per (query, action) in query-major order, or one per query
/// when `argmax_only`. The object score is the best non-background softmax
/// probability. Throws ShapeError when the head outputs are misaligned.
std::vector<ScoredTriplet> compose_triplets(const HeadValues& heads, bool argmax_only = false);

/// iou(human)^alpha * iou(object)^beta, with 0^0 = 1.
double piou(const ScoredTriplet& m, const ScoredTriplet& n, double alpha, double beta);

/// Stable sort by score (descending), truncate to top_k, then greedy
/// suppression of any triplet whose PIoU with a kept, higher-ranked
/// triplet of the same (object, action) group exceeds the threshold.
std::vector<ScoredTriplet> pnms(std::vector<ScoredTriplet> triplets, const PnmsConfig& config);

/// Ranking and (optional) suppression as configured, without composing.
std::vector<ScoredTriplet> select(std::vector<ScoredTriplet> triplets, const PnmsConfig& config);

/// Full per-image post-processing. Returns one prediction record per
/// surviving query, in order of its best surviving triplet; `actions` lists
/// the surviving action ids. Boxes are converted to pixel corners.
std::vector<data::HoiInstance> predict_image(const HeadValues& heads, const PnmsConfig& config,
                                             const std::string& image_id, int width, int height);

}  // namespace cdn::postproc
