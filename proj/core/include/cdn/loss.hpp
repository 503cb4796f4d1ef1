#pragma once

#include <span>
#include <vector>

#include "cdn/autograd.hpp"
#include "cdn/decoders.hpp"
#include "cdn/matching.hpp"

namespace cdn::loss {

using matching::Assignment;
using matching::LossWeights;
using matching::Target;

/// Per-class multipliers for the two classification losses.
struct ClassWeights {
  std::vector<double> object;  // C_o + 1, the last entry is "no object"
  std::vector<double> action;  // C_a, applied to positive labels
  double action_background = 1.0;  // applied to negative labels

  static ClassWeights uniform(int num_object_classes, int num_action_classes);
};

/// The terms of one decoder layer and their weighted total.
struct LayerLoss {
  double box_human = 0.0;
  double box_object = 0.0;
  double giou_human = 0.0;
  double giou_object = 0.0;
  double interactive = 0.0;
  double object_class = 0.0;
  double action_class = 0.0;
  double total = 0.0;

  /// Weighted total recomputed from the stored terms.
  double weighted_total(const LossWeights& w) const;
};

struct LossBreakdown {
  std::vector<LayerLoss> layers;
  double total = 0.0;  // mean of the layer totals
};

struct LossResult {
  LossBreakdown breakdown;
  nn::Var total;
};

/// Set loss for one image. Every layer of both decoders is supervised with
/// the same (final-layer) assignment; layer records pair HO-PD layer l with
/// interaction layer l, reusing the last layer of the shallower decoder.
///
/// Box terms are summed over matched pairs and divided by the GT count.
/// The object term is softmax cross-entropy over all queries (unmatched
/// queries target "no object") scaled by the target's class weight and
/// divided by N_d. The action term is per-class binary cross-entropy,
/// positive labels weighted by their class weight and negatives by the
/// background weight, divided by the number of positive labels (at least
/// one). The interactive term is mean binary cross-entropy with matched
/// queries labelled 1. Throws ShapeError on weight-vector length mismatch.
LossResult compute_loss(const model::PairDetections& pairs, const model::ActionLogits& actions,
                        std::span<const Target> targets, const Assignment& assignment,
                        const LossWeights& weights, const ClassWeights& class_weights);

}  // namespace cdn::loss
