#pragma once

#include <span>
#include <vector>

#include "cdn/autograd.hpp"
#include "cdn/geometry.hpp"

namespace cdn::matching {

/// Loss and matching-cost coefficients: box L1, GIoU, interactive score,
/// object class, action class.
struct LossWeights {
  double box = 2.5;
  double giou = 1.0;
  double interactive = 1.0;
  double object = 1.0;
  double action = 1.0;

  /// Throws ConfigError on a negative weight.
  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Model-side ground truth: normalized boxes.
struct Target {
  Box human_box;
  Box object_box;
  int object_class = 0;
  std::vector<int> actions;
};

/// Injective ground truth -> query map.
struct Assignment {
  std::vector<int> gt_to_query;
  std::vector<int> unmatched_queries;
  double cost = 0.0;
};

/// Final-layer predictions from both decoders, as plain values.
struct PredictionView {
  const nn::Matrix& human_boxes;
  const nn::Matrix& object_boxes;
  const nn::Matrix& object_logits;       // (N_d, C_o + 1)
  const nn::Matrix& interactive_logits;  // (N_d, 1)
  const nn::Matrix& action_logits;       // (N_d, C_a)
};

/// (#GT x N_d) matching cost: box L1 and (1 - GIoU) over both boxes, minus
/// the GT object-class probability, minus the mean sigmoid probability of
/// the GT actions, minus the interactive probability, each scaled by its
/// weight. Throws std::invalid_argument when there are no targets.
nn::Matrix build_cost_matrix(const PredictionView& pred, std::span<const Target> targets,
                             const LossWeights& weights);

/// Minimum-cost assignment of every row to a distinct column (rows <=
/// columns). Throws std::invalid_argument when rows > columns.
Assignment hungarian_match(const nn::Matrix& cost);

}  // namespace cdn::matching
