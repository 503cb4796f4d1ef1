#include "cdn/loss.hpp"

#include <algorithm>
#include <array>

#include "cdn/error.hpp"

namespace cdn::loss {

using nn::Matrix;
using nn::Var;

ClassWeights ClassWeights::uniform(int num_object_classes, int num_action_classes) {
  return {std::vector<double>(static_cast<std::size_t>(num_object_classes) + 1, 1.0),
          std::vector<double>(static_cast<std::size_t>(num_action_classes), 1.0), 1.0};
}

double LayerLoss::weighted_total(const LossWeights& w) const {
  return w.box * box_human + w.box * box_object + w.giou * giou_human + w.giou * giou_object +
         w.interactive * interactive + w.object * object_class + w.action * action_class;
}

namespace {

Matrix box_matrix(std::span<const Target> targets, bool human) {
  Matrix m(static_cast<Eigen::Index>(targets.size()), 4);
  for (std::size_t g = 0; g < targets.size(); ++g) {
    const Box& b = human ? targets[g].human_box : targets[g].object_box;
    m.row(static_cast<Eigen::Index>(g)) << b.cx, b.cy, b.w, b.h;
  }
  return m;
}

}  // namespace

LossResult compute_loss(const model::PairDetections& pairs, const model::ActionLogits& actions,
                        std::span<const Target> targets, const Assignment& assignment,
                        const LossWeights& weights, const ClassWeights& class_weights) {
  if (pairs.layers.empty() || actions.layers.empty()) throw ShapeError("compute_loss: no layers");
  const auto& final_pairs = pairs.final_layer();
  const auto n_q = final_pairs.object_logits.rows();
  const auto n_obj = final_pairs.object_logits.cols();  // C_o + 1
  const auto n_act = actions.final_layer().cols();
  if (static_cast<Eigen::Index>(class_weights.object.size()) != n_obj) {
    throw ShapeError("compute_loss: object weight vector has " +
                     std::to_string(class_weights.object.size()) + " entries, expected " +
                     std::to_string(n_obj));
  }
  if (static_cast<Eigen::Index>(class_weights.action.size()) != n_act) {
    throw ShapeError("compute_loss: action weight vector has " +
                     std::to_string(class_weights.action.size()) + " entries, expected " +
                     std::to_string(n_act));
  }
  if (assignment.gt_to_query.size() != targets.size()) {
    throw ShapeError("compute_loss: assignment does not cover the targets");
  }

  // Targets shared by every layer.
  const auto n_gt = static_cast<double>(targets.size());
  std::vector<int> matched_queries = assignment.gt_to_query;
  std::vector<int> object_target(static_cast<std::size_t>(n_q), static_cast<int>(n_obj - 1));
  Matrix interactive_target = Matrix::Zero(n_q, 1);
  Matrix action_target = Matrix::Zero(n_q, n_act);
  for (std::size_t g = 0; g < targets.size(); ++g) {
    const int q = matched_queries[g];
    if (q < 0 || q >= n_q) throw ShapeError("compute_loss: assignment query out of range");
    object_target[static_cast<std::size_t>(q)] = targets[g].object_class;
    interactive_target(q, 0) = 1.0;
    for (int a : targets[g].actions) action_target(q, a) = 1.0;
  }
  std::vector<double> object_row_weight(static_cast<std::size_t>(n_q));
  for (Eigen::Index q = 0; q < n_q; ++q) {
    object_row_weight[static_cast<std::size_t>(q)] =
        class_weights.object[static_cast<std::size_t>(object_target[static_cast<std::size_t>(q)])];
  }
  Matrix action_weight(n_q, n_act);
  for (Eigen::Index q = 0; q < n_q; ++q) {
    for (Eigen::Index a = 0; a < n_act; ++a) {
      action_weight(q, a) = action_target(q, a) > 0.0
                                ? class_weights.action[static_cast<std::size_t>(a)]
                                : class_weights.action_background;
    }
  }
  const double n_pos = std::max(1.0, action_target.sum());
  const Matrix human_target = box_matrix(targets, true);
  const Matrix object_box_target = box_matrix(targets, false);
  const Matrix ones_q = Matrix::Ones(n_q, 1);

  const std::array<double, 7> coefs{weights.box,         weights.box,    weights.giou,
                                    weights.giou,        weights.interactive,
                                    weights.object,      weights.action};

  const auto depth_ho = pairs.layers.size();
  const auto depth_int = actions.layers.size();
  const auto records = std::max(depth_ho, depth_int);

  LossResult result;
  std::vector<Var> layer_totals;
  for (std::size_t l = 0; l < records; ++l) {
    const auto& p = pairs.layers[std::min(l, depth_ho - 1)];
    const Var& act = actions.layers[std::min(l, depth_int - 1)];

    Var box_h, box_o, giou_h, giou_o;
    if (targets.empty()) {
      box_h = box_o = giou_h = giou_o = nn::constant(Matrix::Zero(1, 1));
    } else {
      const Var ph = nn::gather_rows(p.human_boxes, matched_queries);
      const Var po = nn::gather_rows(p.object_boxes, matched_queries);
      box_h = nn::l1_loss(ph, human_target, n_gt);
      box_o = nn::l1_loss(po, object_box_target, n_gt);
      giou_h = nn::giou_loss(ph, human_target, n_gt);
      giou_o = nn::giou_loss(po, object_box_target, n_gt);
    }
    const Var inter = nn::bce_with_logits(p.interactive_logits, interactive_target, ones_q,
                                          static_cast<double>(n_q));
    const Var obj = nn::softmax_cross_entropy(p.object_logits, object_target, object_row_weight,
                                              static_cast<double>(n_q));
    const Var actl = nn::bce_with_logits(act, action_target, action_weight, n_pos);

    // Same order as LayerLoss::weighted_total, so the stored total is exact.
    const std::array<Var, 7> terms{box_h, box_o, giou_h, giou_o, inter, obj, actl};
    Var total = nn::weighted_sum(terms, coefs);

    LayerLoss rec;
    rec.box_human = box_h.item();
    rec.box_object = box_o.item();
    rec.giou_human = giou_h.item();
    rec.giou_object = giou_o.item();
    rec.interactive = inter.item();
    rec.object_class = obj.item();
    rec.action_class = actl.item();
    rec.total = total.item();
    result.breakdown.layers.push_back(rec);
    layer_totals.push_back(std::move(total));
  }
  const std::vector<double> mean_coefs(layer_totals.size(), 1.0 / static_cast<double>(records));
  result.total = nn::weighted_sum(layer_totals, mean_coefs);
  result.breakdown.total = result.total.item();
  return result;
}

}  // namespace cdn::loss
