#include "cdn/matching.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cdn/error.hpp"

namespace cdn::matching {

void LossWeights::validate() const {
  for (double w : {box, giou, interactive, object, action}) {
    if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
  }
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Box row_box(const nn::Matrix& m, Eigen::Index r) { return {m(r, 0), m(r, 1), m(r, 2), m(r, 3)}; }

}  // namespace

nn::Matrix build_cost_matrix(const PredictionView& pred, std::span<const Target> targets,
                             const LossWeights& weights) {
  if (targets.empty()) throw std::invalid_argument("build_cost_matrix: no ground truth");
  const auto n_q = pred.human_boxes.rows();
  const auto n_obj = pred.object_logits.cols();
  const auto n_act = pred.action_logits.cols();

  nn::Matrix obj_prob(n_q, n_obj);
  for (Eigen::Index q = 0; q < n_q; ++q) {
    const double m = pred.object_logits.row(q).maxCoeff();
    obj_prob.row(q) = (pred.object_logits.row(q).array() - m).exp().matrix();
    obj_prob.row(q) /= obj_prob.row(q).sum();
  }

  nn::Matrix cost(static_cast<Eigen::Index>(targets.size()), n_q);
  for (std::size_t g = 0; g < targets.size(); ++g) {
    const Target& t = targets[g];
    if (t.object_class < 0 || t.object_class >= n_obj - 1) {
      throw std::invalid_argument("build_cost_matrix: object class out of range");
    }
    for (Eigen::Index q = 0; q < n_q; ++q) {
      const Box hb = row_box(pred.human_boxes, q);
      const Box ob = row_box(pred.object_boxes, q);
      const double l1 = std::abs(hb.cx - t.human_box.cx) + std::abs(hb.cy - t.human_box.cy) +
                        std::abs(hb.w - t.human_box.w) + std::abs(hb.h - t.human_box.h) +
                        std::abs(ob.cx - t.object_box.cx) + std::abs(ob.cy - t.object_box.cy) +
                        std::abs(ob.w - t.object_box.w) + std::abs(ob.h - t.object_box.h);
      const double giou_cost = (1.0 - giou(hb, t.human_box)) + (1.0 - giou(ob, t.object_box));
      double action_prob = 0.0;
      for (int a : t.actions) {
        if (a < 0 || a >= n_act) {
          throw std::invalid_argument("build_cost_matrix: action out of range");
        }
        action_prob += sigmoid(pred.action_logits(q, a));
      }
      if (!t.actions.empty()) action_prob /= static_cast<double>(t.actions.size());
      cost(static_cast<Eigen::Index>(g), q) =
          weights.box * l1 + weights.giou * giou_cost - weights.object * obj_prob(q, t.object_class) -
          weights.action * action_prob - weights.interactive * sigmoid(pred.interactive_logits(q, 0));
    }
  }
  return cost;
}

Assignment hungarian_match(const nn::Matrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  const auto m = static_cast<int>(cost.cols());
  if (n > m) throw std::invalid_argument("hungarian_match: more rows than columns");
  if (!cost.allFinite()) throw std::invalid_argument("hungarian_match: non-finite cost");

  Assignment result;
  if (n == 0) {
    for (int j = 0; j < m; ++j) result.unmatched_queries.push_back(j);
    return result;
  }

  // Shortest augmenting paths with row/column potentials; 1-based, with
  // column 0 as the virtual source.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match_col(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match_col[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.gt_to_query.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (match_col[j] != 0) {
      result.gt_to_query[static_cast<std::size_t>(match_col[j] - 1)] = j - 1;
    } else {
      result.unmatched_queries.push_back(j - 1);
    }
  }
  for (int i = 0; i < n; ++i) {
    result.cost += cost(i, result.gt_to_query[static_cast<std::size_t>(i)]);
  }
  return result;
}

}  // namespace cdn::matching
