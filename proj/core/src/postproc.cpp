#include "cdn/postproc.hpp"

#include <algorithm>
#include <cmath>

#include "cdn/error.hpp"

namespace cdn::postproc {

void PnmsConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("pnms: alpha and beta must be >= 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("pnms: threshold must lie in [0,1]");
  }
  if (top_k < 1) throw ConfigError("pnms: top_k must be >= 1");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Box row_box(const nn::Matrix& m, Eigen::Index r) { return {m(r, 0), m(r, 1), m(r, 2), m(r, 3)}; }

}  // namespace

std::vector<ScoredTriplet> compose_triplets(const HeadValues& heads, bool argmax_only) {
  const auto n = heads.human_boxes.rows();
  if (heads.object_boxes.rows() != n || heads.object_logits.rows() != n ||
      heads.interactive_logits.rows() != n || heads.action_logits.rows() != n) {
    throw ShapeError("compose_triplets: head outputs have different query counts");
  }
  if (heads.human_boxes.cols() != 4 || heads.object_boxes.cols() != 4 ||
      heads.interactive_logits.cols() != 1 || heads.object_logits.cols() < 2) {
    throw ShapeError("compose_triplets: unexpected head widths");
  }
  const auto n_obj = heads.object_logits.cols() - 1;
  std::vector<ScoredTriplet> out;
  for (Eigen::Index q = 0; q < n; ++q) {
    const auto logits = heads.object_logits.row(q);
    const double m = logits.maxCoeff();
    const Eigen::RowVectorXd e = (logits.array() - m).exp().matrix();
    const double z = e.sum();
    Eigen::Index best = 0;
    e.head(n_obj).maxCoeff(&best);
    const double c_o = e(best) / z;
    const double c_p = sigmoid(heads.interactive_logits(q, 0));

    ScoredTriplet base;
    base.human_box = row_box(heads.human_boxes, q);
    base.object_box = row_box(heads.object_boxes, q);
    base.query = static_cast<int>(q);
    base.object_class = static_cast<int>(best);
    base.object_score = c_o;
    base.interactive_score = c_p;

    const auto n_act = heads.action_logits.cols();
    Eigen::Index best_action = 0;
    if (argmax_only) heads.action_logits.row(q).maxCoeff(&best_action);
    for (Eigen::Index a = 0; a < n_act; ++a) {
      if (argmax_only && a != best_action) continue;
      ScoredTriplet t = base;
      t.action = static_cast<int>(a);
      t.action_score = sigmoid(heads.action_logits(q, a));
      t.score = t.action_score * t.object_score * t.interactive_score;
      out.push_back(t);
    }
  }
  return out;
}

double piou(const ScoredTriplet& m, const ScoredTriplet& n, double alpha, double beta) {
  return std::pow(iou(m.human_box, n.human_box), alpha) *
         std::pow(iou(m.object_box, n.object_box), beta);
}

namespace {

void rank(std::vector<ScoredTriplet>& triplets, int top_k) {
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const ScoredTriplet& a, const ScoredTriplet& b) { return a.score > b.score; });
  if (static_cast<int>(triplets.size()) > top_k) {
    triplets.resize(static_cast<std::size_t>(top_k));
  }
}

}  // namespace

std::vector<ScoredTriplet> pnms(std::vector<ScoredTriplet> triplets, const PnmsConfig& config) {
  rank(triplets, config.top_k);
  std::vector<ScoredTriplet> kept;
  for (const auto& t : triplets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredTriplet& k) {
      const bool same_group =
          config.class_agnostic || (k.object_class == t.object_class && k.action == t.action);
      return same_group && piou(k, t, config.alpha, config.beta) > config.threshold;
    });
    if (!suppressed) kept.push_back(t);
  }
  return kept;
}

std::vector<ScoredTriplet> select(std::vector<ScoredTriplet> triplets, const PnmsConfig& config) {
  if (config.enabled) return pnms(std::move(triplets), config);
  rank(triplets, config.top_k);
  return triplets;
}

std::vector<data::HoiInstance> predict_image(const HeadValues& heads, const PnmsConfig& config,
                                             const std::string& image_id, int width, int height) {
  const auto kept = select(compose_triplets(heads, config.argmax_only), config);
  std::vector<data::HoiInstance> out;
  std::vector<int> record_of(static_cast<std::size_t>(heads.human_boxes.rows()), -1);
  for (const auto& t : kept) {
    int& rec = record_of[static_cast<std::size_t>(t.query)];
    if (rec < 0) {
      rec = static_cast<int>(out.size());
      data::HoiInstance h;
      h.image_id = image_id;
      h.human_box = to_corners(t.human_box, width, height);
      h.object_box = to_corners(t.object_box, width, height);
      h.object_class = t.object_class;
      h.object_score = t.object_score;
      h.interactive_score = t.interactive_score;
      for (Eigen::Index a = 0; a < heads.action_logits.cols(); ++a) {
        h.action_scores.push_back(sigmoid(heads.action_logits(t.query, a)));
      }
      out.push_back(std::move(h));
    }
    out[static_cast<std::size_t>(rec)].actions.push_back(t.action);
  }
  return out;
}

}  // namespace cdn::postproc
