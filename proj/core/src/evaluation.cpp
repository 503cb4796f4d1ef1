#include "cdn/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "cdn/error.hpp"

namespace cdn::eval {

std::vector<bool> match_to_gt(std::span<const PairBoxes> detections,
                              std::span<const PairBoxes> ground_truth) {
  std::vector<bool> flags(detections.size(), false);
  std::vector<bool> claimed(ground_truth.size(), false);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    int best = -1;
    double best_overlap = -1.0;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (claimed[g]) continue;
      const double ih = iou(detections[d].human, ground_truth[g].human);
      const double io = iou(detections[d].object, ground_truth[g].object);
      if (!(ih > kIouThreshold && io > kIouThreshold)) continue;
      const double overlap = std::min(ih, io);
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      claimed[static_cast<std::size_t>(best)] = true;
      flags[d] = true;
    }
  }
  return flags;
}

double average_precision(const std::vector<bool>& flags, std::span<const double> scores,
                         std::int64_t num_gt, PrCurve* curve) {
  if (flags.size() != scores.size()) {
    throw std::invalid_argument("average_precision: flags and scores differ in length");
  }
  if (curve != nullptr) *curve = {};
  if (num_gt <= 0) return 0.0;

  std::vector<std::size_t> order(flags.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<double> precision, recall;
  double tp = 0.0, fp = 0.0;
  for (std::size_t i : order) {
    (flags[i] ? tp : fp) += 1.0;
    precision.push_back(tp / (tp + fp));
    recall.push_back(tp / static_cast<double>(num_gt));
  }

  // Precision envelope from the right, then integrate over recall steps.
  std::vector<double> envelope = precision;
  for (std::size_t i = envelope.size(); i-- > 1;) {
    envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * envelope[i];
    prev_recall = recall[i];
  }
  if (curve != nullptr) *curve = {std::move(precision), std::move(recall)};
  return ap;
}

EvalResult evaluate(const data::PredictionSet& predictions, const data::AnnotationSet& ground_truth,
                    const data::HoiClassTable& classes) {
  if (!(predictions.vocab == ground_truth.vocab) || !(classes.vocab == ground_truth.vocab)) {
    throw std::invalid_argument("evaluate: predictions, annotations and class table use "
                                "different vocabularies");
  }
  const std::size_t n_classes = classes.classes.size();

  // Ground truth grouped by class, then by image.
  std::vector<std::map<std::string, std::vector<PairBoxes>>> gt(n_classes);
  std::vector<std::int64_t> num_gt(n_classes, 0);
  for (const auto& img : ground_truth.images) {
    for (const auto& h : img.hois) {
      for (int a : h.actions) {
        const int c = classes.index_of(h.object_class, a);
        if (c < 0) continue;
        gt[static_cast<std::size_t>(c)][img.image_id].push_back({h.human_box, h.object_box});
        ++num_gt[static_cast<std::size_t>(c)];
      }
    }
  }

  // Detections per class in input order.
  struct Det {
    PairBoxes boxes;
    double score;
    const std::string* image_id;
  };
  std::vector<std::vector<Det>> dets(n_classes);
  for (const auto& p : predictions.predictions) {
    for (int a : p.actions) {
      const int c = classes.index_of(p.object_class, a);
      if (c < 0) continue;
      dets[static_cast<std::size_t>(c)].push_back(
          {{p.human_box, p.object_box}, p.triplet_score(a), &p.image_id});
    }
  }

  EvalResult result;
  double sum_full = 0.0, sum_rare = 0.0, sum_nonrare = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto& hc = classes.classes[c];
    const auto& cls_dets = dets[c];
    std::vector<bool> flags(cls_dets.size(), false);
    std::vector<double> scores(cls_dets.size());
    for (std::size_t i = 0; i < cls_dets.size(); ++i) scores[i] = cls_dets[i].score;

    // Claims only interact within an image, so match image by image.
    std::map<std::string, std::vector<std::size_t>> by_image;
    for (std::size_t i = 0; i < cls_dets.size(); ++i) by_image[*cls_dets[i].image_id].push_back(i);
    for (auto& [image_id, idx] : by_image) {
      auto git = gt[c].find(image_id);
      if (git == gt[c].end()) continue;
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
      std::vector<PairBoxes> sorted;
      for (std::size_t i : idx) sorted.push_back(cls_dets[i].boxes);
      const auto f = match_to_gt(sorted, git->second);
      for (std::size_t k = 0; k < idx.size(); ++k) flags[idx[k]] = f[k];
    }

    ClassResult cr;
    cr.object_class = hc.object_class;
    cr.action = hc.action;
    cr.rare = hc.rare;
    cr.num_gt = num_gt[c];
    cr.ap = average_precision(flags, scores, cr.num_gt, &cr.curve);
    if (cr.num_gt > 0) {
      sum_full += cr.ap;
      ++result.num_full;
      if (cr.rare) {
        sum_rare += cr.ap;
        ++result.num_rare;
      } else {
        sum_nonrare += cr.ap;
        ++result.num_nonrare;
      }
    }
    result.classes.push_back(std::move(cr));
  }
  result.map_full = result.num_full > 0 ? sum_full / result.num_full : 0.0;
  result.map_rare = result.num_rare > 0 ? sum_rare / result.num_rare : 0.0;
  result.map_nonrare = result.num_nonrare > 0 ? sum_nonrare / result.num_nonrare : 0.0;
  return result;
}

EvalResult evaluate_files(const std::filesystem::path& predictions,
                          const std::filesystem::path& ground_truth,
                          const std::filesystem::path& classes) {
  const auto preds = data::load_predictions(predictions);
  const auto gt = data::load_annotations(ground_truth);
  const auto table = data::load_class_table(classes);
  auto describe = [](const data::Vocabulary& v) {
    return "(" + std::to_string(v.num_object_classes) + " objects, " +
           std::to_string(v.num_action_classes) + " actions)";
  };
  if (!(preds.vocab == gt.vocab)) {
    throw DataError(predictions.string(), 1, "num_action_classes",
                    "vocabulary " + describe(preds.vocab) + " differs from " +
                        ground_truth.string() + " " + describe(gt.vocab));
  }
  if (!(table.vocab == gt.vocab)) {
    throw DataError(classes.string(), 1, "num_action_classes",
                    "vocabulary " + describe(table.vocab) + " differs from " +
                        ground_truth.string() + " " + describe(gt.vocab));
  }
  return evaluate(preds, gt, table);
}

std::string format_report(const EvalResult& r) {
  std::string out;
  char line[256];
  out += "# HOI detection mAP, Default setting (pair IoU > 0.5)\n";
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s\n", "metric", "Full", "Rare", "Non-Rare");
  out += line;
  std::snprintf(line, sizeof line, "%-10s %10.6f %10.6f %10.6f\n", "mAP", r.map_full, r.map_rare,
                r.map_nonrare);
  out += line;
  std::snprintf(line, sizeof line, "%-10s %10d %10d %10d\n", "classes", r.num_full, r.num_rare,
                r.num_nonrare);
  out += line;
  out += "\n# per-class AP (classes without ground truth are listed but not averaged)\n";
  std::snprintf(line, sizeof line, "%-8s %-8s %-6s %8s %10s\n", "object", "action", "rare", "num_gt",
                "AP");
  out += line;
  for (const auto& c : r.classes) {
    std::snprintf(line, sizeof line, "%-8d %-8d %-6s %8lld %10.6f\n", c.object_class, c.action,
                  c.rare ? "yes" : "no", static_cast<long long>(c.num_gt), c.ap);
    out += line;
  }
  return out;
}

void write_report(const std::filesystem::path& path, const EvalResult& result) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_report(result);
}

}  // namespace cdn::eval
