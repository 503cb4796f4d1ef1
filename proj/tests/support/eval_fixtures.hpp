#pragma once
// Small annotated scenes with jittered, scored detections for evaluator tests.

#include <string>
#include <vector>

#include "cdn/dataio.hpp"
#include "cdn/random.hpp"

namespace testsupport {

inline cdn::data::HoiInstance gt_instance(cdn::Corners h, cdn::Corners o, int obj, std::vector<int> acts) {
  cdn::data::HoiInstance x;
  x.human_box = h;
  x.object_box = o;
  x.object_class = obj;
  x.actions = std::move(acts);
  return x;
}

inline cdn::data::HoiInstance prediction(const std::string& img, cdn::Corners h, cdn::Corners o, int obj, int act,
                             double score, int actions = 2) {
  cdn::data::HoiInstance p;
  p.image_id = img;
  p.human_box = h;
  p.object_box = o;
  p.object_class = obj;
  p.actions = {act};
  p.action_scores.assign(static_cast<std::size_t>(actions), 0.0);
  p.action_scores[static_cast<std::size_t>(act)] = score;
  return p;
}

struct Fixture {
  cdn::data::AnnotationSet gt;
  cdn::data::PredictionSet preds;
  cdn::data::HoiClassTable table;
};

inline Fixture one_gt() {
  Fixture f;
  f.gt.vocab = f.preds.vocab = {1, 2};
  cdn::data::ImageAnnotation img;
  img.image_id = "a";
  img.width = img.height = 100;
  img.hois.push_back(gt_instance({10, 10, 40, 60}, {50, 20, 80, 50}, 0, {1}));
  f.gt.images.push_back(img);
  f.table = cdn::data::build_class_table(f.gt);
  return f;
}

inline cdn::Corners jitter(cdn::Corners c, cdn::Rng& rng, double amount) {
  return {c.x1 + rng.uniform(-amount, amount), c.y1 + rng.uniform(-amount, amount),
          c.x2 + rng.uniform(-amount, amount), c.y2 + rng.uniform(-amount, amount)};
}

inline Fixture random_fixture(cdn::Rng& rng) {
  Fixture f;
  f.gt.vocab = f.preds.vocab = {2, 2};  // 4 HOI classes, 3 populated below on average
  for (int i = 0; i < 5; ++i) {
    cdn::data::ImageAnnotation img;
    img.image_id = "img" + std::to_string(i);
    img.width = img.height = 100;
    const int n = rng.uniform_int(1, 3);
    for (int k = 0; k < n; ++k) {
      const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
      const cdn::Corners h{x, y, x + rng.uniform(15, 40), y + rng.uniform(15, 40)};
      const double u = rng.uniform(0, 60), v = rng.uniform(0, 60);
      const cdn::Corners o{u, v, u + rng.uniform(10, 30), v + rng.uniform(10, 30)};
      std::vector<int> acts{rng.uniform_int(0, 1)};
      if (rng.uniform() < 0.2) acts = {0, 1};
      img.hois.push_back(gt_instance(h, o, rng.uniform_int(0, 1), acts));
    }
    for (const auto& g : img.hois) {
      const int copies = rng.uniform_int(0, 3);
      for (int c = 0; c < copies; ++c) {
        auto p = prediction(img.image_id, jitter(g.human_box, rng, 6), jitter(g.object_box, rng, 6),
                            rng.uniform() < 0.85 ? g.object_class : 1 - g.object_class,
                            g.actions[0], 0.0);
        p.action_scores = {rng.uniform(), rng.uniform()};
        p.object_score = rng.uniform(0.2, 1);
        p.interactive_score = rng.uniform(0.2, 1);
        if (rng.uniform() < 0.3) p.actions = {0, 1};
        f.preds.predictions.push_back(p);
      }
    }
    // clutter
    for (int c = 0; c < 3; ++c) {
      const double x = rng.uniform(0, 70), y = rng.uniform(0, 70);
      auto p = prediction(img.image_id, {x, y, x + 20, y + 20}, {y, x, y + 15, x + 15},
                          rng.uniform_int(0, 1), rng.uniform_int(0, 1), rng.uniform());
      f.preds.predictions.push_back(p);
    }
    f.gt.images.push_back(img);
  }
  f.table = cdn::data::build_class_table(f.gt, 3);
  return f;
}

}  // namespace testsupport
