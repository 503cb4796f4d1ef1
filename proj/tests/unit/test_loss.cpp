#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "cdn/error.hpp"
#include "cdn/loss.hpp"
#include "cdn/model.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "scalar_loss.hpp"

using namespace cdn;
using nn::Matrix;

namespace {

model::PairLayerOutput constant_layer(const oracle::ScalarLayer& s) {
  return {nn::constant(s.human_boxes), nn::constant(s.object_boxes), nn::constant(s.object_logits),
          nn::constant(s.interactive_logits)};
}

oracle::ScalarLayer random_layer(int n, int objects, int actions, Rng& rng) {
  oracle::ScalarLayer l{Matrix(n, 4), Matrix(n, 4), Matrix(n, objects + 1), Matrix(n, 1), Matrix(n, actions)};
  for (int q = 0; q < n; ++q) {
    const Box a = testsupport::random_box(rng), b = testsupport::random_box(rng);
    l.human_boxes.row(q) << a.cx, a.cy, a.w, a.h;
    l.object_boxes.row(q) << b.cx, b.cy, b.w, b.h;
  }
  for (auto* m : {&l.object_logits, &l.interactive_logits, &l.action_logits}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-3, 3);
  }
  return l;
}

struct Fixture {
  std::vector<oracle::ScalarLayer> pair_layers, action_layers;
  model::PairDetections pairs;
  model::ActionLogits actions;
};

Fixture make_fixture(int n, int objects, int actions, int depth_ho, int depth_int, Rng& rng) {
  Fixture f;
  for (int l = 0; l < std::max(depth_ho, depth_int); ++l) {
    auto layer = random_layer(n, objects, actions, rng);
    if (l < depth_ho) {
      f.pairs.layers.push_back(constant_layer(layer));
      f.pair_layers.push_back(layer);
    }
    if (l < depth_int) {
      f.actions.layers.push_back(nn::constant(layer.action_logits));
      f.action_layers.push_back(layer);
    }
  }
  return f;
}

double oracle_total(const Fixture& f, const std::vector<matching::Target>& targets,
                    const std::vector<int>& assign, const matching::LossWeights& w,
                    const loss::ClassWeights& cw) {
  const std::size_t records = std::max(f.pair_layers.size(), f.action_layers.size());
  double sum = 0;
  for (std::size_t l = 0; l < records; ++l) {
    oracle::ScalarLayer s = f.pair_layers[std::min(l, f.pair_layers.size() - 1)];
    s.action_logits = f.action_layers[std::min(l, f.action_layers.size() - 1)].action_logits;
    sum += oracle::scalar_layer_loss(s, targets, assign, w, cw).total;
  }
  return sum / static_cast<double>(records);
}

std::vector<matching::Target> random_targets(int n, int objects, int actions, Rng& rng) {
  std::vector<matching::Target> t;
  for (int i = 0; i < n; ++i) {
    std::vector<int> acts{rng.uniform_int(0, actions - 1)};
    if (rng.uniform() < 0.4) {
      const int extra = rng.uniform_int(0, actions - 1);
      if (extra != acts[0]) acts.push_back(extra);
    }
    t.push_back({testsupport::random_box(rng), testsupport::random_box(rng),
                 rng.uniform_int(0, objects - 1), acts});
  }
  return t;
}

}  // namespace

TEST(Loss, PerfectBoxesGiveZeroBoxTerms) {
  Rng rng(1);
  Fixture f = make_fixture(4, 2, 3, 1, 1, rng);
  const Box h{0.3, 0.3, 0.2, 0.2}, o{0.6, 0.6, 0.1, 0.3};
  Matrix hb = f.pair_layers[0].human_boxes, ob = f.pair_layers[0].object_boxes;
  hb.row(2) << h.cx, h.cy, h.w, h.h;
  ob.row(2) << o.cx, o.cy, o.w, o.h;
  f.pairs.layers[0].human_boxes = nn::constant(hb);
  f.pairs.layers[0].object_boxes = nn::constant(ob);
  const std::vector<matching::Target> targets{{h, o, 1, {0}}};
  matching::Assignment a;
  a.gt_to_query = {2};
  const auto res = loss::compute_loss(f.pairs, f.actions, targets, a, {}, loss::ClassWeights::uniform(2, 3));
  const auto& l = res.breakdown.layers[0];
  EXPECT_EQ(l.box_human, 0.0);
  EXPECT_EQ(l.box_object, 0.0);
  EXPECT_NEAR(l.giou_human, 0.0, 1e-15);
  EXPECT_NEAR(l.giou_object, 0.0, 1e-15);
}

TEST(Loss, SingleQueryEngineeredLogitsMatchScalarOracle) {
  oracle::ScalarLayer s{Matrix(1, 4), Matrix(1, 4), Matrix(1, 3), Matrix(1, 1), Matrix(1, 2)};
  s.human_boxes << 0.4, 0.5, 0.3, 0.4;
  s.object_boxes << 0.65, 0.55, 0.2, 0.2;
  s.object_logits << 1.5, -0.5, 0.25;
  s.interactive_logits << 0.8;
  s.action_logits << 2.0, -1.0;
  Fixture f;
  f.pair_layers = {s};
  f.action_layers = {s};
  f.pairs.layers = {constant_layer(s)};
  f.actions.layers = {nn::constant(s.action_logits)};
  const std::vector<matching::Target> targets{{{0.42, 0.48, 0.28, 0.42}, {0.6, 0.6, 0.25, 0.2}, 0, {0}}};
  matching::Assignment a;
  a.gt_to_query = {0};
  const matching::LossWeights w{};
  const auto cw = loss::ClassWeights::uniform(2, 2);
  const auto res = loss::compute_loss(f.pairs, f.actions, targets, a, w, cw);
  EXPECT_NEAR(res.breakdown.total, oracle_total(f, targets, {0}, w, cw), 1e-9);
}

TEST(Loss, RandomFixturesMatchScalarOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(3, 8), objects = rng.uniform_int(1, 4), actions = rng.uniform_int(1, 5);
    const int d_ho = rng.uniform_int(1, 3), d_int = rng.uniform_int(1, 3);
    const Fixture f = make_fixture(n, objects, actions, d_ho, d_int, rng);
    const int n_gt = rng.uniform_int(0, std::min(3, n));
    const auto targets = random_targets(n_gt, objects, actions, rng);
    std::vector<int> queries(static_cast<std::size_t>(n));
    std::iota(queries.begin(), queries.end(), 0);
    rng.shuffle(queries);
    matching::Assignment a;
    a.gt_to_query.assign(queries.begin(), queries.begin() + n_gt);
    loss::ClassWeights cw = loss::ClassWeights::uniform(objects, actions);
    for (auto& v : cw.object) v = rng.uniform(0.2, 3);
    for (auto& v : cw.action) v = rng.uniform(0.2, 3);
    cw.action_background = rng.uniform(0.2, 3);
    const matching::LossWeights w{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3),
                                  rng.uniform(0, 3), rng.uniform(0, 3)};
    const auto res = loss::compute_loss(f.pairs, f.actions, targets, a, w, cw);
    ASSERT_NEAR(res.breakdown.total, oracle_total(f, targets, a.gt_to_query, w, cw), 1e-9)
        << "trial " << trial;
    ASSERT_EQ(res.breakdown.layers.size(), static_cast<std::size_t>(std::max(d_ho, d_int)));
  }
}

TEST(Loss, StoredPartsRecomposeTotal) {
  Rng rng(3);
  const Fixture f = make_fixture(6, 3, 4, 2, 2, rng);
  const auto targets = random_targets(2, 3, 4, rng);
  matching::Assignment a;
  a.gt_to_query = {4, 1};
  const matching::LossWeights w{2.5, 1.0, 1.0, 1.0, 1.0};
  const auto res = loss::compute_loss(f.pairs, f.actions, targets, a, w, loss::ClassWeights::uniform(3, 4));
  double mean = 0;
  for (const auto& l : res.breakdown.layers) {
    EXPECT_NEAR(l.weighted_total(w), l.total, 1e-12);
    mean += l.total;
  }
  EXPECT_NEAR(mean / 2.0, res.breakdown.total, 1e-12);
}

TEST(Loss, UniformWeightsReproduceUnweighted) {
  Rng rng(4);
  const Fixture f = make_fixture(5, 2, 3, 1, 1, rng);
  const auto targets = random_targets(2, 2, 3, rng);
  matching::Assignment a;
  a.gt_to_query = {0, 3};
  const auto cw = loss::ClassWeights::uniform(2, 3);
  const auto res = loss::compute_loss(f.pairs, f.actions, targets, a, {}, cw);
  // Unweighted reference: the scalar oracle with the same all-ones weights.
  EXPECT_NEAR(res.breakdown.total, oracle_total(f, targets, a.gt_to_query, {}, cw), 1e-12);
}

TEST(Loss, GroundTruthOrderDoesNotMatter) {
  Rng rng(5);
  const Fixture f = make_fixture(8, 3, 4, 2, 2, rng);
  auto targets = random_targets(3, 3, 4, rng);
  matching::Assignment a;
  a.gt_to_query = {6, 2, 5};
  const auto cw = loss::ClassWeights::uniform(3, 4);
  const double before = loss::compute_loss(f.pairs, f.actions, targets, a, {}, cw).breakdown.total;
  std::swap(targets[0], targets[2]);
  std::swap(a.gt_to_query[0], a.gt_to_query[2]);
  const double after = loss::compute_loss(f.pairs, f.actions, targets, a, {}, cw).breakdown.total;
  EXPECT_NEAR(before, after, 1e-12);
}

TEST(Loss, WeightLengthMismatchThrows) {
  Rng rng(6);
  const Fixture f = make_fixture(3, 2, 2, 1, 1, rng);
  loss::ClassWeights cw = loss::ClassWeights::uniform(2, 2);
  cw.object.pop_back();
  EXPECT_THROW(loss::compute_loss(f.pairs, f.actions, {}, {}, {}, cw), ShapeError);
}

TEST(Loss, TinyModelGradientMatchesFiniteDifferences) {
  const auto cfg = testsupport::tiny_model();
  model::CdnModel m(cfg, 3);
  Rng rng(7);
  const Matrix img = testsupport::random_image(16, 16, rng);
  const auto targets = random_targets(2, cfg.num_object_classes, cfg.num_action_classes, rng);
  matching::Assignment a;
  a.gt_to_query = {1, 3};
  loss::ClassWeights cw = loss::ClassWeights::uniform(cfg.num_object_classes, cfg.num_action_classes);
  cw.action_background = 0.6;
  auto total = [&] {
    const auto out = m.forward(img, 16, 16);
    return loss::compute_loss(out.pairs, out.actions, targets, a, {}, cw).total;
  };
  testsupport::GradCheckOptions opt;
  opt.per_tensor = 1u << 20;  // every coordinate
  const auto rep = testsupport::gradient_check(m.parameters(), total, rng, opt);
  EXPECT_GE(rep.pass_fraction(), 0.99) << rep.passed << "/" << rep.sampled;
  EXPECT_LE(rep.worst, 1e-2);
}
