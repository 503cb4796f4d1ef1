#include <gtest/gtest.h>

#include <cmath>

#include "cdn/reweighting.hpp"
#include "fixtures.hpp"
#include "label_window.hpp"

using namespace cdn;
using reweight::ClassCountQueue;

namespace {

ClassCountQueue queue_with(const std::vector<std::int64_t>& counts, std::int64_t background = 0) {
  std::size_t total = static_cast<std::size_t>(background);
  for (auto c : counts) total += static_cast<std::size_t>(c);
  ClassCountQueue q(static_cast<int>(counts.size()), std::max<std::size_t>(total, 1));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::vector<int> labels(static_cast<std::size_t>(counts[i]), static_cast<int>(i));
    q.push(labels, 0);
  }
  q.push({}, background);
  return q;
}

}  // namespace

TEST(Queue, FillGrowsToThree) {
  ClassCountQueue q(4, 10);
  const std::vector<int> labels{0, 2, 2};
  q.push(labels, 0);
  EXPECT_EQ(q.fill(), 3u);
  EXPECT_EQ(q.counts()[2], 2);
}

TEST(Queue, OverflowEvictsOldest) {
  ClassCountQueue q(3, 10);
  std::vector<int> labels{1};
  for (int i = 0; i < 10; ++i) labels.push_back(0);
  q.push(labels, 0);
  EXPECT_EQ(q.fill(), 10u);
  EXPECT_EQ(q.counts()[1], 0);
  EXPECT_EQ(q.counts()[0], 10);
}

TEST(Queue, MatchesListRecount) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = rng.uniform_int(1, 6);
    const auto cap = static_cast<std::size_t>(rng.uniform_int(1, 40));
    ClassCountQueue q(classes, cap);
    oracle::LabelWindow w(classes, cap);
    for (int step = 0; step < 200; ++step) {
      std::vector<int> labels(static_cast<std::size_t>(rng.uniform_int(0, 4)));
      for (auto& l : labels) l = rng.uniform_int(0, classes - 1);
      const int bg = rng.uniform_int(0, 3);
      q.push(labels, bg);
      for (int l : labels) w.push(l);
      for (int i = 0; i < bg; ++i) w.push(-1);
      ASSERT_EQ(q.counts(), w.counts());
      ASSERT_EQ(q.background(), w.background());
      ASSERT_EQ(q.fill(), w.size());
    }
  }
}

TEST(Queue, RejectsBadLabel) {
  ClassCountQueue q(2, 5);
  const std::vector<int> bad{2};
  EXPECT_THROW(q.push(bad, 0), std::out_of_range);
}

TEST(DynamicWeights, CountsOneAndThree) {
  const auto w = reweight::dynamic_weights(queue_with({1, 3}, 2), 0.7);
  EXPECT_NEAR(w.weights[0], std::pow(4.0, 0.7), 1e-9);
  EXPECT_NEAR(w.weights[1], std::pow(4.0 / 3.0, 0.7), 1e-9);
  EXPECT_NEAR(w.weights[0], 2.6390, 1e-4);
  EXPECT_NEAR(w.weights[1], 1.2231, 1e-4);
}

TEST(DynamicWeights, UniformCountsGiveEqualWeights) {
  const auto w = reweight::dynamic_weights(queue_with({5, 5, 5, 5}, 3), 0.7);
  for (double x : w.weights) EXPECT_DOUBLE_EQ(x, std::pow(4.0, 0.7));
}

TEST(DynamicWeights, ZeroExponentGivesOnes) {
  const auto w = reweight::dynamic_weights(queue_with({1, 7, 2}, 4), 0.0);
  for (double x : w.weights) EXPECT_EQ(x, 1.0);
  EXPECT_EQ(w.background, 1.0);
}

TEST(DynamicWeights, RarerClassHeavier) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> counts(5);
    for (auto& c : counts) c = rng.uniform_int(1, 50);
    const double p = rng.uniform(0.05, 2.0);
    const auto w = reweight::dynamic_weights(queue_with(counts, 1), p);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        if (counts[i] < counts[j]) {
          ASSERT_GT(w.weights[i], w.weights[j]);
        }
      }
    }
  }
}

TEST(DynamicWeights, ScaleInvariant) {
  const std::vector<std::int64_t> base{2, 5, 9};
  const auto a = reweight::weights_from_counts(base, 4, 0.7);
  const std::vector<std::int64_t> scaled{6, 15, 27};
  const auto b = reweight::weights_from_counts(scaled, 12, 0.7);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.weights[i], b.weights[i], 1e-12);
  EXPECT_NEAR(a.background, b.background, 1e-12);
}

TEST(DynamicWeights, ZeroCountUsesFallback) {
  reweight::WeightVector fb;
  fb.weights = {3.0, 4.0};
  fb.background = 0.5;
  const auto w = reweight::dynamic_weights(queue_with({0, 2}, 0), 0.7, &fb);
  EXPECT_EQ(w.weights[0], 3.0);
  EXPECT_EQ(w.background, 0.5);
  EXPECT_THROW(reweight::dynamic_weights(queue_with({0, 2}, 0), 0.7), std::domain_error);
}

TEST(Smoothing, FillOne) {
  EXPECT_EQ(reweight::smoothing_factor(1), 0.9);
  reweight::WeightVector s, d;
  s.weights = {2.0};
  d.weights = {4.0};
  s.background = 1.0;
  d.background = 3.0;
  const auto b = reweight::blend(s, d, 1);
  EXPECT_NEAR(b.weights[0], 0.9 * 2.0 + 0.1 * 4.0, 1e-15);
  EXPECT_NEAR(b.background, 0.9 * 1.0 + 0.1 * 3.0, 1e-15);
}

TEST(Smoothing, LargeFillApproachesDynamic) {
  const double g = reweight::smoothing_factor(10000);
  EXPECT_NEAR(g, std::pow(0.999, 10000), 1e-18);
  EXPECT_NEAR(g, 4.5e-5, 1e-6);
}

TEST(Smoothing, RangeAndMonotone) {
  double prev = 1.0;
  for (std::size_t n = 0; n < 50000; n += 7) {
    const double g = reweight::smoothing_factor(n);
    ASSERT_GT(g, 0.0);
    ASSERT_LE(g, 0.9);
    ASSERT_LE(g, prev);
    prev = g;
  }
}

TEST(Smoothing, EqualInputsFixedPoint) {
  reweight::WeightVector s;
  s.weights = {1.7, 0.4};
  s.background = 0.2;
  for (std::size_t n : {0u, 1u, 100u, 5000u}) {
    const auto b = reweight::blend(s, s, n);
    EXPECT_NEAR(b.weights[0], 1.7, 1e-15);
    EXPECT_NEAR(b.weights[1], 0.4, 1e-15);
  }
}

TEST(StaticWeights, EqualFrequenciesGiveUniformWeights) {
  data::AnnotationSet set;
  set.vocab = {2, 2};
  for (int i = 0; i < 4; ++i) {
    data::ImageAnnotation img;
    img.image_id = std::to_string(i);
    img.width = img.height = 64;
    data::HoiInstance h;
    h.object_class = i % 2;
    h.actions = {i / 2};
    img.hois.push_back(h);
    set.images.push_back(img);
  }
  const auto w = reweight::static_weights(set, 0.7, 0.7, 16);
  EXPECT_DOUBLE_EQ(w.object.weights[0], w.object.weights[1]);
  EXPECT_DOUBLE_EQ(w.action.weights[0], w.action.weights[1]);
}

TEST(ReweightConfig, DefaultsMatchPublishedSetting) {
  const reweight::ReweightConfig c;
  EXPECT_EQ(c.p_object, 0.7);
  EXPECT_EQ(c.p_action, 0.7);
  // 0 selects twice the per-epoch sample count.
  EXPECT_EQ(c.queue_length_object, 0);
  const auto ds = data::generate_dataset(testsupport::small_scene(6), 1);
  reweight::DynamicReweighter r(c, ds.annotations, 16);
  const auto counts = reweight::count_dataset(ds.annotations, 16);
  EXPECT_EQ(r.object_queue().capacity(), static_cast<std::size_t>(2 * counts.object_samples()));
  EXPECT_EQ(r.action_queue().capacity(), static_cast<std::size_t>(2 * counts.action_samples()));
}

TEST(Reweighter, StreamMatchesOfflineRecomputation) {
  const auto ds = data::generate_dataset(testsupport::small_scene(10), 3);
  reweight::ReweightConfig cfg;
  cfg.queue_length_object = 37;
  cfg.queue_length_action = 41;
  reweight::DynamicReweighter r(cfg, ds.annotations, 16);
  oracle::LabelWindow ow(3, 37), aw(4, 41);
  const auto stat = reweight::static_weights(ds.annotations, 0.7, 0.7, 16);

  auto offline = [](const oracle::LabelWindow& w, const reweight::WeightVector& s, double p,
                    std::vector<double>& out, double& bg) {
    const auto counts = w.counts();
    double total = 0;
    for (auto c : counts) total += static_cast<double>(c);
    const double g = std::min(std::pow(0.999, static_cast<double>(w.size())), 0.9);
    out.clear();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double d = counts[i] > 0 ? std::pow(total / static_cast<double>(counts[i]), p) : s.weights[i];
      out.push_back(g * s.weights[i] + (1 - g) * d);
    }
    const double db = w.background() > 0 ? std::pow(total / static_cast<double>(w.background()), p) : s.background;
    bg = g * s.background + (1 - g) * db;
  };

  Rng rng(4);
  for (int step = 0; step < 60; ++step) {
    const auto& img = ds.annotations.images[static_cast<std::size_t>(rng.uniform_int(0, 9))];
    std::vector<int> objects, actions;
    for (const auto& h : img.hois) {
      objects.push_back(h.object_class);
      actions.insert(actions.end(), h.actions.begin(), h.actions.end());
    }
    const std::int64_t unmatched = 16 - static_cast<std::int64_t>(img.hois.size());
    r.observe(objects, actions, unmatched);
    for (int o : objects) ow.push(o);
    for (std::int64_t i = 0; i < unmatched; ++i) ow.push(-1);
    for (int a : actions) aw.push(a);
    for (std::int64_t i = 0; i < unmatched; ++i) aw.push(-1);

    const auto cw = r.current();
    std::vector<double> ew;
    double ebg = 0;
    offline(ow, stat.object, 0.7, ew, ebg);
    for (std::size_t i = 0; i < 3; ++i) ASSERT_EQ(cw.object[i], ew[i]) << "step " << step;
    ASSERT_EQ(cw.object[3], ebg);
    offline(aw, stat.action, 0.7, ew, ebg);
    for (std::size_t i = 0; i < 4; ++i) ASSERT_EQ(cw.action[i], ew[i]) << "step " << step;
    ASSERT_EQ(cw.action_background, ebg);
  }
}

TEST(Reweighter, DisabledGivesOnes) {
  const auto ds = data::generate_dataset(testsupport::small_scene(4), 3);
  reweight::ReweightConfig cfg;
  cfg.p_object = cfg.p_action = 0.0;
  reweight::DynamicReweighter r(cfg, ds.annotations, 16);
  const std::vector<int> o{0, 1}, a{2, 3};
  r.observe(o, a, 14);
  const auto cw = r.current();
  for (double w : cw.object) EXPECT_EQ(w, 1.0);
  for (double w : cw.action) EXPECT_EQ(w, 1.0);
  EXPECT_EQ(cw.action_background, 1.0);
}
