#include <gtest/gtest.h>

#include <algorithm>

#include "cdn/postproc.hpp"
#include "fixtures.hpp"
#include "naive_pnms.hpp"

using namespace cdn;
using nn::Matrix;
using postproc::PnmsConfig;
using postproc::ScoredTriplet;

namespace {

double logit(double p) { return std::log(p / (1 - p)); }

postproc::HeadValues random_heads(int n, int objects, int actions, Rng& rng) {
  postproc::HeadValues h{Matrix(n, 4), Matrix(n, 4), Matrix(n, objects + 1), Matrix(n, 1), Matrix(n, actions)};
  for (int q = 0; q < n; ++q) {
    const Box a = testsupport::random_box(rng), b = testsupport::random_box(rng);
    h.human_boxes.row(q) << a.cx, a.cy, a.w, a.h;
    h.object_boxes.row(q) << b.cx, b.cy, b.w, b.h;
  }
  for (auto* m : {&h.object_logits, &h.interactive_logits, &h.action_logits}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-4, 4);
  }
  return h;
}

ScoredTriplet triplet(Box h, Box o, double score, int obj = 0, int act = 0) {
  ScoredTriplet t;
  t.human_box = h;
  t.object_box = o;
  t.score = score;
  t.object_class = obj;
  t.action = act;
  return t;
}

}  // namespace

TEST(Compose, CountIsQueriesTimesActions) {
  Rng rng(1);
  EXPECT_EQ(postproc::compose_triplets(random_heads(16, 3, 8, rng)).size(), 128u);
  EXPECT_EQ(postproc::compose_triplets(random_heads(16, 3, 8, rng), true).size(), 16u);
}

TEST(Compose, CertainHeadsScoreOne) {
  postproc::HeadValues h{Matrix::Constant(1, 4, 0.5), Matrix::Constant(1, 4, 0.5), Matrix(1, 3),
                         Matrix::Constant(1, 1, 1000.0), Matrix::Constant(1, 2, 1000.0)};
  h.object_logits << 1000.0, -1000.0, -1000.0;
  for (const auto& t : postproc::compose_triplets(h)) EXPECT_EQ(t.score, 1.0);
}

TEST(Compose, ScoreIsProductOfProbabilities) {
  postproc::HeadValues h{Matrix::Constant(1, 4, 0.5), Matrix::Constant(1, 4, 0.5), Matrix(1, 4),
                         Matrix(1, 1), Matrix(1, 2)};
  h.object_logits << std::log(0.2), std::log(0.5), std::log(0.1), std::log(0.2);
  h.interactive_logits << logit(0.7);
  h.action_logits << logit(0.9), logit(0.25);
  const auto ts = postproc::compose_triplets(h);
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_EQ(ts[0].object_class, 1);
  EXPECT_NEAR(ts[0].score, 0.9 * 0.5 * 0.7, 1e-12);
  EXPECT_NEAR(ts[1].score, 0.25 * 0.5 * 0.7, 1e-12);
}

TEST(Compose, NeverEmitsBackground) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    auto h = random_heads(8, 3, 2, rng);
    h.object_logits.col(3).setConstant(20.0);  // background dominates
    for (const auto& t : postproc::compose_triplets(h)) ASSERT_LT(t.object_class, 3);
  }
}

TEST(Piou, Cases) {
  const Box a{0.5, 0.5, 0.2, 0.2};
  const auto t = triplet(a, a, 1);
  EXPECT_EQ(postproc::piou(t, t, 1.0, 0.5), 1.0);
  EXPECT_EQ(postproc::piou(t, t, 3.0, 0.0), 1.0);
  const auto far = triplet({0.1, 0.1, 0.1, 0.1}, a, 1);
  EXPECT_EQ(postproc::piou(t, far, 1.0, 0.5), 0.0);
  // Human boxes (0,0,10,10) and (0,5,10,15) scaled to unit: IoU 1/3.
  const auto h1 = triplet({0.05, 0.05, 0.1, 0.1}, a, 1);
  const auto h2 = triplet({0.05, 0.10, 0.1, 0.1}, a, 1);
  EXPECT_NEAR(postproc::piou(h1, h2, 1.0, 0.5), 1.0 / 3.0, 1e-12);
}

TEST(Pnms, DuplicateSuppressed) {
  const Box b{0.5, 0.5, 0.3, 0.3};
  const auto kept = postproc::pnms({triplet(b, b, 0.4), triplet(b, b, 0.9)}, {});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
}

TEST(Pnms, DisjointHumansBothKept) {
  const Box o{0.5, 0.5, 0.3, 0.3};
  EXPECT_EQ(postproc::pnms({triplet({0.1, 0.1, 0.1, 0.1}, o, 0.4), triplet({0.8, 0.8, 0.1, 0.1}, o, 0.9)}, {}).size(),
            2u);
}

TEST(Pnms, DifferentClassesNotSuppressedUnlessAgnostic) {
  const Box b{0.5, 0.5, 0.3, 0.3};
  const std::vector<ScoredTriplet> in{triplet(b, b, 0.9, 0, 0), triplet(b, b, 0.8, 0, 1)};
  EXPECT_EQ(postproc::pnms(in, {}).size(), 2u);
  PnmsConfig agnostic;
  agnostic.class_agnostic = true;
  EXPECT_EQ(postproc::pnms(in, agnostic).size(), 1u);
}

TEST(Pnms, MatchesNaiveReference) {
  Rng rng(3);
  const std::vector<PnmsConfig> configs{{1.0, 0.5, 0.7}, {0.5, 1.0, 0.5}, {2.0, 2.0, 0.3},
                                        {1.0, 0.0, 0.9}, {0.0, 1.0, 0.6}};
  for (const auto& cfg : configs) {
    for (int trial = 0; trial < 40; ++trial) {
      const auto in = testsupport::random_triplets(50, rng);
      const auto got = postproc::pnms(in, cfg);
      const auto want = oracle::naive_pnms(in, cfg.alpha, cfg.beta, cfg.threshold, cfg.top_k, false);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i], in[want[i]]);
    }
  }
}

TEST(Pnms, SubsequenceOfRankingAndTopSurvives) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = testsupport::random_triplets(40, rng);
    const auto kept = postproc::pnms(in, {});
    std::stable_sort(in.begin(), in.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    ASSERT_EQ(kept.front(), in.front());
    std::size_t pos = 0;
    for (const auto& k : kept) {
      while (pos < in.size() && !(in[pos] == k)) ++pos;
      ASSERT_LT(pos, in.size());
      ++pos;
    }
  }
}

TEST(Pnms, ThresholdOneKeepsEverything) {
  Rng rng(5);
  PnmsConfig cfg;
  cfg.threshold = 1.0;
  auto in = testsupport::random_triplets(30, rng);
  in.push_back(in[3]);  // exact duplicate: PIoU 1 does not exceed 1
  EXPECT_EQ(postproc::pnms(in, cfg).size(), in.size());
}

TEST(Pnms, LargerExponentsNeverShrinkSurvivors) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = testsupport::random_triplets(50, rng);
    PnmsConfig lo{rng.uniform(0, 1.5), rng.uniform(0, 1.5), rng.uniform(0.2, 0.9)};
    PnmsConfig hi = lo;
    (trial % 2 ? hi.alpha : hi.beta) += rng.uniform(0.1, 2.0);
    ASSERT_GE(postproc::pnms(in, hi).size(), postproc::pnms(in, lo).size());
  }
}

TEST(Pnms, TopKTruncates) {
  Rng rng(7);
  PnmsConfig cfg;
  cfg.top_k = 5;
  cfg.enabled = false;
  const auto out = postproc::select(testsupport::random_triplets(40, rng), cfg);
  EXPECT_EQ(out.size(), 5u);
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(out[i - 1].score, out[i].score);
}

TEST(PredictImage, GroupsSurvivorsPerQuery) {
  Rng rng(8);
  const auto heads = random_heads(6, 2, 3, rng);
  PnmsConfig cfg;
  cfg.enabled = false;
  const auto preds = postproc::predict_image(heads, cfg, "x", 64, 48);
  ASSERT_EQ(preds.size(), 6u);  // every triplet survives without suppression
  std::size_t actions = 0;
  for (const auto& p : preds) {
    actions += p.actions.size();
    EXPECT_EQ(p.action_scores.size(), 3u);
    for (int a : p.actions) EXPECT_GE(p.triplet_score(a), 0.0);
  }
  EXPECT_EQ(actions, 18u);
}

TEST(PnmsConfig, Validation) {
  PnmsConfig c;
  c.threshold = 1.5;
  EXPECT_ANY_THROW(c.validate());
  c = {};
  c.alpha = -1;
  EXPECT_ANY_THROW(c.validate());
  c = {};
  c.top_k = 0;
  EXPECT_ANY_THROW(c.validate());
}
