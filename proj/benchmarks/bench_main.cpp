#include <benchmark/benchmark.h>

#include "cdn/config.hpp"
#include "cdn/dataio.hpp"
#include "cdn/evaluation.hpp"
#include "cdn/loss.hpp"
#include "cdn/matching.hpp"
#include "cdn/model.hpp"
#include "cdn/postproc.hpp"
#include "cdn/trainer.hpp"

using namespace cdn;
using nn::Matrix;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

ModelConfig desk_model() {
  ModelConfig m = train::TrainConfig::from_preset("desk").model;
  m.num_object_classes = 3;
  m.num_action_classes = 4;
  return m;
}

void BM_Hungarian(benchmark::State& state) {
  Rng rng(1);
  const auto rows = state.range(0), cols = state.range(1);
  const Matrix cost = random_matrix(rows, cols, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matching::hungarian_match(cost));
}
BENCHMARK(BM_Hungarian)->Args({2, 16})->Args({6, 64})->Args({20, 100});

void BM_Pnms(benchmark::State& state) {
  Rng rng(2);
  std::vector<postproc::ScoredTriplet> ts(static_cast<std::size_t>(state.range(0)));
  for (auto& t : ts) {
    t.human_box = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.2, 0.3};
    t.object_box = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.1, 0.1};
    t.object_class = rng.uniform_int(0, 2);
    t.action = rng.uniform_int(0, 3);
    t.score = rng.uniform();
  }
  postproc::PnmsConfig cfg;
  cfg.top_k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(postproc::pnms(ts, cfg));
}
BENCHMARK(BM_Pnms)->Arg(64)->Arg(100)->Arg(600);

void BM_ForwardDesk(benchmark::State& state) {
  model::CdnModel m(desk_model(), 3);
  Rng rng(3);
  const Matrix img = random_matrix(64 * 64, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(img, 64, 64));
}
BENCHMARK(BM_ForwardDesk)->Unit(benchmark::kMillisecond);

void BM_TrainStepDesk(benchmark::State& state) {
  model::CdnModel m(desk_model(), 4);
  Rng rng(4);
  const Matrix img = random_matrix(64 * 64, 3, rng);
  const std::vector<matching::Target> targets{{{0.3, 0.4, 0.2, 0.3}, {0.6, 0.5, 0.1, 0.1}, 1, {2}}};
  matching::Assignment a;
  a.gt_to_query = {0};
  const auto cw = loss::ClassWeights::uniform(3, 4);
  for (auto _ : state) {
    m.parameters().zero_grad();
    const auto out = m.forward(img, 64, 64);
    nn::backward(loss::compute_loss(out.pairs, out.actions, targets, a, {}, cw).total);
  }
}
BENCHMARK(BM_TrainStepDesk)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  data::SceneSpec spec;
  spec.num_images = static_cast<int>(state.range(0));
  const auto ds = data::generate_dataset(spec, 5);
  Rng rng(5);
  data::PredictionSet preds;
  preds.vocab = ds.annotations.vocab;
  for (const auto& img : ds.annotations.images) {
    for (const auto& h : img.hois) {
      for (int k = 0; k < 8; ++k) {
        data::HoiInstance p = h;
        p.human_box.x1 += rng.uniform(-3, 3);
        p.object_box.x2 += rng.uniform(-3, 3);
        p.action_scores = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        p.object_score = rng.uniform();
        p.interactive_score = rng.uniform();
        preds.predictions.push_back(p);
      }
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate(preds, ds.annotations, ds.classes));
}
BENCHMARK(BM_Evaluate)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
