#include "cdn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "cdn/error.hpp"
#include "cdn/loss.hpp"
#include "cdn/postproc.hpp"
#include "cdn/reweighting.hpp"
#include "json.hpp"

namespace cdn::train {

namespace {

struct Sample {
  std::string id;
  nn::Matrix image;
  int width = 0;
  int height = 0;
  std::vector<matching::Target> targets;
};

std::vector<Sample> prepare(const data::Dataset& dataset) {
  const auto& ann = dataset.annotations.images;
  if (ann.size() != dataset.images.size()) {
    throw ConfigError("dataset has " + std::to_string(ann.size()) + " annotations but " +
                      std::to_string(dataset.images.size()) + " images");
  }
  std::vector<Sample> out;
  out.reserve(ann.size());
  for (std::size_t i = 0; i < ann.size(); ++i) {
    const auto& img = dataset.images[i];
    out.push_back({ann[i].image_id, model::image_to_matrix(img.rgb, img.width, img.height),
                   img.width, img.height, make_targets(ann[i])});
  }
  return out;
}

matching::Assignment assign(const model::ModelOutput& out,
                            std::span<const matching::Target> targets,
                            const matching::LossWeights& weights) {
  const auto& fin = out.pairs.final_layer();
  if (targets.empty()) {
    matching::Assignment a;
    a.unmatched_queries.resize(static_cast<std::size_t>(fin.human_boxes.rows()));
    std::iota(a.unmatched_queries.begin(), a.unmatched_queries.end(), 0);
    return a;
  }
  const matching::PredictionView view{fin.human_boxes.value(), fin.object_boxes.value(),
                                      fin.object_logits.value(), fin.interactive_logits.value(),
                                      out.actions.final_layer().value()};
  return matching::hungarian_match(matching::build_cost_matrix(view, targets, weights));
}

bool finite_heads(const model::ModelOutput& out) {
  const auto& fin = out.pairs.final_layer();
  return fin.human_boxes.value().allFinite() && fin.object_boxes.value().allFinite() &&
         fin.object_logits.value().allFinite() && fin.interactive_logits.value().allFinite() &&
         out.actions.final_layer().value().allFinite();
}

std::uint64_t epoch_seed(std::uint64_t seed, Phase phase, int epoch) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1));
  return phase == Phase::kMain ? x : ~x;
}

void dump_batch(const std::filesystem::path& dir, Phase phase, int epoch, std::size_t batch,
                double lr, const std::vector<const Sample*>& samples,
                const std::vector<loss::LossBreakdown>& breakdowns, const std::string& reason) {
  using nlohmann::json;
  json images = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    json targets = json::array();
    for (const auto& t : samples[i]->targets) {
      targets.push_back({{"human_box", {t.human_box.cx, t.human_box.cy, t.human_box.w, t.human_box.h}},
                         {"object_box", {t.object_box.cx, t.object_box.cy, t.object_box.w, t.object_box.h}},
                         {"object_class", t.object_class},
                         {"actions", t.actions}});
    }
    json layers = json::array();
    if (i < breakdowns.size()) {
      for (const auto& l : breakdowns[i].layers) {
        // NaN is not representable in JSON; keep it as text.
        auto num = [](double v) { return std::isfinite(v) ? json(v) : json(std::to_string(v)); };
        layers.push_back({{"box_human", num(l.box_human)},
                          {"box_object", num(l.box_object)},
                          {"giou_human", num(l.giou_human)},
                          {"giou_object", num(l.giou_object)},
                          {"interactive", num(l.interactive)},
                          {"object_class", num(l.object_class)},
                          {"action_class", num(l.action_class)},
                          {"total", num(l.total)}});
      }
    }
    images.push_back({{"image_id", samples[i]->id}, {"targets", targets}, {"layers", layers}});
  }
  const json doc = {{"reason", reason}, {"phase", phase_name(phase)}, {"epoch", epoch},
                    {"batch", batch},   {"learning_rate", lr},      {"images", images}};
  std::filesystem::create_directories(dir);
  char name[96];
  std::snprintf(name, sizeof name, "nonfinite_%s_epoch%d_batch%zu.json", phase_name(phase), epoch,
                batch);
  std::ofstream(dir / name) << doc.dump(2) << '\n';
}

using ForwardFn = std::function<model::ModelOutput(std::size_t)>;
using WeightsFn = std::function<loss::ClassWeights(std::size_t, const matching::Assignment&)>;

/// Runs `epochs` epochs of mini-batch training over `samples`.
void run_phase(const TrainConfig& cfg, Phase phase, AdamW& opt, nn::ParameterStore& params,
               const std::vector<Sample>& samples, const ForwardFn& forward,
               const WeightsFn& class_weights, int epochs, const RunOptions& options) {
  const std::size_t n = samples.size();
  if (n == 0) throw ConfigError("training set is empty");
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = cfg.learning_rate(phase, epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(epoch_seed(cfg.seed, phase, epoch));
    rng.shuffle(order);

    EpochLog log;
    log.phase = phase;
    log.epoch = epoch;
    log.learning_rate = lr;
    std::size_t steps = 0;
    for (std::size_t start = 0, batch = 0; start < n; start += batch_size, ++batch) {
      const std::size_t stop = std::min(n, start + batch_size);
      params.zero_grad();
      std::vector<const Sample*> members;
      std::vector<loss::LossBreakdown> breakdowns;
      for (std::size_t j = start; j < stop; ++j) {
        const Sample& s = samples[order[j]];
        members.push_back(&s);
        const model::ModelOutput out = forward(order[j]);
        if (!finite_heads(out)) {
          if (!options.diagnostics_dir.empty()) {
            dump_batch(options.diagnostics_dir, phase, epoch, batch, lr, members, breakdowns,
                       "non-finite model output");
          }
          throw NumericalError("non-finite model output on image '" + s.id + "' (" +
                               phase_name(phase) + " epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch) + ")");
        }
        const matching::Assignment a = assign(out, s.targets, cfg.loss);
        const loss::ClassWeights cw = class_weights(order[j], a);
        loss::LossResult res = loss::compute_loss(out.pairs, out.actions, s.targets, a, cfg.loss, cw);
        breakdowns.push_back(res.breakdown);
        if (!std::isfinite(res.breakdown.total)) {
          if (!options.diagnostics_dir.empty()) {
            dump_batch(options.diagnostics_dir, phase, epoch, batch, lr, members, breakdowns,
                       "non-finite loss");
          }
          throw NumericalError("non-finite loss on image '" + s.id + "' (" + phase_name(phase) +
                               " epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch) + ")");
        }
        nn::backward(res.total);
        log.loss += res.breakdown.total;
        const double layers = static_cast<double>(res.breakdown.layers.size());
        for (const auto& l : res.breakdown.layers) {
          log.box += (l.box_human + l.box_object) / layers;
          log.giou += (l.giou_human + l.giou_object) / layers;
          log.interactive += l.interactive / layers;
          log.object += l.object_class / layers;
          log.action += l.action_class / layers;
        }
      }
      try {
        log.grad_norm += opt.step(lr, 1.0 / static_cast<double>(stop - start), cfg.grad_clip);
      } catch (const NumericalError&) {
        if (!options.diagnostics_dir.empty()) {
          dump_batch(options.diagnostics_dir, phase, epoch, batch, lr, members, breakdowns,
                     "non-finite gradient");
        }
        throw;
      }
      ++steps;
    }
    params.zero_grad();
    const double dn = static_cast<double>(n);
    log.loss /= dn;
    log.box /= dn;
    log.giou /= dn;
    log.interactive /= dn;
    log.object /= dn;
    log.action /= dn;
    log.grad_norm /= static_cast<double>(steps);
    if (options.on_epoch) options.on_epoch(log);
  }
}

postproc::HeadValues head_values(const model::ModelOutput& out) {
  const auto& fin = out.pairs.final_layer();
  return {fin.human_boxes.value(), fin.object_boxes.value(), fin.object_logits.value(),
          fin.interactive_logits.value(), out.actions.final_layer().value()};
}

}  // namespace

std::vector<matching::Target> make_targets(const data::ImageAnnotation& image) {
  std::vector<matching::Target> out;
  out.reserve(image.hois.size());
  for (const auto& h : image.hois) {
    out.push_back({from_corners(h.human_box, image.width, image.height),
                   from_corners(h.object_box, image.width, image.height), h.object_class,
                   h.actions});
  }
  return out;
}

TrainConfig resolve_config(TrainConfig config, const data::Dataset& dataset) {
  const auto& v = dataset.annotations.vocab;
  auto fill = [](int& slot, int value, const char* name) {
    if (slot == 0) slot = value;
    else if (slot != value) {
      throw ConfigError(std::string("config sets ") + name + "=" + std::to_string(slot) +
                        " but the dataset has " + std::to_string(value));
    }
  };
  fill(config.model.num_object_classes, v.num_object_classes, "num_object_classes");
  fill(config.model.num_action_classes, v.num_action_classes, "num_action_classes");
  for (const auto& img : dataset.images) {
    if (img.width != config.model.image_size || img.height != config.model.image_size) {
      throw ConfigError("dataset image is " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + " but the model expects " +
                        std::to_string(config.model.image_size) + "x" +
                        std::to_string(config.model.image_size));
    }
  }
  config.validate();
  return config;
}

Checkpoint train(const TrainConfig& config, const data::Dataset& dataset,
                 const RunOptions& options) {
  const TrainConfig cfg = resolve_config(config, dataset);
  Checkpoint ckpt = Checkpoint::fresh(cfg);
  const auto samples = prepare(dataset);
  const model::CdnModel& net = *ckpt.model;
  const auto uniform = loss::ClassWeights::uniform(cfg.model.num_object_classes,
                                                   cfg.model.num_action_classes);
  run_phase(
      cfg, Phase::kMain, *ckpt.optimizer, ckpt.model->parameters(), samples,
      [&](std::size_t i) {
        return net.forward(samples[i].image, samples[i].height, samples[i].width);
      },
      [&](std::size_t, const matching::Assignment&) { return uniform; }, cfg.epochs_main,
      options);
  ckpt.epoch = cfg.epochs_main;
  ckpt.phase = Phase::kMain;
  return ckpt;
}

Checkpoint finetune_reweight(Checkpoint checkpoint, const TrainConfig& config,
                             const data::Dataset& dataset, const RunOptions& options) {
  const TrainConfig cfg = resolve_config(config, dataset);
  if (cfg.model_fingerprint() != checkpoint.config.model_fingerprint()) {
    throw ConfigError("checkpoint model fingerprint " + checkpoint.config.model_fingerprint() +
                      " does not match the config's " + cfg.model_fingerprint());
  }
  if (checkpoint.phase != Phase::kMain) {
    std::cerr << "warning: fine-tuning from a decouple-phase checkpoint\n";
  }
  checkpoint.config = cfg;
  auto& params = checkpoint.model->parameters();
  params.set_trainable(nn::ParamGroup::kExtractor, false);
  checkpoint.optimizer = std::make_unique<AdamW>(params, AdamOptions{.weight_decay = cfg.weight_decay});

  const auto samples = prepare(dataset);
  const model::CdnModel& net = *checkpoint.model;
  std::vector<std::pair<model::SequencedFeatures, model::PositionalEncoding>> cache;
  cache.reserve(samples.size());
  for (const auto& s : samples) {
    cache.push_back(net.extractor().extract(s.image, s.height, s.width, s.id));
  }

  reweight::DynamicReweighter reweighter(cfg.reweight, dataset.annotations,
                                         cfg.model.num_queries);
  const auto uniform = loss::ClassWeights::uniform(cfg.model.num_object_classes,
                                                   cfg.model.num_action_classes);
  const bool dynamic = cfg.reweight.reweight_objects || cfg.reweight.reweight_actions;
  run_phase(
      cfg, Phase::kDecouple, *checkpoint.optimizer, params, samples,
      [&](std::size_t i) { return net.decode(cache[i].first, cache[i].second); },
      [&](std::size_t i, const matching::Assignment& a) {
        if (!dynamic) return uniform;
        std::vector<int> objects;
        std::vector<int> actions;
        for (const auto& t : samples[i].targets) {
          objects.push_back(t.object_class);
          actions.insert(actions.end(), t.actions.begin(), t.actions.end());
        }
        reweighter.observe(objects, actions,
                           static_cast<std::int64_t>(a.unmatched_queries.size()));
        return reweighter.current();
      },
      cfg.epochs_decouple, options);

  params.set_trainable(nn::ParamGroup::kExtractor, true);
  checkpoint.epoch = cfg.epochs_decouple;
  checkpoint.phase = Phase::kDecouple;
  return checkpoint;
}

data::PredictionSet infer(const model::CdnModel& model, const postproc::PnmsConfig& pnms,
                          const data::Dataset& dataset) {
  const auto samples = prepare(dataset);
  data::PredictionSet out;
  out.vocab = dataset.annotations.vocab;
  for (const auto& s : samples) {
    const auto res = model.forward(s.image, s.height, s.width);
    auto preds = postproc::predict_image(head_values(res), pnms, s.id, s.width, s.height);
    out.predictions.insert(out.predictions.end(), std::make_move_iterator(preds.begin()),
                           std::make_move_iterator(preds.end()));
  }
  return out;
}

eval::EvalResult evaluate_model(const model::CdnModel& model, const postproc::PnmsConfig& pnms,
                                const data::Dataset& dataset) {
  return eval::evaluate(infer(model, pnms, dataset), dataset.annotations, dataset.classes);
}

AttentionDump attention_maps(const model::CdnModel& model, const data::Image& image,
                             const std::string& image_id) {
  model::ForwardOptions opts;
  opts.record_attention = true;
  const auto out = model.forward(model::image_to_matrix(image.rgb, image.width, image.height),
                                 image.height, image.width, opts);
  const auto triplets = postproc::compose_triplets(head_values(out));
  int best = 0;
  double best_score = -1.0;
  for (const auto& t : triplets) {
    if (t.score > best_score) {
      best_score = t.score;
      best = t.query;
    }
  }
  AttentionDump d;
  d.image_id = image_id;
  d.query = best;
  d.height = out.features.height;
  d.width = out.features.width;
  auto grid = [&](const nn::Matrix& layer) {
    const nn::Matrix row = layer.row(best);
    return nn::Matrix(Eigen::Map<const nn::Matrix>(row.data(), d.height, d.width));
  };
  d.pair_map = grid(out.pair_attention.cross.back());
  d.interaction_map = grid(out.interaction_attention.cross.back());
  return d;
}

std::vector<std::filesystem::path> dump_attention(const model::CdnModel& model,
                                                  const data::Dataset& dataset,
                                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const auto& id = dataset.annotations.images.at(i).image_id;
    const auto d = attention_maps(model, dataset.images[i], id);
    written.push_back(out_dir / (id + "_hopd.pfm"));
    write_pfm(written.back(), d.pair_map);
    written.push_back(out_dir / (id + "_interaction.pfm"));
    write_pfm(written.back(), d.interaction_map);
  }
  return written;
}

void write_pfm(const std::filesystem::path& path, const nn::Matrix& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "Pf\n" << map.cols() << ' ' << map.rows() << "\n-1.0\n";
  // PFM stores rows bottom to top.
  for (Eigen::Index r = map.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < map.cols(); ++c) {
      const float v = static_cast<float>(map(r, c));
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

nn::Matrix read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  Eigen::Index w = 0, h = 0;
  double scale = 0.0;
  if (!(in >> magic >> w >> h >> scale) || magic != "Pf" || w <= 0 || h <= 0 || scale >= 0.0) {
    throw DataError(path.string(), 1, "header", "expected a little-endian grayscale PFM");
  }
  in.get();
  nn::Matrix m(h, w);
  for (Eigen::Index r = h - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      float v = 0.0f;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw DataError(path.string(), 0, "data", "truncated");
      }
      m(r, c) = v;
    }
  }
  return m;
}

}  // namespace cdn::train
