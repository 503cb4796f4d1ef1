#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cdn/checkpoint.hpp"
#include "cdn/dataio.hpp"
#include "cdn/evaluation.hpp"

namespace cdn::train {

struct EpochLog {
  Phase phase = Phase::kMain;
  int epoch = 0;  // 0-based within the phase
  double learning_rate = 0.0;
  double loss = 0.0;  // mean per-image total
  double box = 0.0;   // mean L1 over both boxes
  double giou = 0.0;
  double interactive = 0.0;
  double object = 0.0;
  double action = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm over steps
};

struct RunOptions {
  /// Called after every epoch.
  std::function<void(const EpochLog&)> on_epoch;
  /// Where a non-finite loss dumps its offending batch; empty skips the dump.
  std::filesystem::path diagnostics_dir;
};

/// Fills class counts left at 0 from the dataset vocabulary and checks the
/// rest against it. Throws ConfigError on a mismatch.
TrainConfig resolve_config(TrainConfig config, const data::Dataset& dataset);

/// Regular training from scratch (phase main). Throws NumericalError on a
/// non-finite loss or gradient.
Checkpoint train(const TrainConfig& config, const data::Dataset& dataset,
                 const RunOptions& options = {});

/// Decoupled fine-tuning: the extractor is frozen, decoders and heads are
/// trained with dynamically re-weighted classification losses. Optimizer
/// state starts afresh. Warns on stderr when given a decouple-phase
/// checkpoint.
Checkpoint finetune_reweight(Checkpoint checkpoint, const TrainConfig& config,
                             const data::Dataset& dataset, const RunOptions& options = {});

/// Post-processed predictions for every image of the dataset.
data::PredictionSet infer(const model::CdnModel& model, const postproc::PnmsConfig& pnms,
                          const data::Dataset& dataset);

/// Convenience: infer, then evaluate against the dataset's own annotations.
eval::EvalResult evaluate_model(const model::CdnModel& model, const postproc::PnmsConfig& pnms,
                                const data::Dataset& dataset);

/// Head-averaged cross-attention of the top-1 query in the last layer of
/// each decoder, reshaped to the feature grid.
struct AttentionDump {
  std::string image_id;
  int query = 0;
  int height = 0;
  int width = 0;
  nn::Matrix pair_map;         // (H', W')
  nn::Matrix interaction_map;  // (H', W')
};

AttentionDump attention_maps(const model::CdnModel& model, const data::Image& image,
                             const std::string& image_id);

/// Writes <image_id>_hopd.pfm and <image_id>_interaction.pfm per image and
/// returns the written paths.
std::vector<std::filesystem::path> dump_attention(const model::CdnModel& model,
                                                  const data::Dataset& dataset,
                                                  const std::filesystem::path& out_dir);

/// Grayscale little-endian PFM.
void write_pfm(const std::filesystem::path& path, const nn::Matrix& map);
nn::Matrix read_pfm(const std::filesystem::path& path);

/// Training targets of one annotated image, boxes normalized to [0, 1].
std::vector<matching::Target> make_targets(const data::ImageAnnotation& image);

}  // namespace cdn::train
