#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cdn/matching.hpp"
#include "cdn/model_config.hpp"
#include "cdn/postproc.hpp"
#include "cdn/reweighting.hpp"

namespace cdn::train {

enum class Phase { kMain, kDecouple };

const char* phase_name(Phase p);

/// Everything one run needs. Loaded from a JSON file whose sections
/// ("model", "train", "loss", "reweight", "postproc") override the named
/// preset; unknown keys are rejected.
struct TrainConfig {
  std::string preset = "desk";
  ModelConfig model;

  int epochs_main = 300;
  int lr_drop_epoch = 200;
  double lr_main = 1e-3;
  int epochs_decouple = 10;
  double lr_decouple = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 8;
  std::uint64_t seed = 0;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.1;

  matching::LossWeights loss;
  reweight::ReweightConfig reweight;
  postproc::PnmsConfig pnms;

  /// "desk", "cdn-s" or "cdn-b". Throws ConfigError for other names.
  static TrainConfig from_preset(const std::string& name);

  /// Learning rate of `phase` during `epoch` (0-based): the main phase drops
  /// tenfold from lr_drop_epoch on.
  double learning_rate(Phase phase, int epoch) const;

  /// Throws ConfigError.
  void validate() const;

  /// Stable hash of the architecture; checkpoints refuse to load into a
  /// different one.
  std::string model_fingerprint() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

TrainConfig parse_config(const std::string& json_text, const std::string& origin = "<string>");
TrainConfig load_config(const std::filesystem::path& path);
/// Canonical JSON, accepted by parse_config.
std::string to_json(const TrainConfig& config);

}  // namespace cdn::train
