#pragma once

#include <filesystem>
#include <memory>

#include "cdn/config.hpp"
#include "cdn/model.hpp"
#include "cdn/optimizer.hpp"

namespace cdn::train {

/// A model with its optimizer state and training position.
struct Checkpoint {
  TrainConfig config;
  std::unique_ptr<model::CdnModel> model;
  std::unique_ptr<AdamW> optimizer;
  /// Epochs completed in `phase`.
  int epoch = 0;
  Phase phase = Phase::kMain;

  /// Freshly initialized from config.seed. The config must name its class
  /// counts.
  static Checkpoint fresh(const TrainConfig& config);
};

/// Binary file: magic, JSON metadata, then raw little-endian doubles for
/// every parameter followed by the Adam moments.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Rebuilds the model from the stored config. Throws DataError on a
/// malformed file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, but the stored architecture must match `expected`'s model
/// fingerprint (ConfigError otherwise). The returned config is `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected);

}  // namespace cdn::train
