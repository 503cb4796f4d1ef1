#pragma once

#include <cstdint>

#include "cdn/backbone.hpp"
#include "cdn/decoders.hpp"
#include "cdn/layers.hpp"
#include "cdn/model_config.hpp"

namespace cdn::model {

struct ForwardOptions : DecodeOptions {
  /// Cut the HO-PD -> interaction decoder hand-off from the graph.
  bool detach_handoff = false;
};

struct ModelOutput {
  SequencedFeatures features;
  PositionalEncoding pos;
  PairDetections pairs;
  QueryState handoff;
  ActionLogits actions;
  AttentionMaps pair_attention;
  AttentionMaps interaction_attention;
};

/// Feature extractor followed by the two cascade decoders.
class CdnModel {
 public:
  CdnModel(const ModelConfig& config, std::uint64_t seed);

  ModelOutput forward(const nn::Matrix& image, int height, int width,
                      const ForwardOptions& options = {}) const;

  /// Decoders only, on features computed elsewhere (e.g. cached while the
  /// extractor is frozen).
  ModelOutput decode(SequencedFeatures features, PositionalEncoding pos,
                     const ForwardOptions& options = {}) const;

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const FeatureExtractor& extractor() const { return extractor_; }
  const CascadeDecoders& decoders() const { return decoders_; }

 private:
  ModelConfig config_;
  nn::ParameterStore store_;
  Rng init_rng_;
  FeatureExtractor extractor_;
  CascadeDecoders decoders_;
};

}  // namespace cdn::model
