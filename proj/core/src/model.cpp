#include "cdn/model.hpp"

namespace cdn::model {

CdnModel::CdnModel(const ModelConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)),
      init_rng_(seed),
      extractor_(store_, config_, init_rng_),
      decoders_(store_, config_, init_rng_) {}

ModelOutput CdnModel::forward(const nn::Matrix& image, int height, int width,
                              const ForwardOptions& options) const {
  auto [features, pos] = extractor_.extract(image, height, width);
  return decode(std::move(features), std::move(pos), options);
}

ModelOutput CdnModel::decode(SequencedFeatures features, PositionalEncoding pos,
                             const ForwardOptions& options) const {
  ModelOutput out;
  out.features = std::move(features);
  out.pos = std::move(pos);
  AttentionMaps* pair_maps = options.record_attention ? &out.pair_attention : nullptr;
  AttentionMaps* int_maps = options.record_attention ? &out.interaction_attention : nullptr;

  auto [pairs, handoff] =
      decoders_.decode_pairs(decoders_.initial_queries(), out.features, out.pos, options, pair_maps);
  out.pairs = std::move(pairs);
  out.handoff = std::move(handoff);
  QueryState into_interaction = out.handoff;
  if (options.detach_handoff) into_interaction.vectors = nn::detach(out.handoff.vectors);
  out.actions =
      decoders_.decode_interactions(into_interaction, out.features, out.pos, options, int_maps);
  return out;
}

}  // namespace cdn::model
