#include "cdn/decoders.hpp"

#include <cmath>

#include "cdn/error.hpp"

namespace cdn::model {

using nn::Matrix;
using nn::ParamGroup;
using nn::Var;

TransformerDecoder::TransformerDecoder(nn::ParameterStore& store, const std::string& name,
                                       ParamGroup group, int layers, int width, int heads,
                                       int ffn_dim, Rng& rng) {
  for (int l = 0; l < layers; ++l) {
    const std::string p = name + ".layer" + std::to_string(l);
    layers_.push_back({nn::Attention(store, p + ".self_attn", group, width, heads, rng),
                       nn::Attention(store, p + ".cross_attn", group, width, heads, rng),
                       nn::LayerNorm(store, p + ".norm1", group, width),
                       nn::LayerNorm(store, p + ".norm2", group, width),
                       nn::LayerNorm(store, p + ".norm3", group, width),
                       nn::FeedForward(store, p + ".ffn", group, width, ffn_dim, rng)});
  }
  out_norm_ = nn::LayerNorm(store, name + ".out_norm", group, width);
}

std::vector<Var> TransformerDecoder::forward(const Var& queries, const Var& query_pos,
                                             const Var& memory, const Matrix& memory_pos,
                                             bool skip_self_attention, AttentionMaps* maps) const {
  const Var keys = nn::add(memory, nn::constant(memory_pos));
  auto with_pos = [&](const Var& t) { return query_pos.defined() ? nn::add(t, query_pos) : t; };

  std::vector<Var> outputs;
  Var tgt = queries;
  for (const auto& layer : layers_) {
    if (!skip_self_attention) {
      const Var qk = with_pos(tgt);
      tgt = layer.norm1(nn::add(tgt, layer.self_attn(qk, qk, tgt)));
    }
    Matrix attn;
    tgt = layer.norm2(nn::add(
        tgt, layer.cross_attn(with_pos(tgt), keys, memory, maps != nullptr ? &attn : nullptr)));
    if (maps != nullptr) maps->cross.push_back(std::move(attn));
    tgt = layer.norm3(nn::add(tgt, layer.ffn(tgt)));
    outputs.push_back(out_norm_(tgt));
  }
  return outputs;
}

CascadeDecoders::CascadeDecoders(nn::ParameterStore& store, const ModelConfig& config, Rng& rng)
    : num_queries_(config.num_queries), width_(config.hidden_dim) {
  Matrix embed(config.num_queries, config.hidden_dim);
  const double limit = std::sqrt(3.0);  // unit variance
  for (Eigen::Index i = 0; i < embed.size(); ++i) embed.data()[i] = rng.uniform(-limit, limit);
  query_embed_ = store.create("pair_decoder.query_embed", ParamGroup::kPairDecoder, embed);

  pair_decoder_ = TransformerDecoder(store, "pair_decoder", ParamGroup::kPairDecoder,
                                     config.decoder_layers_ho, config.hidden_dim, config.heads,
                                     config.ffn_dim, rng);
  interaction_decoder_ = TransformerDecoder(
      store, "interaction_decoder", ParamGroup::kInteractionDecoder, config.decoder_layers_int,
      config.hidden_dim, config.heads, config.ffn_dim, rng);

  const int d = config.hidden_dim;
  human_box_head_ = nn::Mlp(store, "pair_decoder.human_box_head", ParamGroup::kPairDecoder,
                            {d, d, d, 4}, rng);
  object_box_head_ = nn::Mlp(store, "pair_decoder.object_box_head", ParamGroup::kPairDecoder,
                             {d, d, d, 4}, rng);
  object_class_head_ = nn::Linear(store, "pair_decoder.object_class_head",
                                  ParamGroup::kPairDecoder, d, config.num_object_classes + 1, rng);
  interactive_head_ =
      nn::Linear(store, "pair_decoder.interactive_head", ParamGroup::kPairDecoder, d, 1, rng);
  action_head_ = nn::Linear(store, "interaction_decoder.action_head",
                            ParamGroup::kInteractionDecoder, d, config.num_action_classes, rng);
}

QueryState CascadeDecoders::initial_queries() const {
  return {query_embed_, 0, QueryProvenance::kLearnedInit};
}

PairLayerOutput CascadeDecoders::pair_heads(const Var& queries) const {
  return {nn::sigmoid(human_box_head_(queries)), nn::sigmoid(object_box_head_(queries)),
          object_class_head_(queries), interactive_head_(queries)};
}

Var CascadeDecoders::action_head(const Var& queries) const { return action_head_(queries); }

void CascadeDecoders::check_features(const QueryState& q, const SequencedFeatures& f,
                                     const PositionalEncoding& pos) const {
  if (q.vectors.rows() != num_queries_ || q.vectors.cols() != width_) {
    throw ShapeError("decoder: expected " + std::to_string(num_queries_) + "x" +
                     std::to_string(width_) + " queries");
  }
  if (f.tokens.cols() != width_) throw ShapeError("decoder: feature width differs from C_q");
  if (pos.table.rows() != f.tokens.rows() || pos.table.cols() != f.tokens.cols()) {
    throw ShapeError("decoder: positional table does not match the feature sequence");
  }
}

std::pair<PairDetections, QueryState> CascadeDecoders::decode_pairs(
    const QueryState& queries, const SequencedFeatures& features, const PositionalEncoding& pos,
    const DecodeOptions& /*options*/, AttentionMaps* maps) const {
  if (queries.provenance != QueryProvenance::kLearnedInit) {
    throw std::invalid_argument("decode_pairs: HO-PD takes the learned queries");
  }
  check_features(queries, features, pos);
  const auto outputs = pair_decoder_.forward(queries.vectors, queries.vectors, features.tokens,
                                             pos.table, false, maps);
  PairDetections det;
  for (const auto& out : outputs) det.layers.push_back(pair_heads(out));
  QueryState handoff{outputs.back(), pair_decoder_.depth(),
                     QueryProvenance::kPairDecoderOutput};
  return {std::move(det), std::move(handoff)};
}

ActionLogits CascadeDecoders::decode_interactions(const QueryState& pair_queries,
                                                  const SequencedFeatures& features,
                                                  const PositionalEncoding& pos,
                                                  const DecodeOptions& options,
                                                  AttentionMaps* maps) const {
  if (pair_queries.provenance != QueryProvenance::kPairDecoderOutput) {
    throw std::invalid_argument(
        "decode_interactions: queries must be the HO-PD output, not learned queries");
  }
  check_features(pair_queries, features, pos);
  ActionLogits logits;
  logits.input_queries = pair_queries.vectors.value();
  const auto outputs =
      interaction_decoder_.forward(pair_queries.vectors, Var(), features.tokens, pos.table,
                                   options.ablate_interaction_self_attention, maps);
  for (const auto& out : outputs) logits.layers.push_back(action_head(out));
  return logits;
}

}  // namespace cdn::model
