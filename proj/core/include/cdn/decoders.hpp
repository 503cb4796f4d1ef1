#pragma once

#include <vector>

#include "cdn/autograd.hpp"
#include "cdn/backbone.hpp"
#include "cdn/layers.hpp"
#include "cdn/model_config.hpp"

namespace cdn::model {

enum class QueryProvenance { kLearnedInit, kPairDecoderOutput };

/// N_d query vectors of width C_q entering or leaving a decoder.
struct QueryState {
  nn::Var vectors;
  int layer = 0;
  QueryProvenance provenance = QueryProvenance::kLearnedInit;
};

/// Head outputs of one HO-PD layer, one row per query. Boxes are sigmoid
/// (cx, cy, w, h); object logits have C_o + 1 columns, the last being
/// "no object".
struct PairLayerOutput {
  nn::Var human_boxes;
  nn::Var object_boxes;
  nn::Var object_logits;
  nn::Var interactive_logits;
};

struct PairDetections {
  std::vector<PairLayerOutput> layers;
  const PairLayerOutput& final_layer() const { return layers.back(); }
};

struct ActionLogits {
  std::vector<nn::Var> layers;  // (N_d, C_a) each
  /// Exactly what the first interaction-decoder layer received.
  nn::Matrix input_queries;
  const nn::Var& final_layer() const { return layers.back(); }
};

struct DecodeOptions {
  /// Record head-averaged cross-attention of every layer.
  bool record_attention = false;
  /// Replace the interaction decoder's self-attention block by identity.
  bool ablate_interaction_self_attention = false;
};

/// Per-layer head-averaged cross-attention, (N_d, H' * W') each.
struct AttentionMaps {
  std::vector<nn::Matrix> cross;
};

/// Stack of post-norm decoder layers (self-attention, co-attention with the
/// memory, feed-forward) sharing one output LayerNorm.
class TransformerDecoder {
 public:
  TransformerDecoder() = default;
  TransformerDecoder(nn::ParameterStore& store, const std::string& name, nn::ParamGroup group,
                     int layers, int width, int heads, int ffn_dim, Rng& rng);

  /// Returns the normalized output of every layer. `query_pos` may be
  /// undefined.
  std::vector<nn::Var> forward(const nn::Var& queries, const nn::Var& query_pos,
                               const nn::Var& memory, const nn::Matrix& memory_pos,
                               bool skip_self_attention, AttentionMaps* maps) const;

  int depth() const { return static_cast<int>(layers_.size()); }

 private:
  struct Layer {
    nn::Attention self_attn, cross_attn;
    nn::LayerNorm norm1, norm2, norm3;
    nn::FeedForward ffn;
  };
  std::vector<Layer> layers_;
  nn::LayerNorm out_norm_;
};

/// HO-PD and the interaction decoder with their shared-per-decoder FFN heads.
class CascadeDecoders {
 public:
  CascadeDecoders(nn::ParameterStore& store, const ModelConfig& config, Rng& rng);

  /// The learned HO queries Q_d.
  QueryState initial_queries() const;

  /// HO-PD. Requires learned-init queries; returns per-layer pair outputs
  /// and Q_d^out (the last layer's output).
  std::pair<PairDetections, QueryState> decode_pairs(const QueryState& queries,
                                                     const SequencedFeatures& features,
                                                     const PositionalEncoding& pos,
                                                     const DecodeOptions& options = {},
                                                     AttentionMaps* maps = nullptr) const;

  /// Interaction decoder initialized one-to-one from Q_d^out. Rejects
  /// queries that did not come out of HO-PD.
  ActionLogits decode_interactions(const QueryState& pair_queries,
                                   const SequencedFeatures& features,
                                   const PositionalEncoding& pos,
                                   const DecodeOptions& options = {},
                                   AttentionMaps* maps = nullptr) const;

  /// Box (3 affine + ReLU, then sigmoid), object class, and interactive heads.
  PairLayerOutput pair_heads(const nn::Var& queries) const;
  /// Single affine layer to C_a logits.
  nn::Var action_head(const nn::Var& queries) const;

 private:
  void check_features(const QueryState& q, const SequencedFeatures& f,
                      const PositionalEncoding& pos) const;

  int num_queries_;
  int width_;
  nn::Var query_embed_;
  TransformerDecoder pair_decoder_;
  TransformerDecoder interaction_decoder_;
  nn::Mlp human_box_head_, object_box_head_;
  nn::Linear object_class_head_, interactive_head_, action_head_;
};

}  // namespace cdn::model
