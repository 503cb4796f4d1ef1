#pragma once

#include <string>
#include <vector>

#include "cdn/autograd.hpp"
#include "cdn/layers.hpp"
#include "cdn/model_config.hpp"

namespace cdn::model {

/// Flattened encoder output X_s: (height * width, D_c) tokens.
struct SequencedFeatures {
  nn::Var tokens;
  int height = 0;
  int width = 0;
  std::string image_id;
};

/// Fixed 2-D sine/cosine table E_pos of shape (height * width, dim).
struct PositionalEncoding {
  nn::Matrix table;
  int height = 0;
  int width = 0;
};

/// Normalized 2-D sine encoding: the first dim/2 columns encode the row,
/// the rest the column, alternating sin/cos over geometric frequencies.
/// Throws ShapeError unless dim is a positive multiple of 4.
PositionalEncoding positional_encoding(int height, int width, int dim);

/// (H * W, 3) matrix of RGB values in [0, 1].
nn::Matrix image_to_matrix(const std::vector<unsigned char>& rgb, int width, int height);

/// CNN -> 1x1 projection -> flatten -> transformer encoder.
class FeatureExtractor {
 public:
  FeatureExtractor(nn::ParameterStore& store, const ModelConfig& config, Rng& rng);

  /// `image` is (H * W, 3). Throws ShapeError when H or W is not a multiple
  /// of the backbone stride or the channel count is wrong.
  std::pair<SequencedFeatures, PositionalEncoding> extract(const nn::Matrix& image, int height,
                                                           int width,
                                                           const std::string& image_id = "") const;

  /// Backbone and projection only: X_v before the encoder.
  nn::Var project(const nn::Matrix& image, int height, int width) const;

  /// Transformer encoder over a token sequence with its positional table.
  nn::Var encode(const nn::Var& tokens, const nn::Matrix& pos) const;

  int stride() const { return stride_; }

 private:
  struct EncoderLayer {
    nn::Attention self_attn;
    nn::LayerNorm norm1, norm2;
    nn::FeedForward ffn;
  };

  std::vector<nn::Linear> convs_;
  nn::Linear projection_;
  std::vector<EncoderLayer> layers_;
  int stride_ = 1;
  int hidden_dim_ = 0;
};

}  // namespace cdn::model
