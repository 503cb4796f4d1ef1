#include "cdn/backbone.hpp"

#include <cmath>
#include <numbers>

#include "cdn/error.hpp"

namespace cdn::model {

using nn::Matrix;
using nn::ParamGroup;
using nn::Var;

PositionalEncoding positional_encoding(int height, int width, int dim) {
  if (dim <= 0 || dim % 4 != 0) {
    throw ShapeError("positional_encoding: dim " + std::to_string(dim) +
                     " is not a positive multiple of 4");
  }
  if (height <= 0 || width <= 0) throw ShapeError("positional_encoding: empty grid");
  const int half = dim / 2;
  constexpr double kTemperature = 10000.0;
  constexpr double kScale = 2.0 * std::numbers::pi;
  PositionalEncoding pe{Matrix(static_cast<Eigen::Index>(height) * width, dim), height, width};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Index row = static_cast<Eigen::Index>(y) * width + x;
      const double ey = (y + 1.0) / height * kScale;
      const double ex = (x + 1.0) / width * kScale;
      for (int j = 0; j < half; ++j) {
        const double freq = std::pow(kTemperature, 2.0 * (j / 2) / half);
        const bool odd = (j % 2) != 0;
        pe.table(row, j) = odd ? std::cos(ey / freq) : std::sin(ey / freq);
        pe.table(row, half + j) = odd ? std::cos(ex / freq) : std::sin(ex / freq);
      }
    }
  }
  return pe;
}

Matrix image_to_matrix(const std::vector<unsigned char>& rgb, int width, int height) {
  Matrix m(static_cast<Eigen::Index>(width) * height, 3);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int c = 0; c < 3; ++c) m(i, c) = rgb[static_cast<std::size_t>(i) * 3 + c] / 255.0;
  }
  return m;
}

FeatureExtractor::FeatureExtractor(nn::ParameterStore& store, const ModelConfig& config,
                                   Rng& rng)
    : hidden_dim_(config.hidden_dim) {
  int in = 3;
  for (std::size_t i = 0; i < config.channels.size(); ++i) {
    convs_.emplace_back(store, "backbone.conv" + std::to_string(i), ParamGroup::kExtractor,
                        9 * in, config.channels[i], rng);
    in = config.channels[i];
    stride_ *= 2;
  }
  projection_ = nn::Linear(store, "backbone.projection", ParamGroup::kExtractor, in,
                           config.hidden_dim, rng);
  for (int l = 0; l < config.encoder_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l);
    layers_.push_back({nn::Attention(store, p + ".self_attn", ParamGroup::kExtractor,
                                     config.hidden_dim, config.heads, rng),
                       nn::LayerNorm(store, p + ".norm1", ParamGroup::kExtractor,
                                     config.hidden_dim),
                       nn::LayerNorm(store, p + ".norm2", ParamGroup::kExtractor,
                                     config.hidden_dim),
                       nn::FeedForward(store, p + ".ffn", ParamGroup::kExtractor,
                                       config.hidden_dim, config.ffn_dim, rng)});
  }
}

Var FeatureExtractor::project(const Matrix& image, int height, int width) const {
  if (height % stride_ != 0 || width % stride_ != 0) {
    throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by the backbone stride " + std::to_string(stride_));
  }
  if (image.cols() != 3 || image.rows() != static_cast<Eigen::Index>(height) * width) {
    throw ShapeError("image matrix must be (H*W, 3)");
  }
  Var x = nn::constant(image);
  int h = height, w = width;
  for (const auto& conv : convs_) {
    x = nn::relu(conv(nn::im2col(x, h, w, 3, 2, 1)));
    h /= 2;
    w /= 2;
  }
  return projection_(x);
}

Var FeatureExtractor::encode(const Var& tokens, const Matrix& pos) const {
  if (tokens.cols() != hidden_dim_ || pos.rows() != tokens.rows() || pos.cols() != hidden_dim_) {
    throw ShapeError("encoder: tokens and positional table disagree");
  }
  const Var pos_v = nn::constant(pos);
  Var x = tokens;
  for (const auto& layer : layers_) {
    const Var qk = nn::add(x, pos_v);
    x = layer.norm1(nn::add(x, layer.self_attn(qk, qk, x)));
    x = layer.norm2(nn::add(x, layer.ffn(x)));
  }
  return x;
}

std::pair<SequencedFeatures, PositionalEncoding> FeatureExtractor::extract(
    const Matrix& image, int height, int width, const std::string& image_id) const {
  const Var projected = project(image, height, width);
  auto pos = positional_encoding(height / stride_, width / stride_, hidden_dim_);
  SequencedFeatures feats{encode(projected, pos.table), pos.height, pos.width, image_id};
  return {std::move(feats), std::move(pos)};
}

}  // namespace cdn::model
