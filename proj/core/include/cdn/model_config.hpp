#pragma once

#include <string>
#include <vector>

namespace cdn {

/// Architecture sizes. `hidden_dim` is both D_c and the query width C_q.
struct ModelConfig {
  int image_size = 64;
  int stride = 8;
  std::vector<int> channels = {16, 32, 64};
  int hidden_dim = 64;
  int encoder_layers = 2;
  int heads = 4;
  int ffn_dim = 128;
  int num_queries = 16;
  int decoder_layers_ho = 2;
  int decoder_layers_int = 2;
  int num_object_classes = 0;
  int num_action_classes = 0;

  int feature_size() const { return image_size / stride; }
  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace cdn
