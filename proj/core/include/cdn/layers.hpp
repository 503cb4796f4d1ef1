#pragma once

#include <string>
#include <vector>

#include "cdn/autograd.hpp"
#include "cdn/random.hpp"

namespace cdn::nn {

/// Which part of the network a parameter belongs to. The decoupled
/// fine-tuning phase freezes the extractor group.
enum class ParamGroup { kExtractor, kPairDecoder, kInteractionDecoder };

const char* group_name(ParamGroup g);

class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ParamGroup group;
    Var var;
  };

  Var create(std::string name, ParamGroup group, Matrix init);

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(const std::string& name) const;

  /// Overwrite a parameter's value in place (shape must match).
  void assign(const std::string& name, const Matrix& value);

  void zero_grad();
  void set_trainable(ParamGroup group, bool trainable);
  std::size_t num_scalars() const;

 private:
  std::vector<Entry> entries_;
};

/// Glorot-uniform (fan_in, fan_out) matrix.
Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

struct Linear {
  Var weight;  // (in, out)
  Var bias;    // (1, out)

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, ParamGroup group, int in, int out,
         Rng& rng);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
};

struct LayerNorm {
  Var gamma;
  Var beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, ParamGroup group, int width);
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
};

/// Multi-head attention with input and output projections.
struct Attention {
  Linear q_proj, k_proj, v_proj, out_proj;
  int heads = 1;

  Attention() = default;
  Attention(ParameterStore& store, const std::string& name, ParamGroup group, int width,
            int heads, Rng& rng);
  Var operator()(const Var& query, const Var& key, const Var& value,
                 Matrix* head_mean = nullptr) const;
};

/// Two-layer position-wise feed-forward block.
struct FeedForward {
  Linear expand, contract;

  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, ParamGroup group, int width,
              int hidden, Rng& rng);
  Var operator()(const Var& x) const { return contract(relu(expand(x))); }
};

/// Stack of affine layers with ReLU between them (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, ParamGroup group,
      const std::vector<int>& widths, Rng& rng);
  Var operator()(const Var& x) const;
};

}  // namespace cdn::nn
