#include "cdn/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "cdn/error.hpp"

namespace cdn::nn {

const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kExtractor: return "extractor";
    case ParamGroup::kPairDecoder: return "pair_decoder";
    case ParamGroup::kInteractionDecoder: return "interaction_decoder";
  }
  return "?";
}

Var ParameterStore::create(std::string name, ParamGroup group, Matrix init) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter " + name);
  Var v = Var::leaf(std::move(init), true);
  entries_.push_back({std::move(name), group, v});
  return v;
}

const ParameterStore::Entry* ParameterStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void ParameterStore::assign(const std::string& name, const Matrix& value) {
  const Entry* e = find(name);
  if (e == nullptr) throw ShapeError("unknown parameter " + name);
  Matrix& dst = e->var.node()->value;
  if (dst.rows() != value.rows() || dst.cols() != value.cols()) {
    throw ShapeError("parameter " + name + " has a different shape");
  }
  dst = value;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.node()->grad.resize(0, 0);
}

void ParameterStore::set_trainable(ParamGroup group, bool trainable) {
  for (auto& e : entries_) {
    if (e.group == group) e.var.node()->requires_grad = trainable;
  }
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

Linear::Linear(ParameterStore& store, const std::string& name, ParamGroup group, int in, int out,
               Rng& rng)
    : weight(store.create(name + ".weight", group, xavier_uniform(in, out, rng))),
      bias(store.create(name + ".bias", group, Matrix::Zero(1, out))) {}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, ParamGroup group, int width)
    : gamma(store.create(name + ".gamma", group, Matrix::Ones(1, width))),
      beta(store.create(name + ".beta", group, Matrix::Zero(1, width))) {}

Attention::Attention(ParameterStore& store, const std::string& name, ParamGroup group, int width,
                     int heads_, Rng& rng)
    : q_proj(store, name + ".q", group, width, width, rng),
      k_proj(store, name + ".k", group, width, width, rng),
      v_proj(store, name + ".v", group, width, width, rng),
      out_proj(store, name + ".out", group, width, width, rng),
      heads(heads_) {
  if (heads <= 0 || width % heads != 0) {
    throw ShapeError(name + ": width " + std::to_string(width) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
}

Var Attention::operator()(const Var& query, const Var& key, const Var& value,
                          Matrix* head_mean) const {
  return out_proj(
      multi_head_attention(q_proj(query), k_proj(key), v_proj(value), heads, head_mean));
}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, ParamGroup group,
                         int width, int hidden, Rng& rng)
    : expand(store, name + ".expand", group, width, hidden, rng),
      contract(store, name + ".contract", group, hidden, width, rng) {}

Mlp::Mlp(ParameterStore& store, const std::string& name, ParamGroup group,
         const std::vector<int>& widths, Rng& rng) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(store, name + "." + std::to_string(i), group, widths[i], widths[i + 1],
                        rng);
  }
}

Var Mlp::operator()(const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

}  // namespace cdn::nn
