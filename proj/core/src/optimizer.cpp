#include "cdn/optimizer.hpp"

#include <cmath>

#include "cdn/error.hpp"

namespace cdn::train {

AdamW::AdamW(nn::ParameterStore& store, AdamOptions options) : store_(store), opt_(options) {
  reset();
}

void AdamW::reset() {
  m_.clear();
  v_.clear();
  for (const auto& e : store_.entries()) {
    m_.push_back(nn::Matrix::Zero(e.var.rows(), e.var.cols()));
    v_.push_back(nn::Matrix::Zero(e.var.rows(), e.var.cols()));
  }
  steps_ = 0;
}

double AdamW::step(double lr, double grad_scale, double clip) {
  const auto& entries = store_.entries();
  auto active = [](const nn::ParameterStore::Entry& e) {
    return e.var.requires_grad() && e.var.node()->grad.size() != 0;
  };

  double sq = 0.0;
  for (const auto& e : entries) {
    if (active(e)) sq += e.var.node()->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq) * std::abs(grad_scale);
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
  double factor = grad_scale;
  if (clip > 0.0 && norm > clip) factor *= clip / norm;

  ++steps_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!active(e)) continue;
    nn::Node& node = *e.var.node();
    const nn::Matrix g = node.grad * factor;
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g.cwiseAbs2();
    node.value *= 1.0 - lr * opt_.weight_decay;
    node.value.array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opt_.eps);
  }
  return norm;
}

}  // namespace cdn::train
