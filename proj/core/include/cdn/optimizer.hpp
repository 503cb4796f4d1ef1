#pragma once

#include <cstdint>
#include <vector>

#include "cdn/layers.hpp"

namespace cdn::train {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay over every parameter that currently
/// requires a gradient. Frozen parameters and those no gradient reached are
/// left untouched.
class AdamW {
 public:
  AdamW(nn::ParameterStore& store, AdamOptions options);

  /// Scales accumulated gradients by `grad_scale`, clips their global norm to
  /// `clip` (0 disables) and applies one update. Returns the norm before
  /// clipping. Throws NumericalError if it is not finite.
  double step(double lr, double grad_scale = 1.0, double clip = 0.0);

  /// Forget moments and the step count.
  void reset();

  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t n) { steps_ = n; }
  std::vector<nn::Matrix>& first_moments() { return m_; }
  std::vector<nn::Matrix>& second_moments() { return v_; }
  const std::vector<nn::Matrix>& first_moments() const { return m_; }
  const std::vector<nn::Matrix>& second_moments() const { return v_; }

 private:
  nn::ParameterStore& store_;
  AdamOptions opt_;
  std::vector<nn::Matrix> m_;
  std::vector<nn::Matrix> v_;
  std::int64_t steps_ = 0;
};

}  // namespace cdn::train
