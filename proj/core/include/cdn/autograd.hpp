#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cdn::nn {

/// All tensors are 2-D, row-major, double precision. Token sequences are
/// (length, channels); images are (height * width, channels).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

/// Handle to a node of the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var leaf(Matrix value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  /// Gradient accumulated by backward(); zeros when nothing reached it.
  Matrix grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a 1x1 root.
void backward(const Var& root);

Var constant(Matrix value);
/// Same value, cut from the graph.
Var detach(const Var& x);

Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
/// x * weight + bias, bias is (1, out) and broadcast over rows.
Var linear(const Var& x, const Var& weight, const Var& bias);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Scaled dot-product attention with `heads` heads over equal-width
/// column blocks. When `head_mean` is given it receives the (Lq, Lk)
/// attention probabilities averaged over heads.
Var multi_head_attention(const Var& q, const Var& k, const Var& v, int heads,
                         Matrix* head_mean = nullptr);

/// Patch extraction for a k x k convolution with zero padding. `x` is
/// (height * width, channels); the result is (out_h * out_w, k * k * channels).
Var im2col(const Var& x, int height, int width, int kernel, int stride, int pad);

Var gather_rows(const Var& x, std::span<const int> rows);

/// sum_i coefs[i] * terms[i] for 1x1 terms.
Var weighted_sum(std::span<const Var> terms, std::span<const double> coefs);

// Loss primitives. Each returns a 1x1 value.

/// sum_i row_weights[i] * CE(logits_i, targets[i]) / denom.
Var softmax_cross_entropy(const Var& logits, std::span<const int> targets,
                          std::span<const double> row_weights, double denom);

/// sum_ij weights_ij * BCE(sigmoid(logits_ij), targets_ij) / denom.
Var bce_with_logits(const Var& logits, const Matrix& targets, const Matrix& weights,
                    double denom);

/// sum |pred - target| / denom.
Var l1_loss(const Var& pred, const Matrix& target, double denom);

/// sum_i (1 - giou(pred_i, target_i)) / denom for (cx, cy, w, h) rows.
Var giou_loss(const Var& pred, const Matrix& target, double denom);

}  // namespace cdn::nn
