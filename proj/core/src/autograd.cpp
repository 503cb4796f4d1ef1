#include "cdn/autograd.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "cdn/error.hpp"
#include "cdn/geometry.hpp"

namespace cdn::nn {

namespace {

using BackwardFn = std::function<void(Node&)>;

Var make_op(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.defined() && in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const auto& in : inputs) node->inputs.push_back(in.shared());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

bool wants(Node& self, std::size_t i) {
  return self.inputs[i] != nullptr && self.inputs[i]->requires_grad;
}

void require_shape(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(op) + ": " + detail);
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Var Var::leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item: tensor is not 1x1");
  return node_->value(0, 0);
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward: root must be 1x1");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS yields a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child != nullptr && child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) {
      n->backward(*n);
      // Interior gradients are no longer needed once propagated.
      if (!n->inputs.empty()) n->grad.resize(0, 0);
    }
  }
}

Var constant(Matrix value) { return Var::leaf(std::move(value), false); }

Var detach(const Var& x) { return Var::leaf(x.value(), false); }

Var add(const Var& a, const Var& b) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add",
                dims(a.value()) + " vs " + dims(b.value()));
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) input(self, 0).accumulate(self.grad);
    if (wants(self, 1)) input(self, 1).accumulate(self.grad);
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) { input(self, 0).accumulate(self.grad * s); });
}

Var matmul(const Var& a, const Var& b) {
  require_shape(a.cols() == b.rows(), "matmul", dims(a.value()) + " * " + dims(b.value()));
  return make_op(a.value() * b.value(), {a, b}, [](Node& self) {
    const Matrix& A = input(self, 0).value;
    const Matrix& B = input(self, 1).value;
    if (wants(self, 0)) input(self, 0).accumulate(self.grad * B.transpose());
    if (wants(self, 1)) input(self, 1).accumulate(A.transpose() * self.grad);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_shape(x.cols() == weight.rows(), "linear",
                dims(x.value()) + " * " + dims(weight.value()));
  require_shape(bias.rows() == 1 && bias.cols() == weight.cols(), "linear",
                "bias " + dims(bias.value()));
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return make_op(std::move(out), {x, weight, bias}, [](Node& self) {
    const Matrix& X = input(self, 0).value;
    const Matrix& W = input(self, 1).value;
    if (wants(self, 0)) input(self, 0).accumulate(self.grad * W.transpose());
    if (wants(self, 1)) input(self, 1).accumulate(X.transpose() * self.grad);
    if (wants(self, 2)) input(self, 2).accumulate(self.grad.colwise().sum());
  });
}

Var relu(const Var& x) {
  return make_op(x.value().cwiseMax(0.0), {x}, [](Node& self) {
    const Matrix& X = input(self, 0).value;
    input(self, 0).accumulate((X.array() > 0.0).select(self.grad, 0.0));
  });
}

Var sigmoid(const Var& x) {
  Matrix y = (1.0 + (-x.value().array()).exp()).inverse().matrix();
  return make_op(std::move(y), {x}, [](Node& self) {
    const auto y = self.value.array();
    input(self, 0).accumulate((self.grad.array() * y * (1.0 - y)).matrix());
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Matrix& X = x.value();
  const auto n = X.cols();
  require_shape(gamma.cols() == n && beta.cols() == n, "layer_norm", "affine width mismatch");
  Matrix xhat(X.rows(), n);
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).mean();
    const double var = (X.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mean) * inv_std(r);
  }
  Matrix y = xhat;
  y.array().rowwise() *= gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  return make_op(std::move(y), {x, gamma, beta},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                   const Matrix& G = self.grad;
                   if (wants(self, 0)) {
                     const auto g = input(self, 1).value.row(0).array();
                     Matrix dx(G.rows(), G.cols());
                     for (Eigen::Index r = 0; r < G.rows(); ++r) {
                       const Eigen::ArrayXd dxhat = (G.row(r).array() * g).transpose();
                       const Eigen::ArrayXd xh = xhat.row(r).array().transpose();
                       const double m1 = dxhat.mean();
                       const double m2 = (dxhat * xh).mean();
                       dx.row(r) = (inv_std(r) * (dxhat - m1 - xh * m2)).transpose();
                     }
                     input(self, 0).accumulate(dx);
                   }
                   if (wants(self, 1)) {
                     input(self, 1).accumulate((G.array() * xhat.array()).colwise().sum().matrix());
                   }
                   if (wants(self, 2)) input(self, 2).accumulate(G.colwise().sum());
                 });
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, int heads, Matrix* head_mean) {
  const auto D = q.cols();
  require_shape(heads > 0 && D % heads == 0, "attention", "width not divisible by heads");
  require_shape(k.cols() == D && v.cols() == D, "attention", "q/k/v widths differ");
  require_shape(k.rows() == v.rows(), "attention", "key/value lengths differ");
  const auto dh = D / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();

  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(Q.rows(), D);
  for (int h = 0; h < heads; ++h) {
    Matrix S = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * sc;
    for (Eigen::Index r = 0; r < S.rows(); ++r) {
      const double m = S.row(r).maxCoeff();
      S.row(r) = (S.row(r).array() - m).exp().matrix();
      S.row(r) /= S.row(r).sum();
    }
    out.middleCols(h * dh, dh) = S * V.middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(S);
  }
  if (head_mean != nullptr) {
    *head_mean = Matrix::Zero(Q.rows(), K.rows());
    for (const auto& P : probs) *head_mean += P;
    *head_mean /= heads;
  }
  return make_op(std::move(out), {q, k, v},
                 [probs = std::move(probs), heads, dh, sc](Node& self) {
                   const Matrix& Qv = input(self, 0).value;
                   const Matrix& Kv = input(self, 1).value;
                   const Matrix& Vv = input(self, 2).value;
                   Matrix dq = Matrix::Zero(Qv.rows(), Qv.cols());
                   Matrix dk = Matrix::Zero(Kv.rows(), Kv.cols());
                   Matrix dv = Matrix::Zero(Vv.rows(), Vv.cols());
                   for (int h = 0; h < heads; ++h) {
                     const Matrix& P = probs[static_cast<std::size_t>(h)];
                     const auto dO = self.grad.middleCols(h * dh, dh);
                     dv.middleCols(h * dh, dh) = P.transpose() * dO;
                     const Matrix dP = dO * Vv.middleCols(h * dh, dh).transpose();
                     const Eigen::VectorXd rs = (dP.array() * P.array()).rowwise().sum();
                     const Matrix dS =
                         (P.array() * (dP.array().colwise() - rs.array())).matrix() * sc;
                     dq.middleCols(h * dh, dh) = dS * Kv.middleCols(h * dh, dh);
                     dk.middleCols(h * dh, dh) = dS.transpose() * Qv.middleCols(h * dh, dh);
                   }
                   if (wants(self, 0)) input(self, 0).accumulate(dq);
                   if (wants(self, 1)) input(self, 1).accumulate(dk);
                   if (wants(self, 2)) input(self, 2).accumulate(dv);
                 });
}

Var im2col(const Var& x, int height, int width, int kernel, int stride, int pad) {
  const auto C = x.cols();
  require_shape(x.rows() == static_cast<Eigen::Index>(height) * width, "im2col",
                "row count is not height*width");
  const int out_h = (height + 2 * pad - kernel) / stride + 1;
  const int out_w = (width + 2 * pad - kernel) / stride + 1;
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(out_h) * out_w, kernel * kernel * C);
  const Matrix& X = x.value();
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const Eigen::Index row = static_cast<Eigen::Index>(oy) * out_w + ox;
      for (int ky = 0; ky < kernel; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= height) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= width) continue;
          cols.row(row).segment((ky * kernel + kx) * C, C) =
              X.row(static_cast<Eigen::Index>(iy) * width + ix);
        }
      }
    }
  }
  return make_op(std::move(cols), {x}, [=](Node& self) {
    Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(height) * width, C);
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const Eigen::Index row = static_cast<Eigen::Index>(oy) * out_w + ox;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= height) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= width) continue;
            dx.row(static_cast<Eigen::Index>(iy) * width + ix) +=
                self.grad.row(row).segment((ky * kernel + kx) * C, C);
          }
        }
      }
    }
    input(self, 0).accumulate(dx);
  });
}

Var gather_rows(const Var& x, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require_shape(rows[i] >= 0 && rows[i] < x.rows(), "gather_rows", "row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return make_op(std::move(out), {x}, [idx = std::move(idx)](Node& self) {
    Node& in = input(self, 0);
    Matrix dx = Matrix::Zero(in.value.rows(), in.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      dx.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
    in.accumulate(dx);
  });
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> coefs) {
  require_shape(terms.size() == coefs.size(), "weighted_sum", "term/coefficient count mismatch");
  double total = 0.0;
  auto node = std::make_shared<Node>();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    total += coefs[i] * terms[i].item();
    if (terms[i].requires_grad()) node->requires_grad = true;
  }
  node->value = Matrix::Constant(1, 1, total);
  if (node->requires_grad) {
    for (const auto& t : terms) node->inputs.push_back(t.shared());
    std::vector<double> c(coefs.begin(), coefs.end());
    node->backward = [c = std::move(c)](Node& self) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (wants(self, i)) input(self, i).accumulate(self.grad * c[i]);
      }
    };
  }
  return Var(std::move(node));
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> targets,
                          std::span<const double> row_weights, double denom) {
  const Matrix& Z = logits.value();
  require_shape(static_cast<Eigen::Index>(targets.size()) == Z.rows() &&
                    row_weights.size() == targets.size(),
                "softmax_cross_entropy", "targets/weights must match logit rows");
  Matrix probs(Z.rows(), Z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    require_shape(t >= 0 && t < Z.cols(), "softmax_cross_entropy", "target out of range");
    const double m = Z.row(r).maxCoeff();
    probs.row(r) = (Z.row(r).array() - m).exp().matrix();
    const double s = probs.row(r).sum();
    probs.row(r) /= s;
    loss += row_weights[static_cast<std::size_t>(r)] * (m + std::log(s) - Z(r, t));
  }
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<double> w(row_weights.begin(), row_weights.end());
  return make_op(Matrix::Constant(1, 1, loss / denom), {logits},
                 [probs = std::move(probs), tg = std::move(tg), w = std::move(w),
                  denom](Node& self) {
                   Matrix d = probs;
                   for (Eigen::Index r = 0; r < d.rows(); ++r) {
                     d(r, tg[static_cast<std::size_t>(r)]) -= 1.0;
                     d.row(r) *= w[static_cast<std::size_t>(r)];
                   }
                   input(self, 0).accumulate(d * (self.grad(0, 0) / denom));
                 });
}

Var bce_with_logits(const Var& logits, const Matrix& targets, const Matrix& weights,
                    double denom) {
  const Matrix& Z = logits.value();
  require_shape(targets.rows() == Z.rows() && targets.cols() == Z.cols() &&
                    weights.rows() == Z.rows() && weights.cols() == Z.cols(),
                "bce_with_logits", "targets/weights must match logits");
  const auto z = Z.array();
  const Eigen::ArrayXXd per = z.max(0.0) - z * targets.array() + (-z.abs()).exp().log1p();
  const double loss = (per * weights.array()).sum() / denom;
  return make_op(Matrix::Constant(1, 1, loss), {logits},
                 [targets, weights, denom](Node& self) {
                   const auto z = input(self, 0).value.array();
                   const Eigen::ArrayXXd sig = (1.0 + (-z).exp()).inverse();
                   input(self, 0).accumulate(
                       ((sig - targets.array()) * weights.array() * (self.grad(0, 0) / denom))
                           .matrix());
                 });
}

Var l1_loss(const Var& pred, const Matrix& target, double denom) {
  require_shape(pred.rows() == target.rows() && pred.cols() == target.cols(), "l1_loss",
                "shape mismatch");
  const double loss = (pred.value() - target).cwiseAbs().sum() / denom;
  return make_op(Matrix::Constant(1, 1, loss), {pred}, [target, denom](Node& self) {
    const Matrix diff = input(self, 0).value - target;
    const Matrix sign = diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
    input(self, 0).accumulate(sign * (self.grad(0, 0) / denom));
  });
}

namespace {

/// Forward-mode dual number carrying derivatives w.r.t. four inputs.
struct Dual4 {
  double v = 0.0;
  std::array<double, 4> d{};

  Dual4() = default;
  Dual4(double value) : v(value) {}

  friend Dual4 operator+(const Dual4& a, const Dual4& b) {
    Dual4 r(a.v + b.v);
    for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Dual4 operator-(const Dual4& a, const Dual4& b) {
    Dual4 r(a.v - b.v);
    for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Dual4 operator*(const Dual4& a, const Dual4& b) {
    Dual4 r(a.v * b.v);
    for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual4 operator/(const Dual4& a, const Dual4& b) {
    Dual4 r(a.v / b.v);
    for (int i = 0; i < 4; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) / (b.v * b.v);
    return r;
  }
  friend bool operator<(const Dual4& a, const Dual4& b) { return a.v < b.v; }
  friend bool operator>(const Dual4& a, double b) { return a.v > b; }
};

}  // namespace

Var giou_loss(const Var& pred, const Matrix& target, double denom) {
  require_shape(pred.cols() == 4 && target.cols() == 4 && pred.rows() == target.rows(),
                "giou_loss", "expected matching (n, 4) boxes");
  const Matrix& P = pred.value();
  Matrix dP(P.rows(), 4);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    std::array<Dual4, 4> a;
    for (int i = 0; i < 4; ++i) {
      a[static_cast<std::size_t>(i)] = Dual4(P(r, i));
      a[static_cast<std::size_t>(i)].d[static_cast<std::size_t>(i)] = 1.0;
    }
    std::array<double, 4> b{target(r, 0), target(r, 1), target(r, 2), target(r, 3)};
    const Dual4 g = giou_center_size(a.data(), b.data());
    loss += 1.0 - g.v;
    for (int i = 0; i < 4; ++i) dP(r, i) = -g.d[static_cast<std::size_t>(i)];
  }
  return make_op(Matrix::Constant(1, 1, loss / denom), {pred},
                 [dP = std::move(dP), denom](Node& self) {
                   input(self, 0).accumulate(dP * (self.grad(0, 0) / denom));
                 });
}

}  // namespace cdn::nn
