#include "hatefuse/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace hatefuse::ag {

namespace {

using NodePtr = std::shared_ptr<Node>;

Var make(Matrix value, std::vector<NodePtr> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || in->requires_grad;
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void accumulate(Node& n, const Matrix& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

}  // namespace

void Var::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("backward: loss must be 1x1");
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  accumulate(*loss.node(), Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  return make(a.value() * b.value(), {a.shared(), b.shared()}, [](Node& n) {
    Node& x = *n.inputs[0];
    Node& y = *n.inputs[1];
    if (x.requires_grad) accumulate(x, n.grad * y.value.transpose());
    if (y.requires_grad) accumulate(y, x.value.transpose() * n.grad);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a.shared(), b.shared()}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad);
    accumulate(*n.inputs[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a.shared(), b.shared()}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad);
    accumulate(*n.inputs[1], -n.grad);
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bias shape mismatch");
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return make(std::move(v), {a.shared(), row.shared()}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad);
    accumulate(*n.inputs[1], n.grad.colwise().sum());
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a.shared(), b.shared()}, [](Node& n) {
    Node& x = *n.inputs[0];
    Node& y = *n.inputs[1];
    if (x.requires_grad) accumulate(x, n.grad.cwiseProduct(y.value));
    if (y.requires_grad) accumulate(y, n.grad.cwiseProduct(x.value));
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a.shared()}, [s](Node& n) { accumulate(*n.inputs[0], n.grad * s); });
}

Var add_constant(const Var& a, const Matrix& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) throw std::invalid_argument("add_constant: shape mismatch");
  return make(a.value() + c, {a.shared()}, [](Node& n) { accumulate(*n.inputs[0], n.grad); });
}

Var mul_constant(const Var& a, const Matrix& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) throw std::invalid_argument("mul_constant: shape mismatch");
  return make(a.value().cwiseProduct(c), {a.shared()},
              [c](Node& n) { accumulate(*n.inputs[0], n.grad.cwiseProduct(c)); });
}

Var tanh(const Var& a) {
  Matrix v = a.value().array().tanh().matrix();
  return make(v, {a.shared()}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad.cwiseProduct((1.0 - n.value.array().square()).matrix()));
  });
}

Var sigmoid(const Var& a) {
  Matrix v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make(v, {a.shared()}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad.cwiseProduct((n.value.array() * (1.0 - n.value.array())).matrix()));
  });
}

namespace {
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;
}  // namespace

Var gelu(const Var& a) {
  constexpr double k = kGeluScale;
  constexpr double c = kGeluCubic;
  const auto x = a.value().array();
  const Eigen::ArrayXXd inner = k * (x + c * x.cube());
  const Eigen::ArrayXXd t = inner.tanh();
  Matrix v = (0.5 * x * (1.0 + t)).matrix();
  return make(std::move(v), {a.shared()}, [](Node& n) {
    constexpr double k = kGeluScale;
    constexpr double c = kGeluCubic;
    const auto& xin = n.inputs[0]->value.array();
    const Eigen::ArrayXXd th = (k * (xin + c * xin.cube())).tanh();
    const Eigen::ArrayXXd d = 0.5 * (1.0 + th) + 0.5 * xin * (1.0 - th.square()) * k * (1.0 + 3.0 * c * xin.square());
    accumulate(*n.inputs[0], (n.grad.array() * d).matrix());
  });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a.shared()},
              [](Node& n) { accumulate(*n.inputs[0], n.grad.transpose()); });
}

Var block(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) {
  if (row < 0 || col < 0 || row + rows > a.rows() || col + cols > a.cols()) {
    throw std::invalid_argument("block: out of range");
  }
  return make(a.value().block(row, col, rows, cols), {a.shared()}, [row, col, rows, cols](Node& n) {
    Node& in = *n.inputs[0];
    if (!in.requires_grad) return;
    Matrix g = Matrix::Zero(in.value.rows(), in.value.cols());
    g.block(row, col, rows, cols) = n.grad;
    accumulate(in, g);
  });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) throw std::invalid_argument("hcat: row mismatch");
    cols += p.cols();
  }
  Matrix v(parts[0].rows(), cols);
  std::vector<NodePtr> inputs;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    inputs.push_back(p.shared());
  }
  return make(std::move(v), std::move(inputs), [](Node& n) {
    Eigen::Index off = 0;
    for (auto& in : n.inputs) {
      const auto c = in->value.cols();
      if (in->requires_grad) accumulate(*in, n.grad.middleCols(off, c));
      off += c;
    }
  });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no inputs");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) throw std::invalid_argument("vcat: column mismatch");
    rows += p.rows();
  }
  Matrix v(rows, parts[0].cols());
  std::vector<NodePtr> inputs;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    inputs.push_back(p.shared());
  }
  return make(std::move(v), std::move(inputs), [](Node& n) {
    Eigen::Index off = 0;
    for (auto& in : n.inputs) {
      const auto r = in->value.rows();
      if (in->requires_grad) accumulate(*in, n.grad.middleRows(off, r));
      off += r;
    }
  });
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

Var softmax_rows(const Var& a) {
  return make(softmax(a.value()), {a.shared()}, [](Node& n) {
    // dx = y * (g - sum(g * y))
    const Eigen::VectorXd dot = n.grad.cwiseProduct(n.value).rowwise().sum();
    Matrix g = n.grad;
    g.colwise() -= dot;
    accumulate(*n.inputs[0], g.cwiseProduct(n.value));
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index c = a.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
    throw std::invalid_argument("layer_norm: gain/bias shape mismatch");
  }
  const Matrix& x = a.value();
  Eigen::VectorXd inv_std(x.rows());
  Matrix xhat(x.rows(), c);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mean) * inv_std(i);
  }
  Matrix v = xhat;
  v.array().rowwise() *= gain.value().row(0).array();
  v.rowwise() += bias.value().row(0);
  return make(std::move(v), {a.shared(), gain.shared(), bias.shared()},
              [xhat, inv_std](Node& n) {
                Node& xin = *n.inputs[0];
                Node& g = *n.inputs[1];
                Node& b = *n.inputs[2];
                if (g.requires_grad) accumulate(g, n.grad.cwiseProduct(xhat).colwise().sum());
                if (b.requires_grad) accumulate(b, n.grad.colwise().sum());
                if (!xin.requires_grad) return;
                Matrix dxhat = n.grad;
                dxhat.array().rowwise() *= g.value.row(0).array();
                const double cols = static_cast<double>(dxhat.cols());
                Matrix dx(dxhat.rows(), dxhat.cols());
                for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                  const double m1 = dxhat.row(i).mean();
                  const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).sum() / cols;
                  dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                }
                accumulate(xin, dx);
              });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  Matrix v(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw std::out_of_range("gather_rows: id out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return make(std::move(v), {table.shared()}, [idx = std::move(idx)](Node& n) {
    Node& t = *n.inputs[0];
    if (!t.requires_grad) return;
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) t.grad.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw std::invalid_argument("cross_entropy: target count differs from batch size");
  }
  const Eigen::Index b = logits.rows();
  Matrix probs = softmax(logits.value());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw std::out_of_range("cross_entropy: target out of range");
    // log-sum-exp form keeps this finite for saturated logits.
    const double m = logits.value().row(i).maxCoeff();
    const double lse = m + std::log((logits.value().row(i).array() - m).exp().sum());
    loss += lse - logits.value()(i, t);
  }
  loss /= static_cast<double>(b);
  std::vector<int> tgt(targets.begin(), targets.end());
  return make(Matrix::Constant(1, 1, loss), {logits.shared()},
              [probs = std::move(probs), tgt = std::move(tgt)](Node& n) {
                Matrix g = probs;
                for (std::size_t i = 0; i < tgt.size(); ++i) g(static_cast<Eigen::Index>(i), tgt[i]) -= 1.0;
                g *= n.grad(0, 0) / static_cast<double>(tgt.size());
                accumulate(*n.inputs[0], g);
              });
}

Var sum_all(const Var& a) {
  return make(Matrix::Constant(1, 1, a.value().sum()), {a.shared()}, [](Node& n) {
    Node& in = *n.inputs[0];
    accumulate(in, Matrix::Constant(in.value.rows(), in.value.cols(), n.grad(0, 0)));
  });
}

}  // namespace hatefuse::ag
