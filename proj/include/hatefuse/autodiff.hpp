#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hatefuse::ag {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;
};

/// Handle to a node of a reverse-mode tape. Graphs are built eagerly by the
/// free functions below and freed when the last handle goes away.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  void zero_grad();

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var parameter(Matrix value);

/// Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1.
void backward(const Var& loss);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// a (R x C) + row (1 x C) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a + c for a constant matrix c of the same shape (e.g. an attention mask).
Var add_constant(const Var& a, const Matrix& c);
/// Elementwise product with a constant matrix.
Var mul_constant(const Var& a, const Matrix& c);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
/// tanh approximation of GELU.
Var gelu(const Var& a);
Var transpose(const Var& a);
Var block(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);
Var hcat(std::span<const Var> parts);
Var vcat(std::span<const Var> parts);
/// Row-wise softmax.
Var softmax_rows(const Var& a);
/// Row-wise layer norm with learned gain and bias (both 1 x C).
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-12);
/// Gathers rows of table by index (embedding lookup).
Var gather_rows(const Var& table, std::span<const int> ids);
/// Mean cross-entropy of softmax(logits) against integer targets.
Var cross_entropy(const Var& logits, std::span<const int> targets);
Var sum_all(const Var& a);

/// Row-wise softmax on plain matrices, numerically stabilised.
Matrix softmax(const Matrix& logits);

}  // namespace hatefuse::ag
