#include "nnkgc/autodiff/tensor.hpp"

#include <unordered_set>

#include "nnkgc/errors.hpp"

namespace nnkgc::ad {

namespace {

thread_local bool g_grad_enabled = true;

void check_shape(std::size_t rows, std::size_t cols, std::size_t n) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("tensor dimensions must be positive, got " + std::to_string(rows) +
                         "x" + std::to_string(cols));
  }
  if (rows * cols != n) {
    throw DimensionError("tensor of shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " given " + std::to_string(n) + " values");
  }
}

}  // namespace

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  check_shape(rows, cols, values.size());
  node_ = std::make_shared<Node>();
  node_->rows = rows;
  node_->cols = cols;
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(1, 1, {value}, requires_grad);
}

Tensor Tensor::row_vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) t.node_->values[i * n + i] = 1.0;
  return t;
}

std::string Tensor::shape_string() const {
  if (!node_) return "[undefined]";
  return "[" + std::to_string(node_->rows) + "x" + std::to_string(node_->cols) + "]";
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string());
  return node_->values[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

void Tensor::backward() const {
  if (!node_) throw ContractError("backward() on undefined tensor");
  if (size() != 1) throw ContractError("backward() requires a scalar root, got " + shape_string());
  if (!node_->requires_grad) return;

  // Post-order DFS gives a topological order with each node visited once.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->values.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf()) n->backward_fn(*n);
  }
}

Tensor Tensor::detach() const {
  return Tensor(node_->rows, node_->cols, node_->values, false);
}

Tensor Tensor::clone() const {
  return Tensor(node_->rows, node_->cols, node_->values, node_->requires_grad);
}

namespace {

template <typename Range>
std::shared_ptr<Node> make_result_impl(std::size_t rows, std::size_t cols, std::vector<double> values,
                        const Range& parents, std::function<void(Node&)> backward,
                        const char* op) {
  auto node = std::make_shared<Node>();
  check_shape(rows, cols, values.size());
  node->rows = rows;
  node->cols = cols;
  node->values = std::move(values);
  node->op = op;
  bool any = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parents) any = any || p.requires_grad();
  }
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
    node->backward_fn = std::move(backward);
  }
  return node;
}

}  // namespace

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::initializer_list<Tensor> parents, std::function<void(Node&)> backward,
                   const char* op) {
  return Tensor(make_result_impl(rows, cols, std::move(values), parents, std::move(backward), op));
}

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::span<const Tensor> parents, std::function<void(Node&)> backward,
                   const char* op) {
  return Tensor(make_result_impl(rows, cols, std::move(values), parents, std::move(backward), op));
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() noexcept : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace nnkgc::ad
