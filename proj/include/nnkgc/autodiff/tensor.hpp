#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nnkgc::ad {

// One vertex of the define-by-run computation graph. Every tensor is a
// row-major matrix; vectors are 1×n and scalars 1×1.
//
// Parents are always created before their children, so the graph recorded
// by a forward pass is a DAG whose creation order is a valid topological
// order. backward() walks it in reverse.
struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  // Empty until a gradient is first accumulated or zero_grad() is called.
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  std::size_t size() const noexcept { return values.size(); }
  bool is_leaf() const noexcept { return !backward_fn; }
  std::vector<double>& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
         bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor row_vector(std::vector<double> values, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  std::size_t rows() const noexcept { return node_->rows; }
  std::size_t cols() const noexcept { return node_->cols; }
  std::size_t size() const noexcept { return node_->values.size(); }
  std::array<std::size_t, 2> shape() const noexcept { return {node_->rows, node_->cols}; }
  std::string shape_string() const;

  std::span<const double> values() const noexcept { return node_->values; }
  // In-place edits are only meaningful on leaves (parameters, constants).
  std::span<double> mutable_values() noexcept { return node_->values; }
  double operator()(std::size_t r, std::size_t c) const { return node_->values[r * node_->cols + c]; }
  double item() const;

  bool requires_grad() const noexcept { return node_->requires_grad; }
  void set_requires_grad(bool on) noexcept { node_->requires_grad = on; }
  bool has_grad() const noexcept { return !node_->grad.empty(); }
  std::span<const double> grad() const noexcept { return node_->grad; }
  std::span<double> mutable_grad() noexcept { return node_->grad; }
  // Sets the gradient to an allocated all-zero buffer.
  void zero_grad();
  // Drops the gradient buffer entirely (has_grad() becomes false).
  void clear_grad() noexcept { node_->grad.clear(); }

  // Populates dL/dθ for every requires_grad tensor reachable from this
  // scalar. Leaf gradients accumulate across calls; interior gradients are
  // recomputed on each call.
  void backward() const;

  // Same values, no history, no gradient.
  Tensor detach() const;
  // Deep copy of values into a fresh leaf with the same requires_grad flag.
  Tensor clone() const;

  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

 private:
  friend Tensor make_result(std::size_t, std::size_t, std::vector<double>,
                            std::initializer_list<Tensor>, std::function<void(Node&)>,
                            const char*);
  friend Tensor make_result(std::size_t, std::size_t, std::vector<double>,
                            std::span<const Tensor>, std::function<void(Node&)>, const char*);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

// Builds the output of an op. History (parents + backward rule) is recorded
// only when gradient recording is enabled and some parent requires grad.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::initializer_list<Tensor> parents, std::function<void(Node&)> backward,
                   const char* op);
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::span<const Tensor> parents, std::function<void(Node&)> backward,
                   const char* op);

bool grad_enabled() noexcept;

// Disables history recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() noexcept;
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace nnkgc::ad
