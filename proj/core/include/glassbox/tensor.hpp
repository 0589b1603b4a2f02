#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace glassbox {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

// One entry of the dynamic tape. Interior nodes keep their parents alive so
// the graph lives exactly as long as some handle to its output does.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major f64 tensor participating in reverse-mode differentiation.
// Tensor is a cheap shared handle: copies alias the same storage and tape node.
// Construction rejects NaN/Inf; every op re-checks its output.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  // Used by op implementations: builds a tape node whose backward closure
  // receives the node itself (parents reachable through node.parents).
  static Tensor from_op(const char* op, Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents,
                        std::function<void(detail::Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::size_t ndim() const { return shape().size(); }
  std::size_t numel() const { return node().values.size(); }
  // For 2-D tensors the row/column counts; a 1-D tensor is a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return node().values; }
  // Mutable access for optimizers and checkpoint loading. Leaf tensors only.
  std::span<double> data();
  double item() const;
  double operator()(std::size_t row, std::size_t col) const;
  double operator[](std::size_t flat_index) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse pass from a single-element tensor. Leaf gradients accumulate
  // across calls until zero_grad(); interior gradients are recomputed.
  void backward() const;

  // Same values, no tape history, no gradient requirement.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  const detail::Node* id() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const {
    if (!node_) undefined();
    return *node_;
  }
  [[noreturn]] static void undefined();

  std::shared_ptr<detail::Node> node_;
};

}  // namespace glassbox
