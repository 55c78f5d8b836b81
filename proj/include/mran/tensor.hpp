#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mran/error.hpp"
#include "mran/rng.hpp"

namespace mran {

namespace detail {
struct TensorData {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
  int64_t id = 0;
};
}  // namespace detail

// Dense row-major tensor of 64-bit floats with an optional gradient buffer.
// Copies are shallow (shared payload): gradient accumulation during backward
// must land in the buffer the caller holds.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Entries drawn i.i.d. uniform on [lo, hi).
  static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);
  // Rows stacked into a matrix; every row must have equal length.
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  bool defined() const { return data_ != nullptr; }
  const std::vector<int>& shape() const { return data().shape; }
  int ndim() const { return static_cast<int>(data().shape.size()); }
  int dim(int i) const { return data().shape[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data().values.size()); }
  // 2-D accessors.
  int rows() const;
  int cols() const;

  std::span<double> values() { return data().values; }
  std::span<const double> values() const { return data().values; }
  double operator[](int64_t i) const { return data().values[static_cast<size_t>(i)]; }
  double at(int r, int c) const;
  // Value of a single-element tensor.
  double item() const;

  bool requires_grad() const { return defined() && data().requires_grad; }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  // Identity of the underlying buffer (stable for the tensor's lifetime).
  int64_t id() const { return data().id; }

  // Value copy that does not require gradient and is not attached to any graph.
  Tensor detach() const;
  // Deep copy.
  Tensor clone() const;

  std::string shape_str() const;

  detail::TensorData& data() { return *data_; }
  const detail::TensorData& data() const { return *data_; }
  // Payload access regardless of handle constness: copies share the payload,
  // and backward closures write gradients through captured handles.
  detail::TensorData& payload() const { return *data_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : data_(std::move(d)) {}
  static Tensor alloc(std::vector<int> shape, bool requires_grad);

  std::shared_ptr<detail::TensorData> data_;
};

// Recorded computation tape. Ops append one node per call in construction
// order, which is a valid topological order; backward() replays the recorded
// closures in reverse and accumulates into grad buffers. A graph and the
// tensors recorded on it belong to one logical thread for the duration of a
// forward/backward pass.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  size_t node_count() const { return nodes_.size(); }

  // Reverse-topological gradient accumulation from a single-element loss.
  // Gradients add into existing buffers; the caller zeroes between steps.
  void backward(const Tensor& loss);

  // Used by ops: registers the backward closure for one recorded op.
  void record(Tensor output, std::function<void()> backward_fn);

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

// --- Differentiable operations -------------------------------------------
// Every op validates shapes, computes the forward value, and (when any input
// requires gradient) records its backward closure on the graph.

// Standard matrix product, a[m×k] · b[k×n].
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
// Row-wise broadcast add of a length-n bias to an m×n matrix.
Tensor add_bias(Graph& g, const Tensor& x, const Tensor& b);
// Elementwise max(0, x). Subgradient at 0 is 0.
Tensor relu(Graph& g, const Tensor& x);
// Inverted dropout: in training mode each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate); in eval mode the identity.
// rate = 0 is the identity in both modes and consumes no randomness.
Tensor dropout(Graph& g, const Tensor& x, double rate, bool training, Rng* rng);
// Columns of a followed by columns of b.
Tensor concat_cols(Graph& g, const Tensor& a, const Tensor& b);
// Row-wise log-softmax via the max-shift log-sum-exp stabilization.
Tensor log_softmax(Graph& g, const Tensor& x);
// Mean over rows of -sum_c target[c] * logp[c]. Each target row must be a
// distribution (nonnegative, summing to 1 within 1e-9); targets are treated
// as constants.
Tensor nll_soft(Graph& g, const Tensor& logp, const Tensor& target);
// Mean over rows of sum_c |a - b|; sign(0) = 0 in the backward pass.
Tensor l1_distance(Graph& g, const Tensor& a, const Tensor& b);
// Elementwise sum of two equal-shape tensors.
Tensor add(Graph& g, const Tensor& a, const Tensor& b);
// Elementwise product of two equal-shape tensors.
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
// Multiply by a constant.
Tensor scale(Graph& g, const Tensor& x, double c);
// Sum of all entries, as a scalar.
Tensor sum(Graph& g, const Tensor& x);

}  // namespace mran
