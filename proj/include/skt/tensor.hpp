#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "skt/common.hpp"

namespace skt {

// Dense row-major tensor of 64-bit reals, rank 1..3. Storage is shared
// between views (reshape); grad is allocated iff requires_grad. Values are
// immutable after an op completes except for grad accumulation.
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;
  bool requires_grad = false;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from(std::vector<double> values, std::vector<int> shape,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  std::size_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double* ptr() { return data->data(); }
  const double* ptr() const { return data->data(); }
  double* gptr() { return grad ? grad->data() : nullptr; }
  const double* gptr() const { return grad ? grad->data() : nullptr; }

  double& at(int i) { return (*data)[static_cast<std::size_t>(i)]; }
  double at(int i) const { return (*data)[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) {
    return (*data)[static_cast<std::size_t>(i) * shape[1] + j];
  }
  double at(int i, int j) const {
    return (*data)[static_cast<std::size_t>(i) * shape[1] + j];
  }
  double value() const;  // scalar convenience

  void ensure_grad();
  void zero_grad();
};

// Same storage under a new shape; numel must match. Gradients flow through
// the shared buffers, so no tape node is needed.
Tensor reshape(const Tensor& t, std::vector<int> shape);

std::size_t numel_of(const std::vector<int>& shape);

// Ordered record of executed differentiable ops. Ops append their backward
// rule as they execute, which keeps the record topological by construction;
// backward() visits each rule exactly once in reverse order. A tape is
// single-threaded; independent tapes may run concurrently.
class Tape {
 public:
  // Registers an op: `out` is the op's output (its grad is re-zeroed at the
  // start of every sweep so leaf grads accumulate exactly once per call).
  void record(Tensor& out, std::function<void()> backward_rule) {
    out.ensure_grad();
    outputs_.push_back(out);
    nodes_.push_back(std::move(backward_rule));
  }

  // Zeroes intermediate grads, seeds d(loss)/d(loss) = 1 and sweeps the tape
  // once in reverse. Leaf grads accumulate across calls; the tape is not
  // consumed.
  void backward(Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    outputs_.clear();
  }

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<Tensor> outputs_;
};

}  // namespace skt
