#include "skt/tensor.hpp"

#include <numeric>

namespace skt {

std::size_t numel_of(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  if (shape.empty() || shape.size() > 3) {
    throw DimensionError("tensor rank must be 1..3");
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(numel_of(t.shape), 0.0);
  t.requires_grad = requires_grad;
  if (requires_grad) t.ensure_grad();
  return t;
}

Tensor Tensor::from(std::vector<double> values, std::vector<int> shape,
                    bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  if (values.size() != t.numel()) {
    throw DimensionError("value count does not match shape");
  }
  *t.data = std::move(values);
  check_finite(t.ptr(), t.numel(), "tensor init");
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({v}, {1}, requires_grad);
}

std::size_t Tensor::numel() const { return data ? data->size() : 0; }

double Tensor::value() const {
  if (numel() != 1) throw DimensionError("value() on non-scalar tensor");
  return (*data)[0];
}

void Tensor::ensure_grad() {
  if (!grad) grad = std::make_shared<std::vector<double>>(numel(), 0.0);
}

void Tensor::zero_grad() {
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

Tensor reshape(const Tensor& t, std::vector<int> shape) {
  if (numel_of(shape) != t.numel()) {
    throw DimensionError("reshape: element count mismatch");
  }
  Tensor v;
  v.shape = std::move(shape);
  v.data = t.data;
  v.grad = t.grad;
  v.requires_grad = t.requires_grad;
  return v;
}

void Tape::backward(Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward requires a scalar loss");
  }
  for (auto& t : outputs_) t.zero_grad();
  loss.ensure_grad();
  (*loss.grad)[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace skt
