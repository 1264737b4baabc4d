#include "postfilter/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace postfilter::ad {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

SignalTensor::SignalTensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

SignalTensor::SignalTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (element_count(shape_) != data_.size()) {
    throw ContractViolation("SignalTensor: shape " + to_string(shape_) + " holds " +
                            std::to_string(element_count(shape_)) + " elements, got " +
                            std::to_string(data_.size()));
  }
}

SignalTensor SignalTensor::scalar(double value) { return SignalTensor(Shape{1}, {value}); }

std::size_t SignalTensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ContractViolation("SignalTensor::dim: axis " + std::to_string(axis) +
                            " out of range for shape " + to_string(shape_));
  }
  return shape_[axis];
}

double SignalTensor::item() const {
  if (data_.size() != 1) {
    throw ContractViolation("SignalTensor::item: tensor of shape " + to_string(shape_) +
                            " is not a scalar");
  }
  return data_[0];
}

void SignalTensor::accumulate_grad(std::span<const double> delta) {
  if (delta.size() != data_.size()) {
    throw ContractViolation("SignalTensor::accumulate_grad: size mismatch");
  }
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i) grad_[i] += delta[i];
}

void SignalTensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

bool SignalTensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

SignalTensor SignalTensor::reshaped(Shape shape) const {
  return SignalTensor(std::move(shape), data_);
}

}  // namespace postfilter::ad
