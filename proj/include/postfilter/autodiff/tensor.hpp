#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace postfilter {

/// Raised when an operation's preconditions on shapes or arguments are not met.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace postfilter

namespace postfilter::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major tensor of doubles with an optional gradient buffer.
///
/// Waveforms are [1 x T] (or [B x 1 x T] when batched); network parameters
/// are stored as [C_out x C_in x K] for convolutions and [C] for biases.
class SignalTensor {
 public:
  SignalTensor() = default;
  explicit SignalTensor(Shape shape, double fill = 0.0);
  SignalTensor(Shape shape, std::vector<double> values);

  static SignalTensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool flag) noexcept { requires_grad_ = flag; }

  bool has_grad() const noexcept { return !grad_.empty(); }
  std::span<const double> grad() const noexcept { return grad_; }
  std::span<double> grad() noexcept { return grad_; }
  void accumulate_grad(std::span<const double> delta);
  void zero_grad();
  void clear_grad() noexcept { grad_.clear(); }

  bool all_finite() const noexcept;

  /// Same data under a new shape with equal element count.
  SignalTensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

}  // namespace postfilter::ad
