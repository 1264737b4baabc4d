#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "postfilter/autodiff/tensor.hpp"

namespace postfilter::models {

using ad::Shape;
using ad::SignalTensor;

struct Parameter {
  std::string name;
  SignalTensor tensor;
};

/// Named parameter tensors in creation order. Indices handed out by add()
/// stay valid; references into the list are stable once a network is built.
class ParameterList {
 public:
  std::size_t add(std::string name, Shape shape);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t element_count() const noexcept;
  Parameter& operator[](std::size_t i) { return items_[i]; }
  const Parameter& operator[](std::size_t i) const { return items_[i]; }
  SignalTensor& tensor(std::size_t i) { return items_[i].tensor; }
  const SignalTensor& tensor(std::size_t i) const { return items_[i].tensor; }

  /// Index of `name`, or size() when absent.
  std::size_t find(const std::string& name) const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grad();
  bool all_finite() const;

 private:
  std::vector<Parameter> items_;
};

/// Portable uniform draws in [-bound, bound) from a seeded xorshift128+ stream.
class UniformInit {
 public:
  explicit UniformInit(std::uint64_t seed);
  void fill(SignalTensor& tensor, double bound);

 private:
  std::uint64_t state_[2];
  std::uint64_t next();
};

/// Every [C_out x C_in x K] weight redrawn with fan-in bound 1/sqrt(C_in K)
/// (including zero-initialised output layers); biases set to zero.
void randomize_weights(ParameterList& params, std::uint64_t seed);

}  // namespace postfilter::models
