#include "postfilter/models/parameters.hpp"

#include <algorithm>
#include <cmath>

namespace postfilter::models {

std::size_t ParameterList::add(std::string name, Shape shape) {
  if (find(name) != items_.size()) throw ContractViolation("duplicate parameter name '" + name + "'");
  items_.push_back({std::move(name), SignalTensor(std::move(shape))});
  items_.back().tensor.set_requires_grad(true);
  return items_.size() - 1;
}

std::size_t ParameterList::element_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.size();
  return n;
}

std::size_t ParameterList::find(const std::string& name) const {
  auto it = std::find_if(items_.begin(), items_.end(), [&](const Parameter& p) { return p.name == name; });
  return static_cast<std::size_t>(it - items_.begin());
}

void ParameterList::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

bool ParameterList::all_finite() const {
  return std::all_of(items_.begin(), items_.end(), [](const Parameter& p) { return p.tensor.all_finite(); });
}

UniformInit::UniformInit(std::uint64_t seed) {
  // splitmix64 expansion of the seed into xorshift128+ state.
  auto split = [&seed]() {
    std::uint64_t z = (seed += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  state_[0] = split();
  state_[1] = split();
}

std::uint64_t UniformInit::next() {
  std::uint64_t s1 = state_[0];
  const std::uint64_t s0 = state_[1];
  const std::uint64_t result = s0 + s1;
  state_[0] = s0;
  s1 ^= s1 << 23;
  state_[1] = s1 ^ s0 ^ (s1 >> 18) ^ (s0 >> 5);
  return result;
}

void UniformInit::fill(SignalTensor& tensor, double bound) {
  for (double& v : tensor.values()) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    v = bound * (2.0 * u - 1.0);
  }
}

void randomize_weights(ParameterList& params, std::uint64_t seed) {
  UniformInit init(seed);
  for (std::size_t i = 0; i < params.size(); ++i) {
    SignalTensor& t = params.tensor(i);
    if (t.rank() == 3) {
      init.fill(t, 1.0 / std::sqrt(static_cast<double>(t.dim(1) * t.dim(2))));
    } else {
      std::fill(t.values().begin(), t.values().end(), 0.0);
    }
  }
}

}  // namespace postfilter::models
