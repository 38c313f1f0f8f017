#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvg4d {

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(const std::string& group, size_t index);
  const std::string& group() const { return group_; }
  size_t index() const { return index_; }

 private:
  std::string group_;
  size_t index_;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t step = 0;

  void resize(size_t n) {
    m.resize(n, 0.0);
    v.resize(n, 0.0);
  }
  /// Keeps the entries whose flag is set, preserving order.
  void compact(const std::vector<bool>& keep, size_t stride);
};

/// Bias-corrected Adam. Validates every gradient before touching any state,
/// so a NonFiniteGradient leaves params and moments unchanged.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const std::string& group, const AdamHyper& hyper = {});

}  // namespace pvg4d
