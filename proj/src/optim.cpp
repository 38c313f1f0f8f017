#include "pvg4d/optim.hpp"

#include <cmath>

namespace pvg4d {

NonFiniteGradient::NonFiniteGradient(const std::string& group, size_t index)
    : std::runtime_error("non-finite gradient in group '" + group + "' at index " +
                         std::to_string(index)),
      group_(group),
      index_(index) {}

void AdamState::compact(const std::vector<bool>& keep, size_t stride) {
  size_t out = 0;
  for (size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    for (size_t k = 0; k < stride; ++k) {
      m[out * stride + k] = m[i * stride + k];
      v[out * stride + k] = v[i * stride + k];
    }
    ++out;
  }
  m.resize(out * stride);
  v.resize(out * stride);
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const std::string& group, const AdamHyper& h) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient size mismatch in '" + group + "'");
  for (size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i])) throw NonFiniteGradient(group, i);
  state.resize(params.size());
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * grads[i];
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + h.eps);
  }
}

}  // namespace pvg4d
