#include <cmath>

#include <fmt/core.h>

#include "nertag/errors.hpp"
#include "nertag/training.hpp"

namespace nertag::train {

void adam_step(const std::vector<TensorView>& params, const std::vector<ConstTensorView>& grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError(fmt::format("{} parameter tensors but {} gradients", params.size(), grads.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows != grads[i].rows || params[i].cols != grads[i].cols) {
      throw ShapeError(fmt::format("gradient for '{}' is {}x{}, parameter is {}x{}", params[i].name,
                                   grads[i].rows, grads[i].cols, params[i].rows, params[i].cols));
    }
    for (const double g : grads[i].values()) {
      if (!std::isfinite(g)) {
        throw NumericError(fmt::format("non-finite gradient in '{}'", params[i].name));
      }
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Vector::Zero(p.rows * p.cols));
      state.second_moment.push_back(Vector::Zero(p.rows * p.cols));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("optimizer state does not match the parameter list");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Vector& m = state.first_moment[i];
    Vector& v = state.second_moment[i];
    if (m.size() != params[i].rows * params[i].cols) {
      throw ShapeError(fmt::format("optimizer state for '{}' has the wrong size", params[i].name));
    }
    const auto theta = params[i].values();
    const auto g = grads[i].values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const auto e = static_cast<Eigen::Index>(j);
      m(e) = state.beta1 * m(e) + (1.0 - state.beta1) * g[j];
      v(e) = state.beta2 * v(e) + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m(e) / correction1;
      const double v_hat = v(e) / correction2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void LrSchedule::validate() const {
  if (!(lr_min > 0.0) || !(lr_min <= lr_max)) {
    throw ValidationError(fmt::format("learning rate range [{}, {}] is invalid", lr_min, lr_max));
  }
  if (cycle_length < 2) throw ValidationError("cycle length must be at least 2 steps");
}

double lr_at(const LrSchedule& schedule, std::uint64_t step) {
  const auto cycle = static_cast<double>(schedule.cycle_length);
  const double half = cycle / 2.0;
  const double position = static_cast<double>(step % schedule.cycle_length);
  const double distance = position <= half ? position : cycle - position;
  return schedule.lr_min + (schedule.lr_max - schedule.lr_min) * (distance / half);
}

double clip_global_norm(const std::vector<TensorView>& grads, double max_norm) {
  double sum = 0.0;
  for (const auto& g : grads) {
    for (const double x : g.values()) sum += x * x;
  }
  const double norm = std::sqrt(sum);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& g : grads) {
      for (double& x : g.values()) x *= scale;
    }
  }
  return norm;
}

}  // namespace nertag::train
