#include <cmath>
#include <stdexcept>

#include "tac/nn.hpp"

namespace tac::nn {

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {
  if (!(cfg.learning_rate > 0.0) || !(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0))
    throw std::invalid_argument("invalid Adam hyperparameters");
}

void Adam::step(std::span<double> values, std::span<const double> grads,
                const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
  if (values.size() != m_.size() || grads.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
  const double lr = cfg_.learning_rate / (1.0 + cfg_.decay * static_cast<double>(iterations_));
  ++iterations_;
  const double t = static_cast<double>(iterations_);
  const double lr_t = lr * std::sqrt(1.0 - std::pow(cfg_.beta2, t)) / (1.0 - std::pow(cfg_.beta1, t));
  for (const auto& [begin, end] : ranges) {
    for (std::size_t i = begin; i < end; ++i) {
      const double gi = grads[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * gi;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * gi * gi;
      values[i] -= lr_t * m_[i] / (std::sqrt(v_[i]) + cfg_.epsilon);
    }
  }
}

}  // namespace tac::nn
