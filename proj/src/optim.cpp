#include "tslab/optim.hpp"

#include <cmath>

namespace tslab {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0f);
    v_.emplace_back(p.numel(), 0.0f);
  }
}

double AdamW::step(double lr) {
  ++steps_;
  double sq = 0.0;
  for (const auto& p : params_) {
    if (!p.has_grad()) continue;
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto w = p.data();
    const auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * clip;
      m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * gj);
      v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * gj * gj);
      const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps) + config_.weight_decay * w[j];
      w[j] = static_cast<float>(w[j] - lr * update);
    }
  }
  return norm;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace tslab
