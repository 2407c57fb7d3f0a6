#pragma once

#include <cstdint>
#include <vector>

#include "tslab/tensor.hpp"

namespace tslab {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

// Adam with decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
// Tensors without a gradient in a step are left untouched.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config);

  // Returns the pre-clip global gradient norm.
  double step(double lr);
  void zero_grad();
  std::int64_t steps() const { return steps_; }

 private:
  std::vector<Tensor> params_;
  AdamWConfig config_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::int64_t steps_ = 0;
};

}  // namespace tslab
