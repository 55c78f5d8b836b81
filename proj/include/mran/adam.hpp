#pragma once

#include <cstdint>
#include <vector>

#include "mran/tensor.hpp"

namespace mran {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 added to the gradient; 0 disables
  double clip_norm = 0.0;     // global grad-norm clip; 0 disables
};

// Adam with bias correction over one named parameter set. Each network
// component owns its own instance; moment buffers match their parameter
// shapes and the step counter increases by one per step() call. Gradients
// are left untouched; the caller zeroes them between steps.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step();
  void zero_grad();

  int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  int64_t t_ = 0;
  AdamConfig config_;
};

}  // namespace mran
