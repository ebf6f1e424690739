#pragma once
#include <cstdint>
#include <vector>

#include "mygo/tensor.hpp"

namespace mygo {

enum class OptKind { sgd_momentum, adam };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double lr = 1e-3;
  double momentum = 0.9;  // sgd_momentum
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Holds per-parameter moment buffers; step() consumes and clears gradients.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::vector<Tensor> params);

  // Applies one update from the accumulated gradients, then clears them.
  // Throws if any parameter is missing its gradient.
  void step();
  int64_t step_count() const { return steps_; }
  const OptimizerConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  OptimizerConfig cfg_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;  // momentum / first moment
  std::vector<std::vector<double>> v_;  // second moment (adam)
  int64_t steps_ = 0;
};

}  // namespace mygo
