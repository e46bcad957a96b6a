#pragma once

#include <vector>

#include "kgsum/nn/tape.hpp"

namespace kgsum::nn {

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(const std::vector<Parameter*>& params, double max_norm);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return step_; }
  void set_step_count(long t) { step_ = t; }

  // One bias-corrected update from the accumulated gradients; does not zero
  // them.
  void step(const std::vector<Parameter*>& params);

 private:
  AdamConfig cfg_;
  long step_ = 0;
};

}  // namespace kgsum::nn
