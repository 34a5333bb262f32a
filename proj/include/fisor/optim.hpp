#ifndef FISOR_OPTIM_HPP
#define FISOR_OPTIM_HPP

#include <cstdint>

#include "fisor/mlp.hpp"

namespace fisor {

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step_count = 0;
  GradBuffer m;
  GradBuffer v;

  static AdamState like(const Mlp& net, double lr = 3e-4);
};

// Standard Adam with bias correction. Throws DivergenceError when grads are
// non-finite or the update produces non-finite parameters.
void adam_step(Mlp& net, const GradBuffer& grads, AdamState& opt);

// target <- (1 - alpha) * target + alpha * online, elementwise.
void soft_update(Mlp& target, const Mlp& online, double alpha);

}  // namespace fisor

#endif
