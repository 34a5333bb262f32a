#include "fisor/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "fisor/errors.hpp"

namespace fisor {

AdamState AdamState::like(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = GradBuffer::like(net);
  s.v = GradBuffer::like(net);
  return s;
}

namespace {

void adam_update_span(double* p, const double* g, double* m, double* v, std::size_t n,
                      const AdamState& opt, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

bool span_finite(const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

}  // namespace

void adam_step(Mlp& net, const GradBuffer& grads, AdamState& opt) {
  if (grads.weights.size() != net.weights.size())
    throw std::invalid_argument("adam: gradient shape mismatch");
  if (!grads.all_finite()) throw DivergenceError("adam: non-finite gradient, update rejected");

  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));

  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    adam_update_span(net.weights[l].data(), grads.weights[l].data(), opt.m.weights[l].data(),
                     opt.v.weights[l].data(), net.weights[l].size(), opt, bc1, bc2);
    adam_update_span(net.biases[l].data(), grads.biases[l].data(), opt.m.biases[l].data(),
                     opt.v.biases[l].data(), net.biases[l].size(), opt, bc1, bc2);
  }

  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (!span_finite(net.weights[l].data(), net.weights[l].size()) ||
        !span_finite(net.biases[l].data(), net.biases[l].size()))
      throw DivergenceError("adam: non-finite parameter after update");
  }
}

void soft_update(Mlp& target, const Mlp& online, double alpha) {
  if (!target.same_shape(online))
    throw std::invalid_argument("soft_update: architecture mismatch");
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    double* t = target.weights[l].data();
    const double* o = online.weights[l].data();
    for (std::size_t i = 0; i < target.weights[l].size(); ++i)
      t[i] = (1.0 - alpha) * t[i] + alpha * o[i];
    double* tb = target.biases[l].data();
    const double* ob = online.biases[l].data();
    for (std::size_t i = 0; i < target.biases[l].size(); ++i)
      tb[i] = (1.0 - alpha) * tb[i] + alpha * ob[i];
  }
}

}  // namespace fisor
