#ifndef FISOR_MLP_HPP
#define FISOR_MLP_HPP

#include <cstddef>
#include <vector>

#include "fisor/rng.hpp"

namespace fisor {

// Fully connected ReLU network, float64, identity output layer.
//
// Weights are stored input-major per layer (w[l][i * out + o]) so both the
// forward pass and the weight-gradient accumulation run as contiguous
// axpy loops over the output dimension.
struct Mlp {
  std::vector<int> widths;                   // input, hidden..., output
  std::vector<std::vector<double>> weights;  // per layer, size in*out
  std::vector<std::vector<double>> biases;   // per layer, size out

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int layers() const { return static_cast<int>(weights.size()); }
  std::size_t param_count() const;
  bool same_shape(const Mlp& other) const { return widths == other.widths; }

  // Fan-in scaled uniform weights (bound 1/sqrt(fan_in)), zero biases.
  static Mlp init(const std::vector<int>& widths, RngStream& rng);
};

// Per-layer activation storage for one sample; reusable across calls.
struct MlpWorkspace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[L] = output
};

// Gradient (or moment) buffer shaped like a network's parameters.
struct GradBuffer {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static GradBuffer like(const Mlp& net);
  void zero();
  void add(const GradBuffer& other);
  void scale(double s);
  bool all_finite() const;
};

// Deterministic affine-ReLU composition; throws on input width mismatch.
void forward(const Mlp& net, const double* input, MlpWorkspace& ws);
std::vector<double> forward(const Mlp& net, const std::vector<double>& input);

// Exact reverse-mode gradients of dot(output, upstream) w.r.t. parameters,
// accumulated into grads. Must be called on a workspace filled by forward.
// ReLU subgradient at 0 is 0.
void backward(const Mlp& net, const MlpWorkspace& ws, const double* upstream,
              GradBuffer& grads);

}  // namespace fisor

#endif
