#include "fisor/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace fisor {

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

Mlp Mlp::init(const std::vector<int>& widths, RngStream& rng) {
  if (widths.size() < 2) throw std::invalid_argument("mlp: need at least two widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("mlp: widths must be positive");
  Mlp net;
  net.widths = widths;
  net.weights.resize(widths.size() - 1);
  net.biases.resize(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    net.weights[l].resize(static_cast<std::size_t>(in) * out);
    for (auto& w : net.weights[l]) w = rng.uniform(-bound, bound);
    net.biases[l].assign(out, 0.0);
  }
  return net;
}

GradBuffer GradBuffer::like(const Mlp& net) {
  GradBuffer g;
  g.weights.resize(net.weights.size());
  g.biases.resize(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights[l].assign(net.weights[l].size(), 0.0);
    g.biases[l].assign(net.biases[l].size(), 0.0);
  }
  return g;
}

void GradBuffer::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const double* src = other.weights[l].data();
    double* dst = weights[l].data();
    for (std::size_t i = 0; i < weights[l].size(); ++i) dst[i] += src[i];
    const double* bs = other.biases[l].data();
    double* bd = biases[l].data();
    for (std::size_t i = 0; i < biases[l].size(); ++i) bd[i] += bs[i];
  }
}

void GradBuffer::scale(double s) {
  for (auto& w : weights)
    for (auto& v : w) v *= s;
  for (auto& b : biases)
    for (auto& v : b) v *= s;
}

bool GradBuffer::all_finite() const {
  for (const auto& w : weights)
    for (double v : w)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

void forward(const Mlp& net, const double* input, MlpWorkspace& ws) {
  const int L = net.layers();
  ws.acts.resize(L + 1);
  ws.acts[0].assign(input, input + net.widths[0]);
  for (int l = 0; l < L; ++l) {
    const int in = net.widths[l];
    const int out = net.widths[l + 1];
    auto& y = ws.acts[l + 1];
    y.assign(net.biases[l].begin(), net.biases[l].end());
    const double* x = ws.acts[l].data();
    const double* w = net.weights[l].data();
    double* yd = y.data();
    for (int i = 0; i < in; ++i) {
      const double xi = x[i];
      const double* wrow = w + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) yd[o] += xi * wrow[o];
    }
    if (l + 1 < L)
      for (int o = 0; o < out; ++o) yd[o] = yd[o] > 0.0 ? yd[o] : 0.0;
  }
}

std::vector<double> forward(const Mlp& net, const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != net.input_dim())
    throw std::invalid_argument("mlp forward: input width mismatch");
  MlpWorkspace ws;
  forward(net, input.data(), ws);
  return ws.acts.back();
}

void backward(const Mlp& net, const MlpWorkspace& ws, const double* upstream,
              GradBuffer& grads) {
  const int L = net.layers();
  if (static_cast<int>(ws.acts.size()) != L + 1)
    throw std::invalid_argument("mlp backward: workspace not filled by forward");

  // delta holds dLoss/d(activation) for the current layer output.
  std::vector<double> delta(upstream, upstream + net.output_dim());
  std::vector<double> prev;
  for (int l = L - 1; l >= 0; --l) {
    const int in = net.widths[l];
    const int out = net.widths[l + 1];
    const double* x = ws.acts[l].data();
    const double* w = net.weights[l].data();
    double* gw = grads.weights[l].data();
    double* gb = grads.biases[l].data();
    const double* d = delta.data();

    for (int o = 0; o < out; ++o) gb[o] += d[o];
    for (int i = 0; i < in; ++i) {
      const double xi = x[i];
      double* grow = gw + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) grow[o] += xi * d[o];
    }

    if (l == 0) break;
    prev.assign(in, 0.0);
    for (int i = 0; i < in; ++i) {
      // act > 0 iff pre-activation > 0; subgradient at 0 taken as 0.
      if (x[i] <= 0.0) continue;
      const double* wrow = w + static_cast<std::size_t>(i) * out;
      double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
      int o = 0;
      for (; o + 4 <= out; o += 4) {
        acc0 += wrow[o] * d[o];
        acc1 += wrow[o + 1] * d[o + 1];
        acc2 += wrow[o + 2] * d[o + 2];
        acc3 += wrow[o + 3] * d[o + 3];
      }
      double acc = (acc0 + acc1) + (acc2 + acc3);
      for (; o < out; ++o) acc += wrow[o] * d[o];
      prev[i] = acc;
    }
    delta.swap(prev);
  }
}

}  // namespace fisor
