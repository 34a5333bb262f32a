#ifndef FISOR_BATCH_HPP
#define FISOR_BATCH_HPP

#include <array>
#include <functional>
#include <vector>

#include "fisor/mlp.hpp"
#include "fisor/thread_pool.hpp"

namespace fisor {

// Minibatch forward/backward over a fixed number of chunks. The chunk count
// is a constant, per-chunk gradients are merged in chunk order, and all
// randomness is drawn before the parallel section, so training results do
// not depend on the worker count.
inline constexpr int kBatchChunks = 8;

class BatchWork {
public:
  explicit BatchWork(const Mlp& net) {
    for (int k = 0; k < kBatchChunks; ++k) grads_.push_back(GradBuffer::like(net));
    ws_.resize(kBatchChunks);
  }

  // Forward-only; writes B * out_dim values into out.
  void eval(const Mlp& net, const std::vector<double>& in, int batch,
            std::vector<double>& out) {
    const int in_dim = net.input_dim();
    const int out_dim = net.output_dim();
    out.resize(static_cast<std::size_t>(batch) * out_dim);
    parallel_tasks(kBatchChunks, [&](int k) {
      const int lo = static_cast<int>(static_cast<long long>(batch) * k / kBatchChunks);
      const int hi = static_cast<int>(static_cast<long long>(batch) * (k + 1) / kBatchChunks);
      for (int b = lo; b < hi; ++b) {
        forward(net, in.data() + static_cast<std::size_t>(b) * in_dim, ws_[k]);
        const auto& y = ws_[k].acts.back();
        for (int o = 0; o < out_dim; ++o) out[static_cast<std::size_t>(b) * out_dim + o] = y[o];
      }
    });
  }

  // Forward + backward. For each sample the callback receives the network
  // output and fills the upstream gradient; it returns the sample's loss.
  // Returns the summed loss; total receives the summed gradients.
  double grad_pass(const Mlp& net, const std::vector<double>& in, int batch,
                   const std::function<double(int, const double*, double*)>& upstream_fn,
                   GradBuffer& total) {
    const int in_dim = net.input_dim();
    const int out_dim = net.output_dim();
    std::array<double, kBatchChunks> chunk_loss{};
    parallel_tasks(kBatchChunks, [&](int k) {
      grads_[k].zero();
      std::vector<double> dout(out_dim);
      double loss = 0.0;
      const int lo = static_cast<int>(static_cast<long long>(batch) * k / kBatchChunks);
      const int hi = static_cast<int>(static_cast<long long>(batch) * (k + 1) / kBatchChunks);
      for (int b = lo; b < hi; ++b) {
        forward(net, in.data() + static_cast<std::size_t>(b) * in_dim, ws_[k]);
        loss += upstream_fn(b, ws_[k].acts.back().data(), dout.data());
        backward(net, ws_[k], dout.data(), grads_[k]);
      }
      chunk_loss[k] = loss;
    });
    total.zero();
    double loss = 0.0;
    for (int k = 0; k < kBatchChunks; ++k) {
      total.add(grads_[k]);
      loss += chunk_loss[k];
    }
    return loss;
  }

private:
  std::vector<GradBuffer> grads_;
  std::vector<MlpWorkspace> ws_;
};

}  // namespace fisor

#endif
