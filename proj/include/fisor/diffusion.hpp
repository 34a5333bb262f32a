#ifndef FISOR_DIFFUSION_HPP
#define FISOR_DIFFUSION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fisor/dataset.hpp"
#include "fisor/mlp.hpp"
#include "fisor/optim.hpp"
#include "fisor/rng.hpp"

#include "json.hpp"

namespace fisor {

// Variance-preserving noise schedule over T discrete steps:
// alpha[t]^2 + sigma[t]^2 = 1, alpha[0] = 1, alpha[T] ~ 0 so the terminal
// forward marginal is close to a standard normal. The per-step quantities
// drive the ancestral sampler.
struct NoiseSchedule {
  int T = 5;
  std::vector<double> alpha;       // index 0..T, monotone decreasing
  std::vector<double> sigma;       // sqrt(1 - alpha^2)
  std::vector<double> step_alpha;  // index 1..T: alpha_bar_t / alpha_bar_{t-1}
  std::vector<double> step_beta;   // 1 - step_alpha
  std::vector<double> post_var;    // posterior variance per reverse step

  // Cosine alpha-bar with the usual per-step beta cap; T >= 1.
  static NoiseSchedule cosine(int T);

  nlohmann::json to_json() const;
  static NoiseSchedule from_json(const nlohmann::json& j);
};

// 64-dimensional sinusoidal embedding of a discrete timestep.
inline constexpr int kTimeEmbedDim = 64;
void time_embedding(int t, double* out);

// Noise prediction network z(a_t, s, t); input is [a_t | s | embed(t)].
struct NoisePredictor {
  Mlp net;
  int act_dim = 0;
  int obs_dim = 0;
  mutable std::uint64_t n_evals = 0;  // sampling-time forward count

  static NoisePredictor init(int obs_dim, int act_dim, const std::vector<int>& hidden,
                             RngStream& rng);

  int input_dim() const { return act_dim + obs_dim + kTimeEmbedDim; }
  void build_input(const double* a_t, const double* obs, int t, double* out) const;
  std::vector<double> predict(const double* a_t, const double* obs, int t) const;
};

struct DiffusionHyper {
  double lr = 3e-4;
  int batch = 2048;
  int log_every = 1000;
};

struct PolicyTrainStats {
  std::uint64_t skipped_batches = 0;  // all-zero-weight minibatches
  double last_loss = 0.0;
};

class PolicyCurveLog {
public:
  PolicyCurveLog() = default;
  explicit PolicyCurveLog(std::string path);
  void append(std::uint64_t step, double loss, std::uint64_t skipped, double mean_weight);

private:
  std::string path_;
};

// Weighted denoising regression: for each sampled row, draw t ~ U{1..T},
// z ~ N(0, I), form a_t = alpha_t a + sigma_t z and descend
// mean_i w_i ||z_i - z_theta(a_t, s, t)||^2. Batches whose weights are all
// zero are skipped and counted. Weights come precomputed from the frozen
// critics (one value per dataset row).
PolicyTrainStats train_diffusion_policy(NoisePredictor& pred, AdamState& opt,
                                        const NoiseSchedule& sched, const Dataset& ds,
                                        const std::vector<double>& weights,
                                        std::uint64_t steps, const DiffusionHyper& hyper,
                                        RngStream& rng, PolicyCurveLog* log = nullptr);

// Ancestral sampling: start from a standard normal, run T denoising steps
// (exactly T predictor evaluations), clip to the action bounds.
std::vector<double> sample_action(const NoisePredictor& pred, const NoiseSchedule& sched,
                                  const double* obs, RngStream& rng,
                                  const std::vector<double>& act_lo,
                                  const std::vector<double>& act_hi);

// Unit-variance Gaussian head for the no-diffusion ablation: the same
// weighted regression on the action mean.
PolicyTrainStats train_gaussian_policy(Mlp& net, AdamState& opt, const Dataset& ds,
                                       const std::vector<double>& weights,
                                       std::uint64_t steps, const DiffusionHyper& hyper,
                                       RngStream& rng, PolicyCurveLog* log = nullptr);

std::vector<double> sample_gaussian_action(const Mlp& net, const double* obs, RngStream& rng,
                                           const std::vector<double>& act_lo,
                                           const std::vector<double>& act_hi);

}  // namespace fisor

#endif
