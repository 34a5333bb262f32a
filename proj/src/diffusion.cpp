#include "fisor/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fisor/batch.hpp"
#include "fisor/errors.hpp"

namespace fisor {

NoiseSchedule NoiseSchedule::cosine(int T) {
  if (T < 1) throw ConfigError("noise schedule: T must be >= 1");
  NoiseSchedule s;
  s.T = T;
  const double shift = 0.008;
  auto f = [&](double t) {
    const double x = ((t / T) + shift) / (1.0 + shift) * (M_PI / 2.0);
    const double c = std::cos(x);
    return c * c;
  };

  // Per-step retention factors with a capped final beta, then rebuild the
  // cumulative product so alpha^2 + sigma^2 = 1 holds exactly. The cap
  // bounds the reverse-step gain 1/sqrt(step_alpha); at tiny T the raw
  // cosine ratio collapses to ~0 at t = T and would amplify predictor error
  // by two orders of magnitude.
  std::vector<double> abar(T + 1, 1.0);
  s.step_alpha.assign(T + 1, 1.0);
  s.step_beta.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double sa = f(t) / f(t - 1);
    sa = std::max(sa, 0.05);  // beta <= 0.95
    s.step_alpha[t] = sa;
    s.step_beta[t] = 1.0 - sa;
    abar[t] = abar[t - 1] * sa;
  }

  s.alpha.resize(T + 1);
  s.sigma.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    s.alpha[t] = std::sqrt(abar[t]);
    s.sigma[t] = std::sqrt(1.0 - abar[t]);
  }

  s.post_var.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    // beta_tilde_t = beta_t (1 - abar_{t-1}) / (1 - abar_t); zero at t = 1.
    const double denom = 1.0 - abar[t];
    s.post_var[t] = denom > 0.0 ? s.step_beta[t] * (1.0 - abar[t - 1]) / denom : 0.0;
  }
  return s;
}

nlohmann::json NoiseSchedule::to_json() const {
  return nlohmann::json{{"T", T},
                        {"alpha", alpha},
                        {"sigma", sigma},
                        {"step_alpha", step_alpha},
                        {"step_beta", step_beta},
                        {"post_var", post_var}};
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
  NoiseSchedule s;
  s.T = j.at("T").get<int>();
  s.alpha = j.at("alpha").get<std::vector<double>>();
  s.sigma = j.at("sigma").get<std::vector<double>>();
  s.step_alpha = j.at("step_alpha").get<std::vector<double>>();
  s.step_beta = j.at("step_beta").get<std::vector<double>>();
  s.post_var = j.at("post_var").get<std::vector<double>>();
  return s;
}

void time_embedding(int t, double* out) {
  constexpr int half = kTimeEmbedDim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / (half - 1));
    out[2 * i] = std::sin(t * freq);
    out[2 * i + 1] = std::cos(t * freq);
  }
}

NoisePredictor NoisePredictor::init(int obs_dim, int act_dim, const std::vector<int>& hidden,
                                    RngStream& rng) {
  NoisePredictor p;
  p.obs_dim = obs_dim;
  p.act_dim = act_dim;
  std::vector<int> widths;
  widths.push_back(act_dim + obs_dim + kTimeEmbedDim);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(act_dim);
  p.net = Mlp::init(widths, rng);
  return p;
}

void NoisePredictor::build_input(const double* a_t, const double* obs, int t,
                                 double* out) const {
  std::memcpy(out, a_t, act_dim * sizeof(double));
  std::memcpy(out + act_dim, obs, obs_dim * sizeof(double));
  time_embedding(t, out + act_dim + obs_dim);
}

std::vector<double> NoisePredictor::predict(const double* a_t, const double* obs,
                                            int t) const {
  thread_local MlpWorkspace ws;
  thread_local std::vector<double> in;
  in.resize(input_dim());
  build_input(a_t, obs, t, in.data());
  forward(net, in.data(), ws);
  ++n_evals;
  return ws.acts.back();
}

PolicyCurveLog::PolicyCurveLog(std::string path) : path_(std::move(path)) {
  std::ofstream f(path_, std::ios::trunc);
  f << "step,loss,skipped_batches,mean_weight\n";
}

void PolicyCurveLog::append(std::uint64_t step, double loss, std::uint64_t skipped,
                            double mean_weight) {
  if (path_.empty()) return;
  std::ofstream f(path_, std::ios::app);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%llu,%.17g,%llu,%.17g\n",
                static_cast<unsigned long long>(step), loss,
                static_cast<unsigned long long>(skipped), mean_weight);
  f << buf;
}

PolicyTrainStats train_diffusion_policy(NoisePredictor& pred, AdamState& opt,
                                        const NoiseSchedule& sched, const Dataset& ds,
                                        const std::vector<double>& weights,
                                        std::uint64_t steps, const DiffusionHyper& hyper,
                                        RngStream& rng, PolicyCurveLog* log) {
  if (ds.size() == 0)
    throw DataError(DataError::Kind::empty, "policy training: empty dataset");
  if (weights.size() != ds.size())
    throw ConfigError("policy training: weight vector size mismatch");

  const int B = hyper.batch;
  const int od = ds.obs_dim;
  const int ad = ds.act_dim;
  const int in_dim = pred.input_dim();

  BatchWork work(pred.net);
  GradBuffer grads = GradBuffer::like(pred.net);
  std::vector<double> in_buf(static_cast<std::size_t>(B) * in_dim);
  std::vector<double> z_buf(static_cast<std::size_t>(B) * ad);
  std::vector<double> noisy(ad);
  std::vector<double> w_buf(B);

  PolicyTrainStats stats;
  for (std::uint64_t step = 0; step < steps; ++step) {
    double w_sum = 0.0;
    for (int b = 0; b < B; ++b) {
      const std::size_t i = rng.uniform_index(ds.size());
      const int t = 1 + static_cast<int>(rng.uniform_index(sched.T));
      for (int k = 0; k < ad; ++k) {
        const double z = rng.normal();
        z_buf[static_cast<std::size_t>(b) * ad + k] = z;
        noisy[k] = sched.alpha[t] * ds.act[i * ad + k] + sched.sigma[t] * z;
      }
      pred.build_input(noisy.data(), ds.obs.data() + i * od, t,
                       in_buf.data() + static_cast<std::size_t>(b) * in_dim);
      w_buf[b] = weights[i];
      w_sum += weights[i];
    }

    if (w_sum == 0.0) {
      ++stats.skipped_batches;
      continue;
    }

    const double inv_b = 1.0 / B;
    const double loss =
        work.grad_pass(pred.net, in_buf, B,
                       [&](int b, const double* out, double* dout) {
                         const double w = w_buf[b];
                         const double* z = z_buf.data() + static_cast<std::size_t>(b) * ad;
                         double l = 0.0;
                         for (int k = 0; k < ad; ++k) {
                           const double diff = z[k] - out[k];
                           l += diff * diff;
                           dout[k] = -2.0 * w * diff * inv_b;
                         }
                         return w * l;
                       },
                       grads) *
        inv_b;
    adam_step(pred.net, grads, opt);
    stats.last_loss = loss;

    if (!std::isfinite(loss))
      throw DivergenceError("diffusion policy training: non-finite loss at step " +
                            std::to_string(step));
    if (log != nullptr &&
        (step % static_cast<std::uint64_t>(hyper.log_every) == 0 || step + 1 == steps))
      log->append(step, loss, stats.skipped_batches, w_sum * inv_b);
  }
  return stats;
}

std::vector<double> sample_action(const NoisePredictor& pred, const NoiseSchedule& sched,
                                  const double* obs, RngStream& rng,
                                  const std::vector<double>& act_lo,
                                  const std::vector<double>& act_hi) {
  const int ad = pred.act_dim;
  std::vector<double> x(ad);
  for (int k = 0; k < ad; ++k) x[k] = rng.normal();

  for (int t = sched.T; t >= 1; --t) {
    const auto eps = pred.predict(x.data(), obs, t);
    const double inv_sa = 1.0 / std::sqrt(sched.step_alpha[t]);
    const double coef = sched.step_beta[t] / sched.sigma[t];
    for (int k = 0; k < ad; ++k) x[k] = inv_sa * (x[k] - coef * eps[k]);
    if (t > 1) {
      const double sd = std::sqrt(sched.post_var[t]);
      for (int k = 0; k < ad; ++k) x[k] += sd * rng.normal();
    }
  }
  for (int k = 0; k < ad; ++k) x[k] = std::clamp(x[k], act_lo[k], act_hi[k]);
  return x;
}

PolicyTrainStats train_gaussian_policy(Mlp& net, AdamState& opt, const Dataset& ds,
                                       const std::vector<double>& weights,
                                       std::uint64_t steps, const DiffusionHyper& hyper,
                                       RngStream& rng, PolicyCurveLog* log) {
  if (ds.size() == 0)
    throw DataError(DataError::Kind::empty, "policy training: empty dataset");
  if (weights.size() != ds.size())
    throw ConfigError("policy training: weight vector size mismatch");

  const int B = hyper.batch;
  const int od = ds.obs_dim;
  const int ad = ds.act_dim;

  BatchWork work(net);
  GradBuffer grads = GradBuffer::like(net);
  std::vector<double> in_buf(static_cast<std::size_t>(B) * od);
  std::vector<double> a_buf(static_cast<std::size_t>(B) * ad);
  std::vector<double> w_buf(B);

  PolicyTrainStats stats;
  for (std::uint64_t step = 0; step < steps; ++step) {
    double w_sum = 0.0;
    for (int b = 0; b < B; ++b) {
      const std::size_t i = rng.uniform_index(ds.size());
      std::memcpy(in_buf.data() + static_cast<std::size_t>(b) * od, ds.obs.data() + i * od,
                  od * sizeof(double));
      std::memcpy(a_buf.data() + static_cast<std::size_t>(b) * ad, ds.act.data() + i * ad,
                  ad * sizeof(double));
      w_buf[b] = weights[i];
      w_sum += weights[i];
    }
    if (w_sum == 0.0) {
      ++stats.skipped_batches;
      continue;
    }

    const double inv_b = 1.0 / B;
    const double loss =
        work.grad_pass(net, in_buf, B,
                       [&](int b, const double* out, double* dout) {
                         const double w = w_buf[b];
                         const double* a = a_buf.data() + static_cast<std::size_t>(b) * ad;
                         double l = 0.0;
                         for (int k = 0; k < ad; ++k) {
                           const double diff = a[k] - out[k];
                           l += diff * diff;
                           dout[k] = -2.0 * w * diff * inv_b;
                         }
                         return w * l;
                       },
                       grads) *
        inv_b;
    adam_step(net, grads, opt);
    stats.last_loss = loss;
    if (!std::isfinite(loss))
      throw DivergenceError("gaussian policy training: non-finite loss at step " +
                            std::to_string(step));
    if (log != nullptr &&
        (step % static_cast<std::uint64_t>(hyper.log_every) == 0 || step + 1 == steps))
      log->append(step, loss, stats.skipped_batches, w_sum * inv_b);
  }
  return stats;
}

std::vector<double> sample_gaussian_action(const Mlp& net, const double* obs, RngStream& rng,
                                           const std::vector<double>& act_lo,
                                           const std::vector<double>& act_hi) {
  thread_local MlpWorkspace ws;
  forward(net, obs, ws);
  std::vector<double> a = ws.acts.back();
  for (std::size_t k = 0; k < a.size(); ++k)
    a[k] = std::clamp(a[k] + rng.normal(), act_lo[k], act_hi[k]);
  return a;
}

}  // namespace fisor
