#include "fisor/weights.hpp"

#include <cmath>

#include "fisor/errors.hpp"
#include "fisor/batch.hpp"

namespace fisor {

void WeightConfig::validate() const {
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0))
    throw ConfigError("weights: temperatures must be > 0");
  if (!(clip_feasible > 0.0) || !(clip_infeasible > 0.0))
    throw ConfigError("weights: clips must be > 0");
}

double fisor_weight_values(double v, double q, double a_r, double a_h,
                           const WeightConfig& wcfg, double threshold) {
  if (v <= threshold) {
    if (q > threshold) return 0.0;
    return std::min(std::exp(wcfg.alpha1 * a_r), wcfg.clip_feasible);
  }
  return std::min(std::exp(-wcfg.alpha2 * a_h), wcfg.clip_infeasible);
}

double il_weight_values(double v, double q, double a_h, const WeightConfig& wcfg,
                        double threshold) {
  if (v <= threshold) return q <= threshold ? 1.0 : 0.0;
  return std::min(std::exp(-wcfg.alpha2 * a_h), wcfg.clip_infeasible);
}

double fisor_weight(const CriticBank& bank, const WeightConfig& wcfg, const double* obs,
                    const double* act) {
  const auto adv = bank.advantages(obs, act);
  return fisor_weight_values(bank.v_h(obs), bank.q_h(obs, act), adv.a_r, adv.a_h, wcfg);
}

double il_weight(const CriticBank& bank, const WeightConfig& wcfg, const double* obs,
                 const double* act) {
  const double v = bank.v_h(obs);
  const double q = bank.q_h(obs, act);
  return il_weight_values(v, q, q - v, wcfg);
}

double fisor_weight_cost(const CriticBank& bank, const WeightConfig& wcfg, const double* obs,
                         const double* act, double threshold) {
  const double v = bank.v_c(obs);
  const double q = bank.q_c(obs, act);
  const double a_r = bank.q_r(obs, act) - bank.v_r(obs);
  return fisor_weight_values(v, q, a_r, q - v, wcfg, threshold);
}

std::vector<double> compute_weights(const CriticBank& bank, const Dataset& ds,
                                    WeightKind kind, const WeightConfig& wcfg,
                                    double cost_threshold) {
  wcfg.validate();
  std::vector<double> w(ds.size());
  const int od = ds.obs_dim;
  const int ad = ds.act_dim;
  parallel_tasks(kBatchChunks, [&](int k) {
    const std::size_t n = ds.size();
    const std::size_t lo = n * k / kBatchChunks;
    const std::size_t hi = n * (k + 1) / kBatchChunks;
    for (std::size_t i = lo; i < hi; ++i) {
      const double* obs = ds.obs.data() + i * od;
      const double* act = ds.act.data() + i * ad;
      switch (kind) {
        case WeightKind::fisor:
          w[i] = fisor_weight(bank, wcfg, obs, act);
          break;
        case WeightKind::fisor_no_infeasible: {
          const double v = bank.v_h(obs);
          if (v > 0.0) {
            w[i] = 0.0;
          } else {
            w[i] = fisor_weight(bank, wcfg, obs, act);
          }
          break;
        }
        case WeightKind::fisor_cost:
          w[i] = fisor_weight_cost(bank, wcfg, obs, act, cost_threshold);
          break;
        case WeightKind::il:
          w[i] = il_weight(bank, wcfg, obs, act);
          break;
      }
    }
  });
  return w;
}

}  // namespace fisor
