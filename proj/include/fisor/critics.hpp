#ifndef FISOR_CRITICS_HPP
#define FISOR_CRITICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "fisor/dataset.hpp"
#include "fisor/mlp.hpp"
#include "fisor/optim.hpp"
#include "fisor/rng.hpp"

namespace fisor {

struct CriticHyper {
  double gamma = 0.99;
  double tau = 0.9;
  double soft_alpha = 0.001;
  double lr = 3e-4;
  int batch = 256;
  int log_every = 1000;

  void validate() const;  // gamma in (0,1), tau in (0.5,1)
};

// Clipped double critic with soft-updated targets.
struct QPair {
  Mlp q1, q2;
  Mlp q1_tgt, q2_tgt;
  AdamState opt1, opt2;
};

struct VFunc {
  Mlp v;
  AdamState opt;
};

// Appends rows of (step, loss_Vh, loss_Qh, loss_Vr, loss_Qr, mean_Vh);
// inactive columns carry nan.
class CurveLog {
public:
  CurveLog() = default;
  explicit CurveLog(std::string path);
  void append(std::uint64_t step, double loss_vh, double loss_qh, double loss_vr,
              double loss_qr, double mean_vh);

private:
  std::string path_;
};

// Q_h/V_h (feasibility), Q_r/V_r (reward), optional Q_c/V_c (cost
// ablation). Reward critics reduce with min over the pair, feasible and
// cost critics with max.
struct CriticBank {
  int obs_dim = 0;
  int act_dim = 0;
  CriticHyper hyper;

  VFunc vh;
  QPair qh;
  VFunc vr;
  QPair qr;
  std::optional<VFunc> vc;
  std::optional<QPair> qc;

  static CriticBank init(int obs_dim, int act_dim, const std::vector<int>& hidden,
                         const CriticHyper& hyper, RngStream& rng, bool with_cost);

  double v_h(const double* obs) const;
  double q_h(const double* obs, const double* act) const;  // max of pair
  double v_r(const double* obs) const;
  double q_r(const double* obs, const double* act) const;  // min of pair
  double v_c(const double* obs) const;
  double q_c(const double* obs, const double* act) const;  // max of pair

  // A_r = min-pair Q_r - V_r; A_h = max-pair Q_h - V_h.
  struct Advantages {
    double a_r = 0.0;
    double a_h = 0.0;
  };
  Advantages advantages(const double* obs, const double* act) const;

  // FNV-1a over all feasibility/reward/cost parameters; used to assert the
  // policy stage leaves critics untouched.
  std::uint64_t checksum() const;
};

// Offline fitting of the optimal feasible values: V_h by reversed expectile
// regression against the max of the target critics, Q_h by squared error
// against the discounted worst-violation backup
// (1-gamma) h + gamma max{h, V_h(s')}, collapsing to h at goal terminals.
// Per step: V update, then Q updates on the same minibatch, then soft
// target updates.
void train_feasible_values(CriticBank& bank, const Dataset& ds, std::uint64_t steps,
                           RngStream& rng, CurveLog* log = nullptr);

// IQL-style reward values: V_r by expectile regression against the min of
// the target critics, Q_r against r + gamma V_r(s') (reward only at goal
// terminals).
void train_reward_values(CriticBank& bank, const Dataset& ds, std::uint64_t steps,
                         RngStream& rng, CurveLog* log = nullptr);

// Cost-value variant for the no-HJ ablation: sum backup c + gamma V_c(s')
// with plain squared-error evaluation of the data policy's cost value (the
// quantity soft-constraint formulations threshold).
void train_cost_values(CriticBank& bank, const Dataset& ds, std::uint64_t steps,
                       RngStream& rng, CurveLog* log = nullptr);

// Mean of V_h over every observation in the dataset (training monitor).
double mean_vh(const CriticBank& bank, const Dataset& ds);

}  // namespace fisor

#endif
