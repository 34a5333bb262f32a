#ifndef FISOR_WEIGHTS_HPP
#define FISOR_WEIGHTS_HPP

#include <vector>

#include "fisor/critics.hpp"
#include "fisor/dataset.hpp"

namespace fisor {

struct WeightConfig {
  double alpha1 = 3.0;           // feasible temperature
  double alpha2 = 5.0;           // infeasible temperature
  double clip_feasible = 100.0;  // upper clip for exp(alpha1 A_r)
  double clip_infeasible = 150.0;

  void validate() const;
};

// Feasibility-dependent behavior-cloning weight.
//   v <= threshold (feasible):  min(exp(alpha1 A_r), clip) * I[q <= threshold]
//   v >  threshold (infeasible): min(exp(-alpha2 A_h), clip)
// Both indicator boundaries are inclusive. The threshold is 0 for the
// feasible value functions and a small positive level for the cost-value
// ablation.
double fisor_weight_values(double v, double q, double a_r, double a_h,
                           const WeightConfig& wcfg, double threshold = 0.0);

// Imitation variant: the feasible branch keeps only the safety indicator.
double il_weight_values(double v, double q, double a_h, const WeightConfig& wcfg,
                        double threshold = 0.0);

double fisor_weight(const CriticBank& bank, const WeightConfig& wcfg, const double* obs,
                    const double* act);

double il_weight(const CriticBank& bank, const WeightConfig& wcfg, const double* obs,
                 const double* act);

// Cost-value ablation: feasibility judged by {V_c <= threshold} with A_c in
// place of A_h.
double fisor_weight_cost(const CriticBank& bank, const WeightConfig& wcfg, const double* obs,
                         const double* act, double threshold);

enum class WeightKind { fisor, fisor_no_infeasible, fisor_cost, il };

// Behavior-cloning weight for every dataset row, computed from the frozen
// critics. Pure per-row function, chunk-parallel.
std::vector<double> compute_weights(const CriticBank& bank, const Dataset& ds,
                                    WeightKind kind, const WeightConfig& wcfg,
                                    double cost_threshold = 1e-3);

}  // namespace fisor

#endif
