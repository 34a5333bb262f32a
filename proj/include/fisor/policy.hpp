#ifndef FISOR_POLICY_HPP
#define FISOR_POLICY_HPP

#include <string>
#include <vector>

#include "fisor/diffusion.hpp"

namespace fisor {

// Trained policy artifact: either a denoising sampler or the plain
// Gaussian-head ablation, plus the action box it clips to.
struct Policy {
  enum class Kind { diffusion, gaussian };

  Kind kind = Kind::diffusion;
  NoisePredictor predictor;  // diffusion
  NoiseSchedule schedule;
  Mlp gauss_mean;  // gaussian ablation
  std::vector<double> act_lo, act_hi;

  std::vector<double> sample(const double* obs, RngStream& rng) const;

  void save(const std::string& path, std::uint64_t step, std::uint64_t seed) const;
  static Policy load(const std::string& path);
};

}  // namespace fisor

#endif
