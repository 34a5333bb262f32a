#ifndef FISOR_EXPECTILE_HPP
#define FISOR_EXPECTILE_HPP

#include <cmath>

namespace fisor {

// Asymmetric squared losses used for in-sample value fitting.
//
// The standard form L_tau(u) = |tau - I(u < 0)| u^2 leans on positive
// residuals and estimates an upper expectile (approximate max over
// in-support actions). The reversed form L_tau_rev(u) = |tau - I(u > 0)| u^2
// leans on negative residuals instead and estimates the lower expectile
// (approximate min), which is what the feasible value functions need.

inline double expectile_weight(double u, double tau) {
  return std::fabs(tau - (u < 0.0 ? 1.0 : 0.0));
}

inline double reversed_expectile_weight(double u, double tau) {
  return std::fabs(tau - (u > 0.0 ? 1.0 : 0.0));
}

inline double expectile_loss(double u, double tau) {
  return expectile_weight(u, tau) * u * u;
}

inline double reversed_expectile_loss(double u, double tau) {
  return reversed_expectile_weight(u, tau) * u * u;
}

// d loss / d u (the weight is piecewise constant in u and both pieces meet
// at zero, so this is the exact derivative everywhere).
inline double expectile_loss_grad(double u, double tau) {
  return 2.0 * expectile_weight(u, tau) * u;
}

inline double reversed_expectile_loss_grad(double u, double tau) {
  return 2.0 * reversed_expectile_weight(u, tau) * u;
}

}  // namespace fisor

#endif
