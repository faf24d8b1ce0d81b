// Time integrators: classical RK4, AB2, the SBDF (IMEX-BDF) family with its
// startup ladder, and the positivity filter.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <deque>
#include <functional>
#include <stdexcept>

namespace mfad {

using Vec = Eigen::VectorXd;

// alpha * c^{n+1} = sum_j a[j] c^{n-j} + dt * sum_j b[j] E^{n-j} + dt * S c^{n+1}
struct SbdfCoeffs {
  int order = 1;
  double alpha = 1.0;
  std::array<double, 4> a{};  // state history weights
  std::array<double, 4> b{};  // explicit-term extrapolation weights
};

SbdfCoeffs sbdf_coeffs(int order);

// Ring buffer of previous states and explicit right-hand-side evaluations,
// newest first. Also tracks the startup ladder position.
class History {
 public:
  explicit History(int target_order) : target_(target_order) {
    if (target_order < 1 || target_order > 4)
      throw std::invalid_argument("scheme order must be in 1..4");
  }

  void push(const Vec& state, const Vec& explicit_rhs);
  int depth() const { return (int)states_.size(); }
  // SBDF order for the upcoming step: 1, 2, 3 while starting up, then target
  int active_order() const { return std::min(depth(), target_); }
  const Vec& state(int age) const { return states_.at(age); }        // age 0 = c^n
  const Vec& explicit_rhs(int age) const { return expl_.at(age); }

 private:
  int target_;
  std::deque<Vec> states_;
  std::deque<Vec> expl_;
};

// classical four-stage RK4 on dy/dt = rhs(t, y)
Vec rk4_step(const Vec& y, double t, double dt,
             const std::function<Vec(double, const Vec&)>& rhs);

// One SBDF step of the given order. The explicit right-hand-side evaluations
// come from the history buffer; implicit_solve must return the solution of
// (alpha I - dt S) x = rhs for the scheme's leading coefficient alpha.
Vec sbdf_step(int order, const History& history, double dt,
              const std::function<Vec(double alpha, const Vec& rhs)>& implicit_solve);

// Assembles only the SBDF right-hand side (history part); the caller adds BC
// rows and performs the solve. Exposed separately because the PDE drivers own
// their linear systems.
Vec sbdf_rhs(const SbdfCoeffs& c, const History& history, double dt);

// AB2 on dy/dt = f; needs f^n and f^{n-1}. First step falls back to Euler.
Vec ab2_step(const Vec& y, const Vec& f_now, const Vec& f_prev, double dt);
Vec euler_step(const Vec& y, const Vec& f_now, double dt);

// Elementwise max(0, .) on the first `count` entries (ghosts untouched);
// count < 0 filters the whole vector.
void positivity_filter(Vec& state, int count = -1);

}  // namespace mfad
