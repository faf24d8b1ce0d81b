#include "mfad/timestep.hpp"

namespace mfad {

SbdfCoeffs sbdf_coeffs(int order) {
  SbdfCoeffs c;
  c.order = order;
  switch (order) {
    case 1:
      c.alpha = 1.0;
      c.a = {1.0, 0, 0, 0};
      c.b = {1.0, 0, 0, 0};
      break;
    case 2:
      c.alpha = 3.0 / 2.0;
      c.a = {2.0, -0.5, 0, 0};
      c.b = {2.0, -1.0, 0, 0};
      break;
    case 3:
      c.alpha = 11.0 / 6.0;
      c.a = {3.0, -1.5, 1.0 / 3.0, 0};
      c.b = {3.0, -3.0, 1.0, 0};
      break;
    case 4:
      c.alpha = 25.0 / 12.0;
      c.a = {4.0, -3.0, 4.0 / 3.0, -0.25};
      c.b = {4.0, -6.0, 4.0, -1.0};
      break;
    default:
      throw std::invalid_argument("SBDF order must be in 1..4");
  }
  return c;
}

void History::push(const Vec& state, const Vec& explicit_rhs) {
  states_.push_front(state);
  expl_.push_front(explicit_rhs);
  while ((int)states_.size() > target_) {
    states_.pop_back();
    expl_.pop_back();
  }
}

Vec rk4_step(const Vec& y, double t, double dt,
             const std::function<Vec(double, const Vec&)>& rhs) {
  const Vec k1 = rhs(t, y);
  const Vec k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1);
  const Vec k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2);
  const Vec k4 = rhs(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec sbdf_rhs(const SbdfCoeffs& c, const History& history, double dt) {
  if (history.depth() < c.order)
    throw std::invalid_argument("SBDF history shallower than scheme order");
  Vec rhs = c.a[0] * history.state(0) + (dt * c.b[0]) * history.explicit_rhs(0);
  for (int j = 1; j < c.order; ++j)
    rhs += c.a[j] * history.state(j) + (dt * c.b[j]) * history.explicit_rhs(j);
  return rhs;
}

Vec sbdf_step(int order, const History& history, double dt,
              const std::function<Vec(double, const Vec&)>& implicit_solve) {
  const SbdfCoeffs c = sbdf_coeffs(order);
  return implicit_solve(c.alpha, sbdf_rhs(c, history, dt));
}

Vec ab2_step(const Vec& y, const Vec& f_now, const Vec& f_prev, double dt) {
  return y + dt * (1.5 * f_now - 0.5 * f_prev);
}

Vec euler_step(const Vec& y, const Vec& f_now, double dt) { return y + dt * f_now; }

void positivity_filter(Vec& state, int count) {
  const int m = count < 0 ? (int)state.size() : count;
  for (int i = 0; i < m; ++i)
    if (state[i] < 0.0) state[i] = 0.0;
}

}  // namespace mfad
