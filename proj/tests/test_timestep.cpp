// Time integrators against their stability polynomials / displayed
// recurrences, plus dt-halving order fits on scalar ODEs with an exact
// exponential oracle.
#include <doctest.h>

#include <cmath>
#include <complex>

#include "mfad/timestep.hpp"
#include "mfad/util.hpp"

using namespace mfad;
using complexd = std::complex<double>;

static Vec scalar_vec(double v) {
  Vec x(1);
  x[0] = v;
  return x;
}

TEST_CASE("rk4 on the linear test equation") {
  SUBCASE("z = -1 gives the quartic polynomial value 0.375") {
    auto rhs = [](double, const Vec& y) { return Vec(-1.0 * y); };
    Vec y = rk4_step(scalar_vec(1.0), 0.0, 1.0, rhs);
    CHECK(y[0] == doctest::Approx(0.375).epsilon(1e-15));
  }
  SUBCASE("zero right-hand side leaves the state unchanged") {
    auto rhs = [](double, const Vec& y) { return Vec(Vec::Zero(y.size())); };
    Vec y = rk4_step(scalar_vec(0.7), 0.0, 0.3, rhs);
    CHECK(y[0] == 0.7);
  }
  SUBCASE("amplification equals 1 + z + z^2/2 + z^3/6 + z^4/24 for complex z") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const complexd z(rng.uniform(-2.5, 0.5), rng.uniform(-2.5, 2.5));
      // complex scalar as a 2-vector with the rotation-matrix action
      auto rhs = [&](double, const Vec& y) {
        Vec out(2);
        out[0] = z.real() * y[0] - z.imag() * y[1];
        out[1] = z.imag() * y[0] + z.real() * y[1];
        return out;
      };
      Vec y0(2);
      y0 << 1.0, 0.0;
      Vec y = rk4_step(y0, 0.0, 1.0, rhs);
      const complexd G = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
      CHECK(std::abs(complexd(y[0], y[1]) - G) <= 1e-12 * std::max(1.0, std::abs(G)));
    }
  }
  SUBCASE("exponential oracle over many steps") {
    // lambda dt = 0.1 per step, 10 steps vs exp(1)
    auto rhs = [](double, const Vec& y) { return Vec(1.0 * y); };
    Vec y = scalar_vec(1.0);
    for (int s = 0; s < 10; ++s) y = rk4_step(y, 0.0, 0.1, rhs);
    CHECK(y[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-6));
  }
}

TEST_CASE("sbdf steps satisfy the displayed recurrences") {
  SUBCASE("order 1 is backward Euler: amplification 1/(1 - mu dt)") {
    History hist(1);
    hist.push(scalar_vec(1.0), scalar_vec(0.0));
    const double mu_dt = -1.0;
    auto solve = [&](double alpha, const Vec& rhs) { return Vec(rhs / (alpha - mu_dt)); };
    Vec y = sbdf_step(1, hist, 1.0, solve);
    CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("order 2 with explicit lambda c and constant history") {
    // (3c^{n+1} - 4c^n + c^{n-1}) / (2dt) = lambda (2c^n - c^{n-1})
    const double lambda_dt = -0.1;
    History hist(2);
    hist.push(scalar_vec(1.0), scalar_vec(lambda_dt));  // E = lambda*c, dt folded below
    hist.push(scalar_vec(1.0), scalar_vec(lambda_dt));
    auto solve = [](double alpha, const Vec& rhs) { return Vec(rhs / alpha); };
    // dt = 1 with E = lambda*dt*c so that b-weights applied to E give dt*lambda*c
    Vec y = sbdf_step(2, hist, 1.0, solve);
    CHECK(y[0] == doctest::Approx((4.0 - 1.0 + 2.0 * lambda_dt) / 3.0).epsilon(1e-14));
    CHECK(y[0] == doctest::Approx(0.9333333333333333).epsilon(1e-14));
  }
  SUBCASE("orders 1..4 satisfy their recurrences for random data") {
    Rng rng(17);
    for (int order = 1; order <= 4; ++order) {
      for (int trial = 0; trial < 50; ++trial) {
        const double dt = 0.25 * rng.uniform(0.1, 1.0);
        const double le = rng.uniform(-1.5, 0.2);   // explicit rate
        const double li = rng.uniform(-3.0, 0.0);   // implicit rate
        History hist(order);
        std::vector<double> c_hist(order);
        for (int j = order - 1; j >= 0; --j) {
          c_hist[j] = rng.uniform(0.2, 2.0);
          hist.push(scalar_vec(c_hist[j]), scalar_vec(le * c_hist[j]));
        }
        auto solve = [&](double alpha, const Vec& rhs) {
          return Vec(rhs / (alpha - dt * li));
        };
        const double c_new = sbdf_step(order, hist, dt, solve)[0];

        // residual of the alpha-normalized multistep relation
        const SbdfCoeffs k = sbdf_coeffs(order);
        double res = k.alpha * c_new - dt * li * c_new;
        for (int j = 0; j < order; ++j)
          res -= k.a[j] * c_hist[j] + dt * k.b[j] * le * c_hist[j];
        CHECK(std::abs(res) <= 1e-12 * std::max(1.0, std::abs(c_new)));

        if (order == 4) {
          // the published SBDF4 form: 25/12 c^{n+1} - 4c^n + 3c^{n-1} - 4/3 c^{n-2} + 1/4 c^{n-3}
          double lhs = 25.0 / 12.0 * c_new - 4 * c_hist[0] + 3 * c_hist[1] -
                       4.0 / 3.0 * c_hist[2] + 0.25 * c_hist[3];
          double rhs = dt * le * (4 * c_hist[0] - 6 * c_hist[1] + 4 * c_hist[2] - c_hist[3]) +
                       dt * li * c_new;
          CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
        }
      }
    }
  }
  SUBCASE("startup ladder: orders 1,2,3 then 4") {
    History hist(4);
    std::vector<int> seen;
    hist.push(scalar_vec(1.0), scalar_vec(0.0));
    for (int step = 1; step <= 6; ++step) {
      seen.push_back(hist.active_order());
      hist.push(scalar_vec(1.0), scalar_vec(0.0));
    }
    CHECK(seen == std::vector<int>{1, 2, 3, 4, 4, 4});
  }
}

// dt-halving order fit on y' = le*y + li*y with exact-primed history
static double sbdf_observed_order(int order, double le, double li) {
  auto exact = [&](double t) { return std::exp((le + li) * t); };
  std::vector<double> errs, dts;
  for (double dt : {0.02, 0.01, 0.005, 0.0025}) {
    History hist(order);
    for (int j = order - 1; j >= 0; --j) {
      const double t = -j * dt;
      hist.push(scalar_vec(exact(t)), scalar_vec(le * exact(t)));
    }
    auto solve = [&](double alpha, const Vec& rhs) { return Vec(rhs / (alpha - dt * li)); };
    double y = 0;
    const int steps = (int)std::llround(1.0 / dt);
    for (int s = 1; s <= steps; ++s) {
      Vec ynew = sbdf_step(order, hist, dt, solve);
      y = ynew[0];
      hist.push(ynew, scalar_vec(le * y));
    }
    errs.push_back(std::abs(y - exact(1.0)));
    dts.push_back(dt);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < errs.size(); ++i) {
    const double x = std::log(dts[i]), yv = std::log(errs[i]);
    sx += x; sy += yv; sxx += x * x; sxy += x * yv;
  }
  const double n = (double)errs.size();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

TEST_CASE("observed temporal orders") {
  SUBCASE("rk4 at least 3.8") {
    std::vector<double> errs, dts;
    auto rhs = [](double, const Vec& y) { return Vec(-1.0 * y); };
    for (double dt : {0.1, 0.05, 0.025, 0.0125}) {
      Vec y = scalar_vec(1.0);
      const int steps = (int)std::llround(1.0 / dt);
      for (int s = 0; s < steps; ++s) y = rk4_step(y, 0, dt, rhs);
      errs.push_back(std::abs(y[0] - std::exp(-1.0)));
      dts.push_back(dt);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < errs.size(); ++i) {
      const double x = std::log(dts[i]), yv = std::log(errs[i]);
      sx += x; sy += yv; sxx += x * x; sxy += x * yv;
    }
    const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
    CHECK(slope >= 3.8);
  }
  SUBCASE("sbdf2 at least 1.8") { CHECK(sbdf_observed_order(2, -0.6, -1.4) >= 1.8); }
  SUBCASE("sbdf4 at least 3.6") { CHECK(sbdf_observed_order(4, -0.6, -1.4) >= 3.6); }
}

TEST_CASE("ab2") {
  SUBCASE("lambda dt = -0.1 with constant history gives 0.9") {
    Vec y = ab2_step(scalar_vec(1.0), scalar_vec(-0.1), scalar_vec(-0.1), 1.0);
    CHECK(y[0] == doctest::Approx(0.9).epsilon(1e-15));
  }
  SUBCASE("zero rhs leaves the state alone") {
    Vec y = ab2_step(scalar_vec(0.42), scalar_vec(0.0), scalar_vec(0.0), 0.7);
    CHECK(y[0] == 0.42);
  }
  SUBCASE("observed order 2 +- 0.2") {
    auto exact = [](double t) { return std::exp(-t); };
    std::vector<double> errs, dts;
    for (double dt : {0.02, 0.01, 0.005}) {
      double y = 1.0, f_prev = -exact(-dt);
      const int steps = (int)std::llround(1.0 / dt);
      for (int s = 0; s < steps; ++s) {
        const double f_now = -y;
        y = ab2_step(scalar_vec(y), scalar_vec(f_now), scalar_vec(f_prev), dt)[0];
        f_prev = f_now;
      }
      errs.push_back(std::abs(y - exact(1.0)));
      dts.push_back(dt);
    }
    const double rate = std::log(errs[0] / errs[2]) / std::log(dts[0] / dts[2]);
    CHECK(rate == doctest::Approx(2.0).epsilon(0.1));
  }
}

TEST_CASE("positivity filter") {
  Vec v(3);
  v << -0.1, 0.5, 0.0;
  positivity_filter(v);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.5);
  CHECK(v[2] == 0.0);

  SUBCASE("non-negative input unchanged; ghosts untouched") {
    Vec w(4);
    w << 0.3, 0.0, -0.2, -0.7;
    Vec w0 = w;
    positivity_filter(w, 2);  // only the first two entries
    CHECK(w[0] == w0[0]);
    CHECK(w[1] == w0[1]);
    CHECK(w[2] == w0[2]);
    CHECK(w[3] == w0[3]);
  }
  SUBCASE("idempotent and nonexpansive") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      Vec a(50), b(50);
      for (int i = 0; i < 50; ++i) {
        a[i] = rng.uniform(-1, 1);
        b[i] = rng.uniform(-1, 1);
      }
      Vec fa = a, fb = b;
      positivity_filter(fa);
      positivity_filter(fb);
      CHECK(fa.minCoeff() >= 0.0);
      Vec faa = fa;
      positivity_filter(faa);
      CHECK((faa - fa).norm() == 0.0);
      CHECK((fa - fb).lpNorm<Eigen::Infinity>() <=
            (a - b).lpNorm<Eigen::Infinity>() + 1e-15);
    }
  }
}
