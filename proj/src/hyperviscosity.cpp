#include "mfad/hyperviscosity.hpp"

#include <cmath>
#include <stdexcept>

#include "mfad/solvers.hpp"
#include "mfad/util.hpp"

namespace mfad {

double estimate_spurious_real(const DiffOp& op, int krylov_dim, uint64_t seed) {
  const SpMat sub = op.non_ghost_block();
  const double raw = arnoldi_max_real(sub, krylov_dim, seed);
  // estimates at rounding level are numerically zero, not growth modes
  double scale = 0.0;
  for (int i = 0; i < sub.outerSize(); ++i) {
    double row = 0.0;
    for (SpMat::InnerIterator it(sub, i); it; ++it) row += std::abs(it.value());
    scale = std::max(scale, row);
  }
  return raw <= 1e-10 * scale ? 0.0 : raw;
}

double growth_exponent_from_residual(double residual_norm, double eps, double f_norm,
                                     double khat) {
  if (eps <= 0.0) throw std::invalid_argument("growth exponent undefined for eps <= 0");
  if (residual_norm <= 0.0)
    throw std::invalid_argument("no spurious mode: probe residual vanishes");
  return (std::log(residual_norm) - std::log(eps * f_norm)) / std::log(khat);
}

double estimate_growth_exponent(const DiffOp& op, const NodeSet& nodes, double eps, int order) {
  if (eps <= 0.0) throw std::invalid_argument("growth exponent undefined for eps <= 0");
  if (order != 1 && order != 2) throw std::invalid_argument("probe order must be 1 or 2");
  const int m = nodes.part.non_ghost();
  const double khat = 2.0 / nodes.h;
  const int d = nodes.d;

  // f(x) = prod_j exp(i khat x_j) = exp(i khat sum_j x_j)
  Eigen::VectorXd f_re(m), f_im(m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += nodes.points[i][j];
    f_re[i] = std::cos(khat * s);
    f_im[i] = std::sin(khat * s);
  }

  Eigen::VectorXd g_re(m), g_im(m);
  if (order == 1) {  // g = i khat f
    g_re = -khat * f_im;
    g_im = khat * f_re;
  } else {  // Laplacian of the product plane wave: g = -d khat^2 f
    g_re = -d * khat * khat * f_re;
    g_im = -d * khat * khat * f_im;
  }

  const SpMat sub = op.non_ghost_block();
  Eigen::VectorXd gt_re = sub * f_re;
  Eigen::VectorXd gt_im = sub * f_im;

  const double res =
      std::sqrt((g_re - gt_re).squaredNorm() + (g_im - gt_im).squaredNorm());
  const double f_norm = std::sqrt(f_re.squaredNorm() + f_im.squaredNorm());
  return growth_exponent_from_residual(res, eps, f_norm, khat);
}

int hyperviscosity_order(int stencil_size) {
  if (stencil_size < 2) throw std::invalid_argument("stencil size must be >= 2");
  return std::max(1, (int)std::floor(1.5 * std::log((double)stencil_size)));
}

double phs_laplacian_power_constant(int k, int d) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c *= (2 * k + 1 - 2 * i) * (2 * k + d - 1 - 2 * i);
  return c;
}

double gamma_value(double u_max, double nu, const Calibration& calib, double h) {
  if (h <= 0.0) throw std::invalid_argument("h must be positive");
  const int k = calib.k;
  if (calib.eps <= 0.0 && calib.eta <= 0.0) return 0.0;
  const double sgn = (k % 2 == 1) ? 1.0 : -1.0;  // (-1)^(1-k)
  double g = 0.0;
  if (calib.eps > 0.0)
    g += std::pow(2.0, calib.q1 - 2 * k) * std::pow(h, 2 * k - calib.q1) * u_max * calib.eps;
  if (calib.eta > 0.0)
    g += std::pow(2.0, calib.q2 - 2 * k) * std::pow(h, 2 * k - calib.q2) * nu * calib.eta;
  g *= sgn;
  if (calib.tau > 0.0) {
    const double corr =
        1.0 - calib.tau * std::pow(2.0, calib.q3 - 2 * k) * std::pow(h, 2 * k - calib.q3);
    if (corr <= 0.0)
      throw std::runtime_error("hyperviscosity spurious mode dominates: tau correction invalid");
    g /= corr;
  }
  return g;
}

DiffOp assemble_hyperviscosity(const NodeSet& nodes, int k, int d, const KdTree* tree) {
  if (k < 1) throw std::invalid_argument("hyperviscosity order must be >= 1");
  RbfFdParams p;
  p.d = d;
  p.ell = k;
  p.m = 2 * k + 1;
  p.M = (int)binomial(k + d, d);
  p.n = 2 * p.M + 1;
  p.delta = delta_heuristic(k);
  p.law = ScalingLaw::LMinus1;  // informational; m is pinned to 2k+1 here
  if (p.n > nodes.part.non_ghost())
    throw std::invalid_argument("hyperviscosity stencil exceeds node count");
  // ghost neighbors are excluded: the ghost ring sits tighter than the
  // interior spacing, which makes Delta^k weights there blow up, and the
  // ghost-value feedback through the BC rows then destabilizes the implicit
  // update. The non-ghost operator is also exactly what the calibration
  // probes measure.
  return assemble(nodes, OperatorTag::laplacian_power(k), p, tree, false);
}

Calibration calibrate(const std::vector<DiffOp>& gradients, const DiffOp* laplacian,
                      const NodeSet& nodes, const RbfFdParams& params,
                      const CalibrationOptions& opts, const DiffOp* hyperviscosity_op) {
  if (gradients.empty()) throw std::invalid_argument("calibrate needs gradient operators");
  Calibration c;
  c.h = nodes.h;
  c.khat = 2.0 / nodes.h;
  c.u_max = opts.u_max;
  c.nu = opts.nu;
  c.k = hyperviscosity_order(params.n);

  for (size_t s = 0; s < gradients.size(); ++s) {
    const double e = estimate_spurious_real(gradients[s], opts.krylov_dim, opts.seed + s);
    c.eps_component[s] = e;
    c.eps = std::max(c.eps, e);
  }
  if (c.eps > 0.0) {
    for (size_t s = 0; s < gradients.size(); ++s) {
      if (c.eps_component[s] <= 0.0) continue;
      const double q = estimate_growth_exponent(gradients[s], nodes, c.eps_component[s], 1);
      c.q1_component[s] = q;
      c.q1 = std::max(c.q1, q);
    }
  }

  if (opts.with_eta && laplacian) {
    c.eta = estimate_spurious_real(*laplacian, opts.krylov_dim, opts.seed + 17);
    if (c.eta > 0.0) c.q2 = estimate_growth_exponent(*laplacian, nodes, c.eta, 2);
  }

  if (opts.with_tau && hyperviscosity_op) {
    // spurious part has the sign opposite to (-1)^k khat^(2k)
    const SpMat sub = hyperviscosity_op->non_ghost_block();
    const SpMat flipped = (c.k % 2 == 0) ? SpMat(-sub) : sub;
    c.tau = arnoldi_max_real(flipped, opts.krylov_dim, opts.seed + 29);
    if (c.tau > 0.0) {
      // probe against the true Delta^k reference (-d khat^2)^k f
      const int m = nodes.part.non_ghost();
      const int d = nodes.d;
      Eigen::VectorXd f_re(m), f_im(m);
      for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += nodes.points[i][j];
        f_re[i] = std::cos(c.khat * s);
        f_im[i] = std::sin(c.khat * s);
      }
      const double ref = std::pow(-d * c.khat * c.khat, c.k);
      Eigen::VectorXd gt_re = sub * f_re, gt_im = sub * f_im;
      const double res = std::sqrt((ref * f_re - gt_re).squaredNorm() +
                                   (ref * f_im - gt_im).squaredNorm());
      const double f_norm = std::sqrt((double)m);
      if (res > 0.0) c.q3 = growth_exponent_from_residual(res, c.tau, f_norm, c.khat);
    }
  }

  c.gamma = gamma_value(opts.u_max, opts.nu, c, c.h);
  return c;
}

}  // namespace mfad
