// Calibration of the stabilizing hyperviscosity term gamma * Delta^k:
// spurious-growth estimation from assembled operators, growth exponents from
// plane-wave probes, and assembly of the Delta^k operator itself.
#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "mfad/rbffd.hpp"

namespace mfad {

struct Calibration {
  double eps = 0.0;   // spurious real part of the gradient components (max)
  double eta = 0.0;   // spurious real part of the Laplacian
  double q1 = 0.0;    // growth exponent for the gradient
  double q2 = 0.0;    // growth exponent for the Laplacian
  double q3 = 0.0;    // growth exponent of the hyperviscosity operator
  double tau = 0.0;   // spurious mode of the hyperviscosity operator
  int k = 1;          // Laplacian power
  double gamma = 0.0;
  double h = 0.0;     // N^(-1/d) spacing used for khat
  double khat = 0.0;  // probe wavenumber, 2/h
  double u_max = 0.0;
  double nu = 0.0;
  std::array<double, 3> eps_component{0.0, 0.0, 0.0};
  std::array<double, 3> q1_component{0.0, 0.0, 0.0};

  bool stabilization_needed() const { return eps > 0.0 || eta > 0.0; }
};

// max(0, largest Ritz real part) over the non-ghost restriction of the operator
double estimate_spurious_real(const DiffOp& op, int krylov_dim = 40, uint64_t seed = 2024);

// q = [ln ||g - g~|| - ln(eps ||f||)] / ln khat
double growth_exponent_from_residual(double residual_norm, double eps, double f_norm,
                                     double khat);

// Plane-wave probe on non-ghost nodes. order 1: reference i*khat*f per
// component; order 2: reference -d*khat^2*f (the Laplacian of the product
// plane wave).
double estimate_growth_exponent(const DiffOp& op, const NodeSet& nodes, double eps, int order);

int hyperviscosity_order(int stencil_size);  // k = floor(1.5 ln n), clamped >= 1

// Delta^k r^(2k+1) = C * r; this is the constant C in d dimensions
double phs_laplacian_power_constant(int k, int d);

double gamma_value(double u_max, double nu, const Calibration& calib, double h);

DiffOp assemble_hyperviscosity(const NodeSet& nodes, int k, int d,
                               const KdTree* tree = nullptr);

struct CalibrationOptions {
  double u_max = 0.0;
  double nu = 0.0;
  bool with_eta = false;  // default: eta := 0 and q2 skipped
  bool with_tau = false;
  int krylov_dim = 40;
  uint64_t seed = 2024;
};

// Pipeline: eps per gradient component -> q1 (max over growing components),
// optional eta/q2, k from the stencil size, gamma from the closed form.
// `hyperviscosity_op` is only consulted when with_tau is set.
Calibration calibrate(const std::vector<DiffOp>& gradients, const DiffOp* laplacian,
                      const NodeSet& nodes, const RbfFdParams& params,
                      const CalibrationOptions& opts,
                      const DiffOp* hyperviscosity_op = nullptr);

}  // namespace mfad
