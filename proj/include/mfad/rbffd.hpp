// Overlapped RBF-FD: polyharmonic-spline stencil weights with polynomial
// augmentation, parameter selection, and sparse differentiation-matrix
// assembly via the stencil-sharing sweep.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "mfad/geometry.hpp"

namespace mfad {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Relation between the PHS exponent m and polynomial degree ell.
enum class ScalingLaw {
  LMinus1,    // m = ell (odd) / ell-1 (even), the default
  LPlus1,     // m = ell (odd) / ell+1 (even)
  Classical,  // m = 2*ell+1
  Fixed3,     // m = 3
};

ScalingLaw scaling_law_from_string(const std::string& name);
std::string to_string(ScalingLaw law);

struct RbfFdParams {
  int xi = 0;     // desired order
  int theta = 0;  // operator order the degree was selected for
  int d = 2;
  int ell = 0;    // polynomial degree
  int m = 0;      // PHS exponent (odd)
  int M = 0;      // polynomial term count, binom(ell+d, d)
  int n = 0;      // stencil size
  double delta = 1.0;
  ScalingLaw law = ScalingLaw::LMinus1;

  void validate() const;
};

RbfFdParams select_params(int xi, int theta, int d, ScalingLaw law = ScalingLaw::LMinus1);
// parameter set for a given polynomial degree directly (scaling-law studies)
RbfFdParams params_for_degree(int ell, int d, ScalingLaw law = ScalingLaw::LMinus1);

int phs_exponent(int ell, ScalingLaw law);
double delta_heuristic(int ell);

struct OperatorTag {
  enum Kind { Dx, Dy, Dz, Laplacian, LaplacianPower, Eval };
  Kind kind = Eval;
  int power = 1;  // Laplacian power for LaplacianPower

  static OperatorTag deriv(int axis);
  static OperatorTag laplacian() { return {Laplacian, 1}; }
  static OperatorTag laplacian_power(int k) { return {LaplacianPower, k}; }
  static OperatorTag eval() { return {Eval, 1}; }

  int diff_order() const;  // 0, 1, 2, or 2*power
  std::string name() const;
};

struct Stencil {
  int center = -1;
  std::vector<int> neighbors;  // neighbors[0] == center
  double rho = 0.0;            // stencil width
  double r_retain = 0.0;       // (1 - delta) * rho
  std::vector<int> retained;   // global indices within r_retain of the center
  int p() const { return static_cast<int>(retained.size()); }
};

Stencil build_stencil(const NodeSet& nodes, const KdTree& tree, int center, int n, double delta);

struct WeightBlock {
  Eigen::MatrixXd W;         // n x p weights, column j for retained node j
  Eigen::MatrixXd lagrange;  // M x p multipliers (diagnostic only)
};

// Solves the (n+M)x(n+M) saddle system once per stencil with p right-hand
// sides. Coordinates are shifted to the stencil center and scaled by rho;
// weights are unscaled by rho^(-theta_op) on the way out.
WeightBlock stencil_weights(const NodeSet& nodes, const Stencil& stencil, OperatorTag op,
                            const RbfFdParams& params);

// Weights approximating `op` at an arbitrary evaluation point (used for
// extrapolation to ghosts); `neighbors` play the stencil role.
Eigen::VectorXd point_weights(const NodeSet& nodes, const std::vector<int>& neighbors,
                              const Point& where, OperatorTag op, const RbfFdParams& params);

struct DiffOp {
  SpMat L;
  OperatorTag op;
  RbfFdParams params;
  Partition part;
  int n_stencils = 0;  // N_delta

  // restriction to non-ghost rows and columns (square)
  SpMat non_ghost_block() const;
};

// Algorithm: sweep nodes in index order; each unclaimed node spawns a stencil
// whose weight block fills the rows of every unclaimed retained node. When
// include_ghost_neighbors is false, stencils draw from non-ghost nodes only
// (the ghost column block stays empty).
DiffOp assemble(const NodeSet& nodes, OperatorTag op, const RbfFdParams& params,
                const KdTree* tree = nullptr, bool include_ghost_neighbors = true);

struct LebesgueRow {
  double lambda = 0.0;  // sum |w| over the row
  double w_self = 0.0;  // diagonal weight
  bool diag_ok = true;  // 2*w_self >= -lambda
};
std::vector<LebesgueRow> lebesgue_map(const DiffOp& op);

// monomial exponent multi-indices of total degree <= ell, graded-lex order
std::vector<std::array<int, 3>> monomial_exponents(int ell, int d);

void save_matrix_market(const SpMat& A, const std::string& path);

}  // namespace mfad
