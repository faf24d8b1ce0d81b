// Ghost-node method-of-lines transport solver: explicit advection/forcing,
// implicit diffusion + hyperviscosity, boundary-condition rows closing the
// system for the ghost unknowns.
#pragma once

#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <optional>

#include "mfad/hyperviscosity.hpp"
#include "mfad/rbffd.hpp"
#include "mfad/timestep.hpp"

namespace mfad {

enum class BcKind { Dirichlet, Neumann, Robin };

struct BcSpec {
  BcKind kind = BcKind::Neumann;
  double nu = 0.0;  // flux coefficient in -nu * d/dn for Neumann/Robin
};

// separable field: f(x, t) = sum_m time[m](t) * spatial[m](x); lets the time
// loop avoid per-node callback evaluation
struct SeparableField {
  std::vector<std::function<double(double)>> time;
  std::vector<std::function<double(const Point&)>> spatial;
};

struct TransportProblem {
  int d = 2;
  double nu = 0.0;
  double t_final = 1.0;

  // velocity u(x, t), d components; the separable form is preferred when set
  std::function<void(const Point&, double, double*)> velocity;
  std::function<double(double)> velocity_time_factor;         // optional
  std::function<void(const Point&, double*)> velocity_spatial;  // optional

  std::function<double(const Point&, double, double)> forcing;  // f(x, t, c), may be null
  std::optional<SeparableField> forcing_modes;

  std::vector<BcSpec> bcs;  // one per boundary component; empty = no BC rows
  std::function<double(const Point&, double, int)> bc_data;  // g(x, t, component)
  std::function<double(const Point&)> robin_coeff;           // reaction coefficient a(x)
};

struct Operators {
  std::vector<DiffOp> grad;  // d gradient components
  std::optional<DiffOp> lap;
  std::optional<DiffOp> hyp;
};

Operators assemble_transport_operators(const NodeSet& nodes, const RbfFdParams& params,
                                       bool need_laplacian, int hyp_order);

struct BoundaryOperator {
  SpMat rows;                    // Nb x N flux/identity part
  std::vector<double> reaction;  // diagonal reaction coefficient per boundary node
  std::vector<BcKind> kind;      // per boundary node
};

BoundaryOperator build_boundary_operator(const NodeSet& nodes, const std::vector<DiffOp>& grads,
                                         const std::vector<BcSpec>& bcs,
                                         const std::function<double(const Point&)>& robin_coeff = {});

// rows [0, n_pde): alpha e_i - dt (nu L + gamma H); remaining rows: scale*(B + reaction)
SpMat build_time_stepping_matrix(const NodeSet& nodes, const SpMat* L, const SpMat* H,
                                 const BoundaryOperator& B, double alpha, double nu, double gamma,
                                 double dt, double bc_row_scale);

// Factorized handle for repeated solves with a time-invariant matrix.
class ImplicitSystem {
 public:
  ImplicitSystem(const NodeSet& nodes, const SpMat* L, const SpMat* H, const BoundaryOperator& B,
                 double alpha, double nu, double gamma, double dt, bool scale_boundary_rows);

  // pde_rhs read on [0, n_pde); g has one entry per boundary node
  Vec solve(const Vec& pde_rhs, const Vec& g) const;
  double alpha() const { return alpha_; }
  int pde_rows() const { return n_pde_; }
  double bc_scale() const { return bc_scale_; }
  const SpMat& matrix() const { return M_; }

 private:
  SpMat M_;
  Eigen::SparseMatrix<double> M_col_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  double alpha_ = 1.0, bc_scale_ = 1.0;
  int n_pde_ = 0, n_boundary_ = 0;
};

enum class GhostFill { Auto, SubSystem, Extrapolate, None };

// Fills ghost entries of C in place at t = 0. Neumann/Robin solve the
// |X_b| x |X_b| ghost sub-system; Dirichlet (or by request) extrapolates with
// local PHS+poly interpolants over the n nearest non-ghost nodes.
void initial_ghost_fill(const NodeSet& nodes, Vec& C, const BoundaryOperator& B, const Vec& g,
                        const RbfFdParams& params, GhostFill method = GhostFill::Auto);

enum class Integrator { Rk4, Sbdf1, Sbdf2, Sbdf3, Sbdf4 };
Integrator integrator_from_string(const std::string& name);

struct AdvanceOptions {
  Integrator integrator = Integrator::Sbdf4;
  double dt = 0.0;     // <= 0: h / (2 ||u||_max)
  double u_max = 0.0;  // <= 0: sampled at 33 times over [0, T]
  bool filter = true;
  int scale_boundary_rows = -1;  // -1 auto (on when nu < 0.1), 0 off, 1 on
  GhostFill ghost_fill = GhostFill::Auto;  // None keeps the supplied ghost values
  std::function<void(int step, double t, const Vec& C)> observer;
};

struct AdvanceResult {
  Vec C;
  double t = 0.0;
  int steps = 0;
  double dt = 0.0;
  double u_max = 0.0;
};

// ||u||_max over non-ghost nodes sampled at 33 uniform times in [0, T]
double sample_u_max(const TransportProblem& problem, const NodeSet& nodes);

AdvanceResult advance(const TransportProblem& problem, const NodeSet& nodes, const Operators& ops,
                      const Calibration& calib, const Vec& C0, const AdvanceOptions& opts);

}  // namespace mfad
