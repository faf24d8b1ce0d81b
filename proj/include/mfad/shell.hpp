// Coupled shell problem: bulk advection-diffusion coupled through a
// time-varying Robin condition on the inner sphere to a surface-bound ODE,
// advanced with a Strang-Marchuk style 6-step splitting and ILU(0)-
// preconditioned GMRES.
#pragma once

#include <memory>

#include "mfad/solvers.hpp"
#include "mfad/transport.hpp"

namespace mfad {

struct ShellModel {
  double k_on = 1.0;
  double k_off = 1.0;
  double k_self = 1.0;
  double c_tot = 1.0;  // total binding-site density
};

// C_B consistent with a prescribed bulk field: solve the Robin balance for C_B
double manufactured_CB(double c, double dcdn, double nu, const ShellModel& model);

struct ShellProblem {
  TransportProblem bulk;  // velocity, nu, f1, S1 Neumann data (component 0)
  ShellModel model;
  std::function<double(const Point&, double)> f2;       // surface forcing on S2
  std::function<double(const Point&, double)> cb_init;  // C_B at t = 0
};

struct ShellOptions {
  double dt = 0.0;  // <= 0: h / (2 ||u||_max)
  bool filter = true;
  int scale_boundary_rows = -1;  // as in AdvanceOptions
  bool use_ilu = true;           // identity preconditioner when false (comparisons)
  bool zero_fill_ilu = false;    // ILU(0) instead of the default threshold ILU
  double ilut_droptol = 1e-4;
  int ilut_fillfactor = 20;
  bool use_direct = false;       // sparse direct solve instead of GMRES (consistency tests)
  int gmres_restart = 50;
  int gmres_max_iters = 200;
  double gmres_tol = 1e-10;
};

class ShellSolver {
 public:
  ShellSolver(const ShellProblem& problem, const NodeSet& nodes, const Operators& ops,
              const Calibration& calib, const ShellOptions& opts);

  // sets bulk/surface initial values; ghost entries of C0 are overwritten by
  // local RBF extrapolation
  void initialize(const Vec& C0, const Vec& CB0);

  void step();  // one full splitting step
  void run(double t_final);

  double time() const { return t_; }
  double dt() const { return dt_; }
  const Vec& bulk() const { return C_; }
  const Vec& surface() const { return CB_; }  // over S2 nodes, in s2_nodes() order
  const std::vector<int>& s2_nodes() const { return s2_; }

  double mean_gmres_iters() const;
  int last_gmres_iters() const { return last_iters_; }
  const SpMat& matrix() const { return M_; }

  // step 4 of the splitting: rewrite only the S2 rows' reaction coefficient.
  // Public because the row-update contract is tested directly.
  void refresh_robin_rows(const Vec& cb_tilde);

 private:
  Vec surface_rhs(double t, const Vec& cb, const Vec& c_amb) const;
  Vec trace_s2(const Vec& c) const;
  Vec solve_bulk(int order, const Vec& pde_rhs, const Vec& g_rows);

  const ShellProblem& prob_;
  const NodeSet& nodes_;
  const Operators& ops_;
  ShellOptions opts_;
  double gamma_ = 0.0;

  std::vector<int> s2_;      // global indices of inner-boundary nodes
  std::vector<int> s2_rows_; // boundary-row index (0..nb) per S2 node
  BoundaryOperator B_;
  double bc_scale_ = 1.0;
  int n_pde_ = 0;
  double dt_ = 0.0;
  double t_ = 0.0;
  int step_count_ = 0;

  SpMat M_;                       // SBDF2 matrix, S2 rows refreshed in place
  std::vector<int> s2_diag_pos_;  // value index of the (row, boundary-node) entry
  std::vector<double> s2_diag_base_;
  SpMat M1_;  // SBDF1 matrix for the first step
  std::vector<int> s2_diag_pos1_;
  std::vector<double> s2_diag_base1_;
  std::unique_ptr<Preconditioner> ilu_;   // ILU of the all-Neumann SBDF2 matrix
  std::unique_ptr<Preconditioner> ilu1_;  // and of the SBDF1 matrix

  Vec C_;
  Vec CB_, CB_prev_;
  History history_;
  long total_iters_ = 0;
  int solve_count_ = 0;
  int last_iters_ = 0;

  std::function<Vec(double, const Vec&)> explicit_rhs_;
};

// Restarted GMRES preconditioned by an ILU(0) factorization (null = identity).
GmresResult preconditioned_solve(const SpMat& A, const Vec& rhs, const Vec& x0,
                                 const Preconditioner* ilu,
                                 int restart = 50, int max_iters = 200, double tol = 1e-10);

}  // namespace mfad
