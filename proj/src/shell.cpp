#include "mfad/shell.hpp"

#include <cmath>
#include <stdexcept>

namespace mfad {

double manufactured_CB(double c, double dcdn, double nu, const ShellModel& model) {
  const double denom = model.k_on * c + model.k_off;
  if (denom == 0.0) throw std::invalid_argument("manufactured C_B: zero denominator");
  return (-nu * dcdn + model.k_on * model.c_tot * c) / denom;
}

GmresResult preconditioned_solve(const SpMat& A, const Vec& rhs, const Vec& x0,
                                 const Preconditioner* ilu,
                                 int restart, int max_iters, double tol) {
  GmresResult r = gmres(A, rhs, x0, ilu, restart, max_iters, tol);
  if (!r.converged) {
    std::string hist;
    for (size_t i = r.history.size() > 8 ? r.history.size() - 8 : 0; i < r.history.size(); ++i)
      hist += " " + std::to_string(r.history[i]);
    throw std::runtime_error("GMRES failed after " + std::to_string(r.iterations) +
                             " iterations; trailing residuals:" + hist);
  }
  return r;
}

ShellSolver::ShellSolver(const ShellProblem& problem, const NodeSet& nodes, const Operators& ops,
                         const Calibration& calib, const ShellOptions& opts)
    : prob_(problem), nodes_(nodes), ops_(ops), opts_(opts), gamma_(calib.gamma), history_(2) {
  if (nodes.domain.kind != DomainKind::Shell)
    throw std::invalid_argument("shell solver requires a shell node set");
  if (nodes.part.n_ghost != nodes.part.n_boundary)
    throw std::invalid_argument("shell solver requires ghost nodes");

  const int nb = nodes.part.n_boundary;
  for (int j = 0; j < nb; ++j)
    if (nodes.boundary_component[j] == 1) {
      s2_.push_back(nodes.boundary_index(j));
      s2_rows_.push_back(j);
    }
  if (s2_.empty()) throw std::invalid_argument("no inner-boundary nodes found");

  n_pde_ = nodes.part.non_ghost();
  double dt_raw = opts_.dt;
  if (dt_raw <= 0) {
    const double u_max = sample_u_max(prob_.bulk, nodes);
    dt_raw = nodes.h / (2.0 * u_max);
  }
  // uniform steps covering t_final exactly
  const int steps = std::max(1, (int)std::ceil(prob_.bulk.t_final / dt_raw - 1e-12));
  dt_ = prob_.bulk.t_final / steps;
  const bool scale = opts_.scale_boundary_rows < 0 ? (prob_.bulk.nu < 0.1)
                                                   : opts_.scale_boundary_rows > 0;
  bc_scale_ = scale ? 1.0 / (dt_ * dt_) : 1.0;

  // boundary operator: S1 Neumann rows and S2 flux rows (reaction handled here)
  std::vector<BcSpec> bcs(2);
  bcs[0] = prob_.bulk.bcs.empty() ? BcSpec{BcKind::Neumann, prob_.bulk.nu} : prob_.bulk.bcs[0];
  bcs[1] = BcSpec{BcKind::Robin, prob_.bulk.nu};
  B_ = build_boundary_operator(nodes, ops.grad, bcs);

  const SpMat* Lp = ops.lap ? &ops.lap->L : nullptr;
  const SpMat* Hp = (ops.hyp && gamma_ != 0.0) ? &ops.hyp->L : nullptr;

  auto build = [&](double alpha, SpMat& M, std::vector<int>& pos, std::vector<double>& base) {
    M = build_time_stepping_matrix(nodes, Lp, Hp, B_, alpha, prob_.bulk.nu, gamma_, dt_,
                                   bc_scale_);
    M.makeCompressed();
    pos.assign(s2_.size(), -1);
    base.assign(s2_.size(), 0.0);
    const int* outer = M.outerIndexPtr();
    const int* inner = M.innerIndexPtr();
    const double* val = M.valuePtr();
    for (size_t q = 0; q < s2_.size(); ++q) {
      const int row = n_pde_ + s2_rows_[q];
      for (int it = outer[row]; it < outer[row + 1]; ++it)
        if (inner[it] == s2_[q]) {
          pos[q] = it;
          base[q] = val[it];
          break;
        }
      if (pos[q] < 0)
        throw std::runtime_error("S2 row lacks a diagonal slot for the reaction coefficient");
    }
  };
  build(sbdf_coeffs(2).alpha, M_, s2_diag_pos_, s2_diag_base_);
  build(sbdf_coeffs(1).alpha, M1_, s2_diag_pos1_, s2_diag_base1_);
  if (opts_.use_ilu && !opts_.use_direct) {
    // preconditioner from the all-Neumann (zero reaction) matrices
    if (opts_.zero_fill_ilu) {
      ilu_ = std::make_unique<Ilu0>(M_);
      ilu1_ = std::make_unique<Ilu0>(M1_);
    } else {
      ilu_ = std::make_unique<IluT>(M_, opts_.ilut_droptol, opts_.ilut_fillfactor);
      ilu1_ = std::make_unique<IluT>(M1_, opts_.ilut_droptol, opts_.ilut_fillfactor);
    }
  }

  C_ = Vec::Zero(nodes.size());
  CB_ = Vec::Zero((int)s2_.size());
  CB_prev_ = CB_;

  explicit_rhs_ = [this](double t, const Vec& C) {
    const int n = nodes_.part.non_ghost();
    Vec E = Vec::Zero(nodes_.size());
    const auto& p = prob_.bulk;
    if (p.velocity_time_factor && p.velocity_spatial) {
      const double fac = p.velocity_time_factor(t);
      double buf[3];
      for (int s = 0; s < p.d; ++s) {
        Vec gc = ops_.grad[s].L * C;
        for (int i = 0; i < n; ++i) {
          p.velocity_spatial(nodes_.points[i], buf);
          E[i] -= fac * buf[s] * gc[i];
        }
      }
    } else {
      double buf[3];
      for (int s = 0; s < p.d; ++s) {
        Vec gc = ops_.grad[s].L * C;
        for (int i = 0; i < n; ++i) {
          p.velocity(nodes_.points[i], t, buf);
          E[i] -= buf[s] * gc[i];
        }
      }
    }
    if (p.forcing_modes) {
      for (size_t m0 = 0; m0 < p.forcing_modes->time.size(); ++m0) {
        const double fac = p.forcing_modes->time[m0](t);
        for (int i = 0; i < n; ++i) E[i] += fac * p.forcing_modes->spatial[m0](nodes_.points[i]);
      }
    } else if (p.forcing) {
      for (int i = 0; i < n; ++i) E[i] += p.forcing(nodes_.points[i], t, C[i]);
    }
    return E;
  };
}

Vec ShellSolver::trace_s2(const Vec& c) const {
  Vec out((int)s2_.size());
  for (size_t q = 0; q < s2_.size(); ++q) out[q] = c[s2_[q]];
  return out;
}

Vec ShellSolver::surface_rhs(double t, const Vec& cb, const Vec& c_amb) const {
  const auto& m = prob_.model;
  Vec out((int)s2_.size());
  for (int q = 0; q < out.size(); ++q) {
    const double free_sites = m.c_tot - cb[q];
    out[q] = m.k_on * free_sites * c_amb[q] - m.k_off * cb[q] + m.k_self * cb[q] * free_sites;
    if (prob_.f2) out[q] += prob_.f2(nodes_.points[s2_[q]], t);
  }
  return out;
}

void ShellSolver::refresh_robin_rows(const Vec& cb_tilde) {
  const auto& m = prob_.model;
  auto write = [&](SpMat& M, const std::vector<int>& pos, const std::vector<double>& base) {
    double* val = M.valuePtr();
    for (size_t q = 0; q < s2_.size(); ++q)
      val[pos[q]] = base[q] + bc_scale_ * m.k_on * (m.c_tot - cb_tilde[q]);
  };
  write(M_, s2_diag_pos_, s2_diag_base_);
  if (step_count_ == 0) write(M1_, s2_diag_pos1_, s2_diag_base1_);
}

Vec ShellSolver::solve_bulk(int order, const Vec& pde_rhs, const Vec& g_rows) {
  const SpMat& M = order == 1 ? M1_ : M_;
  const int N = nodes_.size();
  Vec rhs = Vec::Zero(N);
  rhs.head(n_pde_) = pde_rhs.head(n_pde_);
  for (int j = 0; j < nodes_.part.n_boundary; ++j) rhs[n_pde_ + j] = bc_scale_ * g_rows[j];

  if (opts_.use_direct) {
    Eigen::SparseMatrix<double> Mc = M;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Mc);
    if (lu.info() != Eigen::Success) throw std::runtime_error("direct shell solve failed");
    return lu.solve(rhs);
  }
  const Preconditioner* pc = opts_.use_ilu ? (order == 1 ? ilu1_.get() : ilu_.get()) : nullptr;
  GmresResult r = preconditioned_solve(M, rhs, C_, pc, opts_.gmres_restart, opts_.gmres_max_iters,
                                       opts_.gmres_tol);
  last_iters_ = r.iterations;
  total_iters_ += r.iterations;
  ++solve_count_;
  return r.x;
}

void ShellSolver::step() {
  const auto& m = prob_.model;
  const int nb = nodes_.part.n_boundary;
  const bool first = step_count_ == 0;
  const double t_n = t_;
  const Vec c_amb_n = trace_s2(C_);

  // 1-2: provisional half-step of the surface ODE
  Vec cb_half;
  if (first) {
    cb_half = euler_step(CB_, surface_rhs(t_n, CB_, c_amb_n), 0.5 * dt_);
  } else {
    const Vec cb_half_prev = 0.5 * (CB_ + CB_prev_);
    const Vec c_amb_half_prev = trace_s2(0.5 * (C_ + history_.state(1)));
    const Vec f_now = surface_rhs(t_n, CB_, c_amb_n);
    const Vec f_prev = surface_rhs(t_n - 0.5 * dt_, cb_half_prev, c_amb_half_prev);
    cb_half = ab2_step(CB_, f_now, f_prev, 0.5 * dt_);
  }

  // 3: extrapolate to the new time level
  Vec cb_tilde = first ? Vec(2.0 * cb_half - CB_)
                       : Vec((8.0 / 3.0) * cb_half - 2.0 * CB_ + (1.0 / 3.0) * CB_prev_);

  // 4: refresh the S2 rows with the extrapolated surface density
  refresh_robin_rows(cb_tilde);

  // 5: bulk SBDF update (SBDF1 on the first step)
  const int order = first ? 1 : 2;
  Vec pde_rhs = sbdf_rhs(sbdf_coeffs(order), history_, dt_);
  const double t_new = t_n + dt_;
  Vec g(nb);
  for (int j = 0; j < nb; ++j) {
    if (nodes_.boundary_component[j] == 0)
      g[j] = prob_.bulk.bc_data(nodes_.points[nodes_.boundary_index(j)], t_new, 0);
    else
      g[j] = 0.0;
  }
  for (size_t q = 0; q < s2_.size(); ++q) g[s2_rows_[q]] = m.k_off * cb_tilde[q];
  Vec C_new = solve_bulk(order, pde_rhs, g);
  if (!C_new.allFinite())
    throw std::runtime_error("shell bulk solution blew up at step " +
                             std::to_string(step_count_ + 1));
  if (opts_.filter) positivity_filter(C_new, n_pde_);

  // 6: complete the surface update with the midpoint ambient trace
  const Vec c_amb_half = trace_s2(0.5 * (C_new + C_));
  Vec cb_new;
  if (first) {
    cb_new = euler_step(cb_half, surface_rhs(t_n + 0.5 * dt_, cb_half, c_amb_half), 0.5 * dt_);
  } else {
    const Vec f_half = surface_rhs(t_n + 0.5 * dt_, cb_half, c_amb_half);
    const Vec f_n = surface_rhs(t_n, CB_, c_amb_n);
    cb_new = ab2_step(cb_half, f_half, f_n, 0.5 * dt_);
  }

  CB_prev_ = CB_;
  CB_ = cb_new;
  history_.push(C_new, explicit_rhs_(t_new, C_new));
  C_ = std::move(C_new);
  t_ = t_new;
  ++step_count_;
}

void ShellSolver::initialize(const Vec& C0, const Vec& CB0) {
  if ((int)C0.size() != nodes_.size()) throw std::invalid_argument("bulk state length mismatch");
  if ((int)CB0.size() != (int)s2_.size())
    throw std::invalid_argument("surface state length mismatch");
  C_ = C0;
  // per the splitting recipe, initial ghosts come from spatial extrapolation
  Vec g0 = Vec::Zero(nodes_.part.n_boundary);
  initial_ghost_fill(nodes_, C_, B_, g0, ops_.grad[0].params, GhostFill::Extrapolate);
  CB_ = CB0;
  CB_prev_ = CB0;
  history_ = History(2);
  history_.push(C_, explicit_rhs_(0.0, C_));
  t_ = 0.0;
  step_count_ = 0;
}

void ShellSolver::run(double t_final) {
  const int steps = std::max(1, (int)std::llround(t_final / dt_));
  for (int s = 0; s < steps; ++s) step();
}

double ShellSolver::mean_gmres_iters() const {
  return solve_count_ ? (double)total_iters_ / solve_count_ : 0.0;
}

}  // namespace mfad
