#include "mfad/transport.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace mfad {

Operators assemble_transport_operators(const NodeSet& nodes, const RbfFdParams& params,
                                       bool need_laplacian, int hyp_order) {
  Operators ops;
  KdTree tree(nodes.points, nodes.d);
  for (int s = 0; s < nodes.d; ++s)
    ops.grad.push_back(assemble(nodes, OperatorTag::deriv(s), params, &tree));
  if (need_laplacian) ops.lap = assemble(nodes, OperatorTag::laplacian(), params, &tree);
  if (hyp_order >= 1) ops.hyp = assemble_hyperviscosity(nodes, hyp_order, nodes.d, &tree);
  return ops;
}

BoundaryOperator build_boundary_operator(const NodeSet& nodes, const std::vector<DiffOp>& grads,
                                         const std::vector<BcSpec>& bcs,
                                         const std::function<double(const Point&)>& robin_coeff) {
  const int N = nodes.size();
  const int nb = nodes.part.n_boundary;
  if ((int)bcs.size() != nodes.domain.boundary_components())
    throw std::invalid_argument("one boundary condition per boundary component required");

  BoundaryOperator B;
  B.rows = SpMat(nb, N);
  B.reaction.assign(nb, 0.0);
  B.kind.resize(nb);
  std::vector<Eigen::Triplet<double>> tr;
  for (int j = 0; j < nb; ++j) {
    const int gj = nodes.boundary_index(j);
    const BcSpec& bc = bcs[nodes.boundary_component[j]];
    B.kind[j] = bc.kind;
    if (bc.kind == BcKind::Dirichlet) {
      tr.emplace_back(j, gj, 1.0);
      continue;
    }
    // -nu * (n . grad) from the assembled gradient rows at this boundary node
    const Point& nrm = nodes.normals[j];
    for (int s = 0; s < nodes.d; ++s) {
      const double w = -bc.nu * nrm[s];
      if (w == 0.0) continue;
      for (SpMat::InnerIterator it(grads[s].L, gj); it; ++it)
        tr.emplace_back(j, (int)it.col(), w * it.value());
    }
    if (bc.kind == BcKind::Robin && robin_coeff)
      B.reaction[j] = robin_coeff(nodes.points[gj]);
  }
  B.rows.setFromTriplets(tr.begin(), tr.end());
  return B;
}

SpMat build_time_stepping_matrix(const NodeSet& nodes, const SpMat* L, const SpMat* H,
                                 const BoundaryOperator& B, double alpha, double nu, double gamma,
                                 double dt, double bc_row_scale) {
  const int N = nodes.size();
  const int nb = nodes.part.n_boundary;
  const int n_pde = nodes.part.n_ghost > 0 ? nodes.part.non_ghost() : nodes.part.n_interior;
  if (nodes.part.n_ghost == 0 && (int)B.rows.rows() != nb)
    throw std::invalid_argument("boundary operator size mismatch");
  if (n_pde + nb != N)
    throw std::runtime_error("row layout does not close the system (check ghost count)");

  std::vector<Eigen::Triplet<double>> tr;
  for (int i = 0; i < n_pde; ++i) {
    tr.emplace_back(i, i, alpha);
    if (L && nu != 0.0)
      for (SpMat::InnerIterator it(*L, i); it; ++it)
        tr.emplace_back(i, (int)it.col(), -dt * nu * it.value());
    if (H && gamma != 0.0)
      for (SpMat::InnerIterator it(*H, i); it; ++it)
        tr.emplace_back(i, (int)it.col(), -dt * gamma * it.value());
  }
  for (int j = 0; j < nb; ++j) {
    const int row = n_pde + j;
    for (SpMat::InnerIterator it(B.rows, j); it; ++it)
      tr.emplace_back(row, (int)it.col(), bc_row_scale * it.value());
    if (B.reaction[j] != 0.0)
      tr.emplace_back(row, nodes.boundary_index(j), bc_row_scale * B.reaction[j]);
  }
  SpMat M(N, N);
  M.setFromTriplets(tr.begin(), tr.end());
  return M;
}

ImplicitSystem::ImplicitSystem(const NodeSet& nodes, const SpMat* L, const SpMat* H,
                               const BoundaryOperator& B, double alpha, double nu, double gamma,
                               double dt, bool scale_boundary_rows)
    : alpha_(alpha) {
  n_pde_ = nodes.part.n_ghost > 0 ? nodes.part.non_ghost() : nodes.part.n_interior;
  n_boundary_ = nodes.part.n_boundary;
  bc_scale_ = scale_boundary_rows ? 1.0 / (dt * dt) : 1.0;
  M_ = build_time_stepping_matrix(nodes, L, H, B, alpha, nu, gamma, dt, bc_scale_);
  M_col_ = M_;
  lu_.compute(M_col_);
  if (lu_.info() != Eigen::Success)
    throw std::runtime_error("singular time-stepping matrix (check boundary rows)");
}

Vec ImplicitSystem::solve(const Vec& pde_rhs, const Vec& g) const {
  const int N = (int)M_.rows();
  Vec rhs = Vec::Zero(N);
  rhs.head(n_pde_) = pde_rhs.head(n_pde_);
  for (int j = 0; j < n_boundary_; ++j) rhs[n_pde_ + j] = bc_scale_ * g[j];
  Vec x = lu_.solve(rhs);
  if (lu_.info() != Eigen::Success) throw std::runtime_error("implicit solve failed");
  return x;
}

void initial_ghost_fill(const NodeSet& nodes, Vec& C, const BoundaryOperator& B, const Vec& g,
                        const RbfFdParams& params, GhostFill method) {
  const int nb = nodes.part.n_boundary;
  const int ng = nodes.part.n_ghost;
  if (ng == 0 || method == GhostFill::None) return;
  const int ghost0 = nodes.part.ghost_begin();

  bool all_dirichlet = true;
  for (auto k : B.kind) all_dirichlet &= (k == BcKind::Dirichlet);
  bool extrapolate = method == GhostFill::Extrapolate || (method == GhostFill::Auto && all_dirichlet);

  if (!extrapolate) {
    // B_bg C_g = g - (B_bi C_i + B_bb C_b)  [one row per boundary node]
    Vec C_known = C;
    C_known.tail(ng).setZero();
    Vec rhs = g - B.rows * C_known;
    for (int j = 0; j < nb; ++j)
      rhs[j] -= B.reaction[j] * C[nodes.boundary_index(j)];
    std::vector<Eigen::Triplet<double>> tr;
    for (int j = 0; j < nb; ++j)
      for (SpMat::InnerIterator it(B.rows, j); it; ++it)
        if (it.col() >= ghost0) tr.emplace_back(j, (int)it.col() - ghost0, it.value());
    Eigen::SparseMatrix<double> Bg(nb, ng);
    Bg.setFromTriplets(tr.begin(), tr.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Bg);
    if (lu.info() == Eigen::Success) {
      Vec cg = lu.solve(rhs);
      if (lu.info() == Eigen::Success) {
        C.tail(ng) = cg;
        return;
      }
    }
    std::fprintf(stderr, "initial ghost fill: singular ghost sub-system, extrapolating\n");
  }

  // local RBF extrapolation from the nearest non-ghost nodes
  KdTree tree(nodes.points, nodes.d, nodes.part.non_ghost());
  for (int j = 0; j < ng; ++j) {
    const Point& gp = nodes.points[ghost0 + j];
    auto nbrs = tree.nearest(gp, params.n);
    Vec w = point_weights(nodes, nbrs, gp, OperatorTag::eval(), params);
    double v = 0.0;
    for (size_t q = 0; q < nbrs.size(); ++q) v += w[q] * C[nbrs[q]];
    C[ghost0 + j] = v;
  }
}

Integrator integrator_from_string(const std::string& name) {
  if (name == "rk4") return Integrator::Rk4;
  if (name == "sbdf1") return Integrator::Sbdf1;
  if (name == "sbdf2") return Integrator::Sbdf2;
  if (name == "sbdf3") return Integrator::Sbdf3;
  if (name == "sbdf4") return Integrator::Sbdf4;
  throw std::invalid_argument("unknown integrator: " + name);
}

namespace {

int target_order(Integrator integ) {
  switch (integ) {
    case Integrator::Sbdf1: return 1;
    case Integrator::Sbdf2: return 2;
    case Integrator::Sbdf3: return 3;
    case Integrator::Sbdf4: return 4;
    default: return 0;
  }
}

// nodal velocity components over the first `count` nodes
void eval_velocity(const TransportProblem& p, const NodeSet& nodes, double t, int count,
                   std::vector<Eigen::VectorXd>& u) {
  double buf[3];
  for (int i = 0; i < count; ++i) {
    p.velocity(nodes.points[i], t, buf);
    for (int s = 0; s < p.d; ++s) u[s][i] = buf[s];
  }
}

}  // namespace

double sample_u_max(const TransportProblem& problem, const NodeSet& nodes) {
  const int count = nodes.part.non_ghost();
  double best = 0.0;
  double buf[3] = {0, 0, 0};
  for (int j = 0; j < 33; ++j) {
    const double t = problem.t_final * j / 32.0;
    for (int i = 0; i < count; ++i) {
      problem.velocity(nodes.points[i], t, buf);
      double s2 = 0.0;
      for (int s = 0; s < problem.d; ++s) s2 += buf[s] * buf[s];
      best = std::max(best, s2);
    }
  }
  return std::sqrt(best);
}

AdvanceResult advance(const TransportProblem& problem, const NodeSet& nodes, const Operators& ops,
                      const Calibration& calib, const Vec& C0, const AdvanceOptions& opts) {
  const int N = nodes.size();
  const int d = problem.d;
  const int n_pde = nodes.part.n_ghost > 0 ? nodes.part.non_ghost() : nodes.part.n_interior;
  const int n_filter = nodes.part.non_ghost();
  if ((int)C0.size() != N) throw std::invalid_argument("initial state length mismatch");

  AdvanceResult res;
  res.u_max = opts.u_max > 0 ? opts.u_max : sample_u_max(problem, nodes);
  double dt0 = opts.dt;
  if (dt0 <= 0.0) {
    if (res.u_max <= 0.0)
      throw std::invalid_argument("dt rule needs a nonzero velocity; set dt explicitly");
    dt0 = nodes.h / (2.0 * res.u_max);
  }
  const int steps = std::max(1, (int)std::ceil(problem.t_final / dt0));
  const double dt = problem.t_final / steps;
  res.dt = dt;
  res.steps = steps;

  // separable velocity: nodal base fields sampled once
  const bool split_u = problem.velocity_time_factor && problem.velocity_spatial;
  std::vector<Eigen::VectorXd> u_base(3, Eigen::VectorXd::Zero(n_filter));
  if (split_u) {
    double buf[3];
    for (int i = 0; i < n_filter; ++i) {
      problem.velocity_spatial(nodes.points[i], buf);
      for (int s = 0; s < d; ++s) u_base[s][i] = buf[s];
    }
  }
  std::vector<Eigen::VectorXd> u_now(3, Eigen::VectorXd::Zero(n_filter));

  // separable forcing: spatial modes sampled once
  std::vector<Eigen::VectorXd> f_modes;
  if (problem.forcing_modes) {
    for (const auto& sf : problem.forcing_modes->spatial) {
      Eigen::VectorXd v(n_filter);
      for (int i = 0; i < n_filter; ++i) v[i] = sf(nodes.points[i]);
      f_modes.push_back(std::move(v));
    }
  }

  // explicit right-hand side on non-ghost rows: -u.grad(C) + forcing
  auto explicit_rhs = [&](double t, const Vec& C) {
    Vec E = Vec::Zero(N);
    if (split_u) {
      const double fac = problem.velocity_time_factor(t);
      for (int s = 0; s < d; ++s) {
        Vec gc = ops.grad[s].L * C;
        E.head(n_filter).array() -= fac * u_base[s].array() * gc.head(n_filter).array();
      }
    } else {
      eval_velocity(problem, nodes, t, n_filter, u_now);
      for (int s = 0; s < d; ++s) {
        Vec gc = ops.grad[s].L * C;
        E.head(n_filter).array() -= u_now[s].array() * gc.head(n_filter).array();
      }
    }
    if (problem.forcing_modes) {
      for (size_t m = 0; m < f_modes.size(); ++m)
        E.head(n_filter) += problem.forcing_modes->time[m](t) * f_modes[m];
    } else if (problem.forcing) {
      for (int i = 0; i < n_filter; ++i)
        E[i] += problem.forcing(nodes.points[i], t, C[i]);
    }
    return E;
  };

  const SpMat* Lp = (ops.lap && problem.nu != 0.0) ? &ops.lap->L : nullptr;
  const SpMat* Hp = (ops.hyp && calib.gamma != 0.0) ? &ops.hyp->L : nullptr;

  if (opts.integrator == Integrator::Rk4) {
    if (nodes.part.n_ghost != 0)
      throw std::invalid_argument("explicit RK4 path expects a node set without ghosts");
    auto rhs = [&](double t, const Vec& C) {
      Vec E = explicit_rhs(t, C);
      if (Lp) E += problem.nu * (*Lp * C);
      if (Hp) E += calib.gamma * (*Hp * C);
      return E;
    };
    Vec C = C0;
    double t = 0.0;
    for (int step = 1; step <= steps; ++step) {
      C = rk4_step(C, t, dt, rhs);
      t = step * dt;
      if (opts.filter) positivity_filter(C, n_filter);
      if (!C.allFinite())
        throw std::runtime_error("solution blew up at step " + std::to_string(step));
      if (opts.observer) opts.observer(step, t, C);
    }
    res.C = std::move(C);
    res.t = t;
    return res;
  }

  // SBDF path
  const int order = target_order(opts.integrator);
  if (order < 1) throw std::invalid_argument("unsupported integrator for this problem");
  if (problem.bcs.empty() || !problem.bc_data)
    throw std::invalid_argument("SBDF path requires boundary conditions");

  const bool scale_rows = opts.scale_boundary_rows < 0 ? (problem.nu < 0.1)
                                                       : opts.scale_boundary_rows > 0;
  BoundaryOperator B = build_boundary_operator(nodes, ops.grad, problem.bcs, problem.robin_coeff);
  const int nb = nodes.part.n_boundary;
  auto eval_g = [&](double t) {
    Vec g(nb);
    for (int j = 0; j < nb; ++j)
      g[j] = problem.bc_data(nodes.points[nodes.boundary_index(j)], t,
                             nodes.boundary_component[j]);
    return g;
  };

  Vec C = C0;
  if (nodes.part.n_ghost > 0 && opts.ghost_fill != GhostFill::None)
    initial_ghost_fill(nodes, C, B, eval_g(0.0), ops.grad[0].params, opts.ghost_fill);

  std::map<int, std::unique_ptr<ImplicitSystem>> systems;
  auto system = [&](int p) -> ImplicitSystem& {
    auto it = systems.find(p);
    if (it == systems.end()) {
      auto sys = std::make_unique<ImplicitSystem>(nodes, Lp, Hp, B, sbdf_coeffs(p).alpha,
                                                  problem.nu, calib.gamma, dt, scale_rows);
      it = systems.emplace(p, std::move(sys)).first;
    }
    return *it->second;
  };

  History history(order);
  history.push(C, explicit_rhs(0.0, C));
  double t = 0.0;
  for (int step = 1; step <= steps; ++step) {
    const int p = history.active_order();
    const SbdfCoeffs coeffs = sbdf_coeffs(p);
    Vec rhs = sbdf_rhs(coeffs, history, dt);
    t = step * dt;
    Vec C_new = system(p).solve(rhs, eval_g(t));
    if (!C_new.allFinite())
      throw std::runtime_error("solution blew up at step " + std::to_string(step) +
                               " (calibration failure?)");
    if (opts.filter) positivity_filter(C_new, n_filter);
    history.push(C_new, explicit_rhs(t, C_new));
    C = std::move(C_new);
    if (opts.observer) opts.observer(step, t, C);
  }
  res.C = std::move(C);
  res.t = t;
  return res;
}

}  // namespace mfad
