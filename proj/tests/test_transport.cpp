// Boundary operator rows, the implicit ghost-node system, initial ghost fill,
// and the time loop on problems with known behavior.
#include <doctest.h>

#include <cmath>

#include "mfad/harness.hpp"
#include "mfad/transport.hpp"
#include "mfad/util.hpp"

using namespace mfad;

static NodeSet ghosted_disk(double h, uint64_t seed) {
  return generate_ghosts(generate_nodes(Domain::disk(1.0), h, seed), 0.0, seed + 1);
}

TEST_CASE("boundary operator rows") {
  NodeSet ns = ghosted_disk(0.1, 31);
  RbfFdParams p = select_params(3, 2, 2);
  KdTree tree(ns.points, 2);
  std::vector<DiffOp> grads;
  for (int s = 0; s < 2; ++s) grads.push_back(assemble(ns, OperatorTag::deriv(s), p, &tree));

  SUBCASE("Dirichlet rows are unit rows on boundary entries") {
    BoundaryOperator B = build_boundary_operator(ns, grads, {{BcKind::Dirichlet, 0.0}});
    for (int j = 0; j < ns.part.n_boundary; ++j) {
      int nnz = 0;
      for (SpMat::InnerIterator it(B.rows, j); it; ++it) {
        CHECK(it.col() == ns.boundary_index(j));
        CHECK(it.value() == 1.0);
        ++nnz;
      }
      CHECK(nnz == 1);
    }
  }

  SUBCASE("Neumann rows are exact on linear fields") {
    const double nu = 1.0;
    BoundaryOperator B = build_boundary_operator(ns, grads, {{BcKind::Neumann, nu}});
    Vec C(ns.size());
    for (int i = 0; i < ns.size(); ++i) C[i] = ns.points[i][0];  // c = x
    Vec bc = B.rows * C;
    for (int j = 0; j < ns.part.n_boundary; ++j) {
      const double expect = -nu * ns.normals[j][0];  // -nu dc/dn = -nu n_x
      CHECK(bc[j] == doctest::Approx(expect).epsilon(1e-7).scale(1.0));
    }
  }

  SUBCASE("Robin with zero reaction reduces to Neumann") {
    BoundaryOperator neumann = build_boundary_operator(ns, grads, {{BcKind::Neumann, 0.5}});
    BoundaryOperator robin = build_boundary_operator(
        ns, grads, {{BcKind::Robin, 0.5}}, [](const Point&) { return 0.0; });
    REQUIRE(neumann.rows.nonZeros() == robin.rows.nonZeros());
    for (int j = 0; j < ns.part.n_boundary; ++j) {
      SpMat::InnerIterator a(neumann.rows, j), b(robin.rows, j);
      for (; a && b; ++a, ++b) {
        CHECK(a.col() == b.col());
        CHECK(a.value() == b.value());
      }
      CHECK(robin.reaction[j] == 0.0);
    }
  }
}

TEST_CASE("implicit system structure and residual") {
  SUBCASE("nu = gamma = 0 with Dirichlet reduces to alpha*I plus unit rows") {
    NodeSet ns = generate_nodes(Domain::disk(1.0), 0.12, 7);  // no ghosts
    RbfFdParams p = select_params(2, 2, 2);
    KdTree tree(ns.points, 2);
    std::vector<DiffOp> grads;
    for (int s = 0; s < 2; ++s) grads.push_back(assemble(ns, OperatorTag::deriv(s), p, &tree));
    BoundaryOperator B = build_boundary_operator(ns, grads, {{BcKind::Dirichlet, 0.0}});
    ImplicitSystem sys(ns, nullptr, nullptr, B, 1.5, 0.0, 0.0, 0.01, false);
    Rng rng(3);
    Vec rhs(ns.size()), g(ns.part.n_boundary);
    for (int i = 0; i < rhs.size(); ++i) rhs[i] = rng.uniform(-1, 1);
    for (int j = 0; j < g.size(); ++j) g[j] = rng.uniform(-1, 1);
    Vec x = sys.solve(rhs, g);
    for (int i = 0; i < ns.part.n_interior; ++i)
      CHECK(x[i] == doctest::Approx(rhs[i] / 1.5).epsilon(1e-13));
    for (int j = 0; j < ns.part.n_boundary; ++j)
      CHECK(x[ns.boundary_index(j)] == doctest::Approx(g[j]).epsilon(1e-13));
  }

  SUBCASE("dt -> 0 limit returns the right-hand side") {
    NodeSet ns = ghosted_disk(0.12, 8);
    RbfFdParams p = select_params(2, 2, 2);
    Operators ops = assemble_transport_operators(ns, p, true, 0);
    BoundaryOperator B =
        build_boundary_operator(ns, ops.grad, {{BcKind::Neumann, 1.0}});
    ImplicitSystem sys(ns, &ops.lap->L, nullptr, B, 1.0, 1.0, 0.0, 1e-14, false);
    Vec rhs = Vec::Ones(ns.size());
    Vec g = Vec::Zero(ns.part.n_boundary);
    Vec x = sys.solve(rhs, g);
    for (int i = 0; i < ns.part.non_ghost(); ++i)
      CHECK(x[i] == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("solve residual on a disk system") {
    NodeSet ns = ghosted_disk(0.062, 9);  // ~500 interior nodes
    RbfFdParams p = select_params(3, 2, 2);
    Operators ops = assemble_transport_operators(ns, p, true, hyperviscosity_order(p.n));
    BoundaryOperator B =
        build_boundary_operator(ns, ops.grad, {{BcKind::Neumann, 1.0}});
    CalibrationOptions copts;
    copts.u_max = 1.0;
    copts.nu = 1.0;
    Calibration calib = calibrate(ops.grad, &*ops.lap, ns, p, copts);
    ImplicitSystem sys(ns, &ops.lap->L, &ops.hyp->L, B, 1.5, 1.0, calib.gamma, 0.01, false);
    Rng rng(10);
    Vec rhs(ns.size()), g(ns.part.n_boundary);
    for (int i = 0; i < rhs.size(); ++i) rhs[i] = rng.uniform(-1, 1);
    for (int j = 0; j < g.size(); ++j) g[j] = rng.uniform(-1, 1);
    Vec x = sys.solve(rhs, g);
    Vec full_rhs = Vec::Zero(ns.size());
    full_rhs.head(sys.pde_rows()) = rhs.head(sys.pde_rows());
    for (int j = 0; j < g.size(); ++j) full_rhs[sys.pde_rows() + j] = sys.bc_scale() * g[j];
    CHECK((sys.matrix() * x - full_rhs).norm() / full_rhs.norm() <= 1e-10);
  }

  SUBCASE("boundary-row scaling multiplies BC rows by dt^-2") {
    NodeSet ns = ghosted_disk(0.12, 12);
    RbfFdParams p = select_params(2, 2, 2);
    Operators ops = assemble_transport_operators(ns, p, true, 0);
    BoundaryOperator B =
        build_boundary_operator(ns, ops.grad, {{BcKind::Neumann, 0.01}});
    const double dt = 0.01;
    ImplicitSystem plain(ns, &ops.lap->L, nullptr, B, 1.0, 0.01, 0.0, dt, false);
    ImplicitSystem scaled(ns, &ops.lap->L, nullptr, B, 1.0, 0.01, 0.0, dt, true);
    CHECK(scaled.bc_scale() == doctest::Approx(1.0 / (dt * dt)));
    const int row = plain.pde_rows();
    SpMat::InnerIterator a(plain.matrix(), row), b(scaled.matrix(), row);
    for (; a && b; ++a, ++b) CHECK(b.value() == doctest::Approx(a.value() / (dt * dt)));
  }
}

TEST_CASE("initial ghost fill") {
  NodeSet ns = ghosted_disk(0.08, 21);
  RbfFdParams p = select_params(3, 2, 2);
  Operators ops = assemble_transport_operators(ns, p, true, 0);
  BoundaryOperator B = build_boundary_operator(ns, ops.grad, {{BcKind::Neumann, 1.0}});
  const int ng = ns.part.n_ghost;

  SUBCASE("constants are reproduced exactly by both paths") {
    Vec C = Vec::Ones(ns.size());
    C.tail(ng).setZero();
    Vec g = Vec::Zero(ns.part.n_boundary);
    Vec sub = C;
    initial_ghost_fill(ns, sub, B, g, p, GhostFill::SubSystem);
    CHECK((B.rows * sub - g).lpNorm<Eigen::Infinity>() <= 1e-10);
    Vec ext = C;
    initial_ghost_fill(ns, ext, B, g, p, GhostFill::Extrapolate);
    for (int j = 0; j < ng; ++j)
      CHECK(ext[ns.ghost_index(j)] == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("linear fields extrapolate exactly") {
    Vec C(ns.size());
    for (int i = 0; i < ns.size(); ++i) C[i] = ns.points[i][0];
    Vec g = Vec::Zero(ns.part.n_boundary);
    Vec ext = C;
    ext.tail(ng).setZero();
    initial_ghost_fill(ns, ext, B, g, p, GhostFill::Extrapolate);
    for (int j = 0; j < ng; ++j)
      CHECK(ext[ns.ghost_index(j)] ==
            doctest::Approx(ns.points[ns.ghost_index(j)][0]).epsilon(1e-10));
  }

  SUBCASE("manufactured field fill error tracks the analytic values") {
    ManufacturedCase mc = manufactured_case(CaseId::DiskAdvDiff, 10.0);
    Vec C(ns.size());
    for (int i = 0; i < ns.size(); ++i) C[i] = mc.c(ns.points[i], 0.0);
    Vec g(ns.part.n_boundary);
    for (int j = 0; j < ns.part.n_boundary; ++j)
      g[j] = mc.problem.bc_data(ns.points[ns.boundary_index(j)], 0.0, 0);
    Vec filled = C;
    filled.tail(ng).setZero();
    initial_ghost_fill(ns, filled, B, g, p, GhostFill::SubSystem);
    // BC rows are enforced exactly by the sub-system solve
    Vec bc = B.rows * filled;
    CHECK((bc - g).lpNorm<Eigen::Infinity>() <= 1e-9);
    // and the resulting ghost values stay near the analytic field
    double err = 0;
    for (int j = 0; j < ng; ++j)
      err = std::max(err, std::abs(filled[ns.ghost_index(j)] -
                                   mc.c(ns.points[ns.ghost_index(j)], 0.0)));
    CHECK(err <= 20.0 * std::pow(ns.h, 3));  // O(h^xi) with xi = 3
  }
}

TEST_CASE("advance: constant steady state under homogeneous Neumann") {
  NodeSet ns = ghosted_disk(0.09, 40);
  RbfFdParams p = select_params(3, 2, 2);
  Operators ops = assemble_transport_operators(ns, p, true, 0);

  TransportProblem prob;
  prob.d = 2;
  prob.nu = 1.0;
  prob.t_final = 0.5;
  prob.velocity = [](const Point&, double, double* u) { u[0] = u[1] = u[2] = 0.0; };
  prob.bcs = {{BcKind::Neumann, 1.0}};
  prob.bc_data = [](const Point&, double, int) { return 0.0; };

  Calibration calib;  // no velocity, no spurious advection modes: gamma = 0
  AdvanceOptions opts;
  opts.integrator = Integrator::Sbdf2;
  opts.dt = 0.025;
  double worst = 0.0;
  opts.observer = [&](int, double, const Vec& C) {
    for (int i = 0; i < ns.part.non_ghost(); ++i)
      worst = std::max(worst, std::abs(C[i] - 1.0));
  };
  AdvanceResult res = advance(prob, ns, ops, calib, Vec::Ones(ns.size()), opts);
  CHECK(worst <= 1e-10);
  CHECK(res.steps == 20);
}

TEST_CASE("advance: boundary rows hold at every accepted step") {
  ManufacturedCase mc = manufactured_case(CaseId::DiskAdvDiff, 10.0);
  NodeSet ns = ghosted_disk(0.1, 50);
  RbfFdParams p = select_params(2, 2, 2);
  Operators ops = assemble_transport_operators(ns, p, true, hyperviscosity_order(p.n));
  CalibrationOptions copts;
  copts.u_max = sample_u_max(mc.problem, ns);
  copts.nu = mc.nu;
  Calibration calib = calibrate(ops.grad, &*ops.lap, ns, p, copts);

  BoundaryOperator B = build_boundary_operator(ns, ops.grad, mc.problem.bcs);
  AdvanceOptions opts;
  opts.integrator = Integrator::Sbdf2;
  TransportProblem prob = mc.problem;
  prob.t_final = 0.1;
  double worst = 0.0;
  opts.u_max = copts.u_max;
  opts.observer = [&](int, double t, const Vec& C) {
    Vec bc = B.rows * C;
    for (int j = 0; j < ns.part.n_boundary; ++j) {
      const double g = prob.bc_data(ns.points[ns.boundary_index(j)], t, 0);
      worst = std::max(worst, std::abs(bc[j] - g));
    }
  };
  Vec C0(ns.size());
  for (int i = 0; i < ns.size(); ++i) C0[i] = mc.c(ns.points[i], 0.0);
  advance(prob, ns, ops, calib, C0, opts);
  CHECK(worst <= 1e-8);
}

TEST_CASE("advance: manufactured disk solution error stays small") {
  ManufacturedCase mc = manufactured_case(CaseId::DiskAdvDiff, 10.0);
  NodeSet ns = ghosted_disk(0.08, 60);
  RbfFdParams p = select_params(3, 2, 2);
  Operators ops = assemble_transport_operators(ns, p, true, hyperviscosity_order(p.n));
  CalibrationOptions copts;
  copts.u_max = sample_u_max(mc.problem, ns);
  copts.nu = mc.nu;
  Calibration calib = calibrate(ops.grad, &*ops.lap, ns, p, copts);
  AdvanceOptions opts;
  opts.integrator = Integrator::Sbdf4;
  opts.u_max = copts.u_max;
  Vec C0(ns.size());
  for (int i = 0; i < ns.size(); ++i) C0[i] = mc.c(ns.points[i], 0.0);
  AdvanceResult res = advance(mc.problem, ns, ops, calib, C0, opts);
  CHECK(res.t == doctest::Approx(2.0));
  ErrorPair e = relative_error(res.C, ns, mc.c, res.t);
  CHECK(e.e2 <= 2e-3);
}

TEST_CASE("rk4 path rejects ghosted node sets") {
  NodeSet ns = ghosted_disk(0.15, 70);
  RbfFdParams p = select_params(2, 1, 2);
  Operators ops = assemble_transport_operators(ns, p, false, 0);
  TransportProblem prob;
  prob.d = 2;
  prob.t_final = 1.0;
  prob.velocity = [](const Point& x, double, double* u) {
    u[0] = x[1];
    u[1] = -x[0];
    u[2] = 0;
  };
  AdvanceOptions opts;
  opts.integrator = Integrator::Rk4;
  Calibration calib;
  CHECK_THROWS_AS(advance(prob, ns, ops, calib, Vec::Ones(ns.size()), opts),
                  std::invalid_argument);
}
