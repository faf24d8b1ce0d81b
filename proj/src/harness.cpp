#include "mfad/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace mfad {

namespace {
constexpr double kPi = std::numbers::pi;

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};
}  // namespace

CaseId case_from_string(const std::string& name) {
  if (name == "disk-advection" || name == "adv") return CaseId::DiskAdvection;
  if (name == "disk-addiff") return CaseId::DiskAdvDiff;
  if (name == "ball-addiff") return CaseId::BallAdvDiff;
  if (name == "shell-coupled") return CaseId::ShellCoupled;
  throw std::invalid_argument("unknown case id: " + name);
}

std::string to_string(CaseId id) {
  switch (id) {
    case CaseId::DiskAdvection: return "disk-advection";
    case CaseId::DiskAdvDiff: return "disk-addiff";
    case CaseId::BallAdvDiff: return "ball-addiff";
    case CaseId::ShellCoupled: return "shell-coupled";
  }
  return "?";
}

namespace {

// trigonometric product S(x) and its derivatives for the manufactured fields
double S2d(const Point& p) { return std::sin(kPi * p[0]) * std::cos(kPi * p[1]); }
void gradS2d(const Point& p, double* g) {
  g[0] = kPi * std::cos(kPi * p[0]) * std::cos(kPi * p[1]);
  g[1] = -kPi * std::sin(kPi * p[0]) * std::sin(kPi * p[1]);
  g[2] = 0.0;
}
double S3d(const Point& p) {
  return std::sin(kPi * p[0]) * std::cos(kPi * p[1]) * std::sin(kPi * p[2]);
}
void gradS3d(const Point& p, double* g) {
  const double sx = std::sin(kPi * p[0]), cx = std::cos(kPi * p[0]);
  const double sy = std::sin(kPi * p[1]), cy = std::cos(kPi * p[1]);
  const double sz = std::sin(kPi * p[2]), cz = std::cos(kPi * p[2]);
  g[0] = kPi * cx * cy * sz;
  g[1] = -kPi * sx * sy * sz;
  g[2] = kPi * sx * cy * cz;
}

double r2of(const Point& p) { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; }

// rotational base fields (time factor handled separately)
void disk_base(const Point& p, double* u) {
  u[0] = p[1];
  u[1] = -p[0];
  u[2] = 0.0;
}
void ball_base(const Point& p, double* u) {
  u[0] = -p[1] * p[2];
  u[1] = 2.0 * p[0] * p[2];
  u[2] = -p[0] * p[1];
}

ManufacturedCase make_adv_diff(CaseId id, double pe) {
  ManufacturedCase mc;
  mc.id = id;
  mc.pe = pe;
  const bool is2d = id == CaseId::DiskAdvDiff;
  const bool shell = id == CaseId::ShellCoupled;
  mc.d = is2d ? 2 : 3;
  mc.nu = shell ? 0.01 : 1.0;
  mc.vel_scale = pe * mc.nu;  // Pe = u L* / nu with L* = 1
  mc.domain = is2d ? Domain::disk(1.0) : (shell ? Domain::shell(0.3, 1.0) : Domain::ball(1.0));

  auto S = is2d ? S2d : S3d;
  auto gradS = is2d ? gradS2d : gradS3d;
  const double lapS_factor = -(is2d ? 2.0 : 3.0) * kPi * kPi;  // lap S = factor * S
  const double nu = mc.nu;
  const double scale = mc.vel_scale;

  mc.c = [S](const Point& p, double t) { return 1.0 + S(p) * std::exp(-kPi * t); };
  mc.dcdt = [S](const Point& p, double t) { return -kPi * S(p) * std::exp(-kPi * t); };
  mc.grad_c = [gradS](const Point& p, double t, double* g) {
    gradS(p, g);
    const double e = std::exp(-kPi * t);
    g[0] *= e; g[1] *= e; g[2] *= e;
  };
  mc.lap_c = [S, lapS_factor](const Point& p, double t) {
    return lapS_factor * S(p) * std::exp(-kPi * t);
  };

  // velocity: scale * spatial_envelope(x) * sin(pi t) * base(x)
  auto envelope = [shell](const Point& p) {
    const double r2 = r2of(p);
    double e = std::sin(kPi * r2);
    if (shell) e *= std::sin(kPi / (0.3 * 0.3) * r2);
    return e;
  };
  auto base = is2d ? disk_base : ball_base;
  auto spatial = [envelope, base, scale](const Point& p, double* u) {
    base(p, u);
    const double e = scale * envelope(p);
    u[0] *= e; u[1] *= e; u[2] *= e;
  };
  mc.problem.d = mc.d;
  mc.problem.nu = nu;
  mc.problem.t_final = 2.0;
  mc.problem.velocity_spatial = spatial;
  mc.problem.velocity_time_factor = [](double t) { return std::sin(kPi * t); };
  mc.problem.velocity = [spatial](const Point& p, double t, double* u) {
    spatial(p, u);
    const double f = std::sin(kPi * t);
    u[0] *= f; u[1] *= f; u[2] *= f;
  };

  // f1 = dc/dt + u.grad(c) - nu lap(c) splits into two separable modes
  SeparableField f;
  f.time.push_back([](double t) { return std::exp(-kPi * t); });
  f.spatial.push_back([S, lapS_factor, nu](const Point& p) {
    return (-kPi - nu * lapS_factor) * S(p);
  });
  f.time.push_back([](double t) { return std::exp(-kPi * t) * std::sin(kPi * t); });
  f.spatial.push_back([spatial, gradS](const Point& p) {
    double u[3], g[3];
    spatial(p, u);
    gradS(p, g);
    return u[0] * g[0] + u[1] * g[1] + u[2] * g[2];
  });
  mc.problem.forcing_modes = f;
  mc.problem.forcing = [f](const Point& p, double t, double) {
    return f.time[0](t) * f.spatial[0](p) + f.time[1](t) * f.spatial[1](p);
  };

  // -nu dc/dn with the outward normal; component 0 is the outer sphere/circle
  auto grad_c = mc.grad_c;
  const double r_in = mc.domain.r_inner;
  mc.problem.bcs.assign(mc.domain.boundary_components(), BcSpec{BcKind::Neumann, nu});
  if (shell) mc.problem.bcs[1] = BcSpec{BcKind::Robin, nu};
  mc.problem.bc_data = [grad_c, nu, r_in](const Point& p, double t, int comp) {
    double g[3];
    grad_c(p, t, g);
    const double r = norm2(p);
    const double sgn = comp == 1 ? -1.0 : 1.0;  // inner normal points toward the center
    const double dcdn = sgn * (p[0] * g[0] + p[1] * g[1] + p[2] * g[2]) / r;
    return -nu * dcdn;
  };

  if (shell) {
    const ShellModel model;  // unit rates; manufactured forcing absorbs the choice
    mc.model = model;
    mc.dcdn_inner = [gradS](const Point& p, double t) {
      double g[3];
      gradS(p, g);
      const double r = norm2(p);
      return -(p[0] * g[0] + p[1] * g[1] + p[2] * g[2]) / r * std::exp(-kPi * t);
    };
    auto dcdn = mc.dcdn_inner;
    auto c_exact = mc.c;
    mc.cb_exact = [c_exact, dcdn, nu, model](const Point& p, double t) {
      return manufactured_CB(c_exact(p, t), dcdn(p, t), nu, model);
    };
    // dCB/dt by the quotient rule on CB = Nu/De with E = exp(-pi t)
    mc.dcb_dt = [S, gradS, nu, model](const Point& p, double t) {
      const double E = std::exp(-kPi * t);
      const double s = S(p);
      double g[3];
      gradS(p, g);
      const double r = norm2(p);
      const double D = -(p[0] * g[0] + p[1] * g[1] + p[2] * g[2]) / r;  // dc/dn = D*E
      const double Nu = -nu * D * E + model.k_on * model.c_tot * (1.0 + s * E);
      const double De = model.k_on * (1.0 + s * E) + model.k_off;
      const double dNu = (-nu * D + model.k_on * model.c_tot * s) * (-kPi * E);
      const double dDe = model.k_on * s * (-kPi * E);
      return (dNu * De - Nu * dDe) / (De * De);
    };
    auto cb = mc.cb_exact;
    auto dcb = mc.dcb_dt;
    mc.f2 = [cb, dcb, c_exact, model](const Point& p, double t) {
      const double b = cb(p, t), c = c_exact(p, t);
      return dcb(p, t) - model.k_on * (model.c_tot - b) * c + model.k_off * b -
             model.k_self * b * (model.c_tot - b);
    };
  }
  return mc;
}

ManufacturedCase make_disk_advection() {
  ManufacturedCase mc;
  mc.id = CaseId::DiskAdvection;
  mc.d = 2;
  mc.pe = 0.0;  // pure advection
  mc.nu = 0.0;
  mc.vel_scale = 2.0 * kPi;
  mc.domain = Domain::disk(1.0);

  const double x0 = 0.5, y0 = 0.05, lambda = 1.0 / 8.0;
  // the rotational field returns the profile to its start at t = 2
  auto angle = [](double t) { return 2.0 * (1.0 - std::cos(kPi * t)); };
  mc.c = [=](const Point& p, double t) {
    const double th = angle(t);
    const double xr = p[0] * std::cos(th) - p[1] * std::sin(th);
    const double yr = p[0] * std::sin(th) + p[1] * std::cos(th);
    const double q = (xr - x0) * (xr - x0) + (yr - y0) * (yr - y0);
    return std::exp(-q / (lambda * lambda));
  };

  mc.problem.d = 2;
  mc.problem.nu = 0.0;
  mc.problem.t_final = 2.0;
  mc.problem.velocity_spatial = [](const Point& p, double* u) {
    u[0] = 2.0 * kPi * p[1];
    u[1] = -2.0 * kPi * p[0];
    u[2] = 0.0;
  };
  mc.problem.velocity_time_factor = [](double t) { return std::sin(kPi * t); };
  mc.problem.velocity = [](const Point& p, double t, double* u) {
    const double f = 2.0 * kPi * std::sin(kPi * t);
    u[0] = f * p[1];
    u[1] = -f * p[0];
    u[2] = 0.0;
  };
  return mc;
}

}  // namespace

ManufacturedCase manufactured_case(CaseId id, double pe) {
  if (id == CaseId::DiskAdvection) return make_disk_advection();
  return make_adv_diff(id, pe);
}

ShellProblem ManufacturedCase::shell_problem() const {
  if (id != CaseId::ShellCoupled)
    throw std::invalid_argument("shell problem requested from a non-shell case");
  ShellProblem sp;
  sp.bulk = problem;
  sp.model = model;
  sp.f2 = f2;
  auto cb = cb_exact;
  sp.cb_init = [cb](const Point& p, double t) { return cb(p, t); };
  return sp;
}

ErrorPair relative_error(const Vec& C, const NodeSet& nodes,
                         const std::function<double(const Point&, double)>& exact, double t) {
  const int m = nodes.part.non_ghost();
  double num2 = 0, den2 = 0, numi = 0, deni = 0;
  for (int i = 0; i < m; ++i) {
    const double e = exact(nodes.points[i], t);
    const double diff = C[i] - e;
    num2 += diff * diff;
    den2 += e * e;
    numi = std::max(numi, std::abs(diff));
    deni = std::max(deni, std::abs(e));
  }
  return {std::sqrt(num2 / den2), numi / deni};
}

double ConvergenceTable::fitted_rate(bool use_inf) const {
  if (rows.size() < 2) throw std::runtime_error("rate fit needs at least two resolutions");
  const int d = meta.count("d") ? std::stoi(meta.at("d")) : 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = std::log((double)r.N) / d;
    const double y = std::log(use_inf ? r.einf : r.e2);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double n = (double)rows.size();
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double ConvergenceTable::fitted_rate_cb() const {
  const int d = meta.count("d") ? std::stoi(meta.at("d")) : 3;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = std::log((double)r.N) / d;
    const double y = std::log(r.cb_e2);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double n = (double)rows.size();
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void ConvergenceTable::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [k, v] : meta) f << "# " << k << "=" << v << "\n";
  f << "N,h,l2_error,linf_error,cb_l2_error,gmres_iters_mean,seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.6g,%.3f\n", r.N, r.h, r.e2,
                  r.einf, r.cb_e2, r.gmres_iters_mean, r.seconds);
    f << buf;
  }
}

ConvergenceTable convergence_study(const ManufacturedCase& mc, int xi,
                                   const std::vector<double>& h_targets,
                                   const StudyOptions& opts) {
  ConvergenceTable table;
  const int theta = mc.id == CaseId::DiskAdvection ? 1 : 2;
  const RbfFdParams params0 = select_params(xi, theta, mc.d, opts.law);
  table.meta["case"] = to_string(mc.id);
  table.meta["d"] = std::to_string(mc.d);
  table.meta["xi"] = std::to_string(xi);
  table.meta["theta"] = std::to_string(theta);
  table.meta["ell"] = std::to_string(params0.ell);
  table.meta["m"] = std::to_string(params0.m);
  table.meta["M"] = std::to_string(params0.M);
  table.meta["n"] = std::to_string(params0.n);
  table.meta["delta"] = std::to_string(params0.delta);
  table.meta["law"] = to_string(opts.law);
  table.meta["pe"] = std::to_string(mc.pe);
  table.meta["nu"] = std::to_string(mc.nu);
  table.meta["seed"] = std::to_string(opts.seed);
  table.meta["filter"] = opts.filter ? "on" : "off";
  table.meta["dt_rule"] = opts.dt_override > 0 ? "override" : "h/(2*umax)";

  int row_id = 0;
  for (double ht : h_targets) {
    Clock clock;
    NodeSet nodes = generate_nodes(mc.domain, ht, opts.seed + 1000 * row_id);
    const bool needs_ghosts = !mc.problem.bcs.empty();
    if (needs_ghosts) nodes = generate_ghosts(nodes, 0.0, opts.seed + 1000 * row_id + 1);

    RbfFdParams params = params0;
    const int k_hyp = hyperviscosity_order(params.n);
    Operators ops = assemble_transport_operators(nodes, params, mc.nu > 0, k_hyp);

    CalibrationOptions copts;
    copts.u_max = sample_u_max(mc.problem, nodes);
    copts.nu = mc.nu;
    copts.with_eta = opts.with_eta;
    copts.seed = opts.seed + 77;
    Calibration calib = calibrate(ops.grad, ops.lap ? &*ops.lap : nullptr, nodes, params, copts);

    ConvergenceRow row;
    row.N = nodes.part.non_ghost();
    row.h = nodes.h;

    if (mc.id == CaseId::ShellCoupled) {
      ShellProblem sp = mc.shell_problem();
      ShellOptions sopts;
      sopts.dt = opts.dt_override;
      sopts.filter = opts.filter;
      ShellSolver solver(sp, nodes, ops, calib, sopts);
      Vec C0(nodes.size());
      for (int i = 0; i < nodes.size(); ++i) C0[i] = mc.c(nodes.points[i], 0.0);
      Vec CB0((int)solver.s2_nodes().size());
      for (size_t q = 0; q < solver.s2_nodes().size(); ++q)
        CB0[q] = mc.cb_exact(nodes.points[solver.s2_nodes()[q]], 0.0);
      solver.initialize(C0, CB0);
      solver.run(mc.problem.t_final);

      ErrorPair e = relative_error(solver.bulk(), nodes, mc.c, solver.time());
      row.e2 = e.e2;
      row.einf = e.einf;
      double num = 0, den = 0;
      for (size_t q = 0; q < solver.s2_nodes().size(); ++q) {
        const double ex = mc.cb_exact(nodes.points[solver.s2_nodes()[q]], solver.time());
        num += (solver.surface()[q] - ex) * (solver.surface()[q] - ex);
        den += ex * ex;
      }
      row.cb_e2 = std::sqrt(num / den);
      row.gmres_iters_mean = solver.mean_gmres_iters();
    } else {
      AdvanceOptions aopts;
      aopts.integrator = mc.id == CaseId::DiskAdvection ? Integrator::Rk4 : opts.integrator;
      aopts.dt = opts.dt_override;
      aopts.u_max = copts.u_max;
      aopts.filter = opts.filter;
      Vec C0(nodes.size());
      for (int i = 0; i < nodes.size(); ++i) C0[i] = mc.c(nodes.points[i], 0.0);
      AdvanceResult res = advance(mc.problem, nodes, ops, calib, C0, aopts);
      ErrorPair e = relative_error(res.C, nodes, mc.c, res.t);
      row.e2 = e.e2;
      row.einf = e.einf;
    }
    row.seconds = clock.seconds();
    table.rows.push_back(row);

    const std::string tag = "row" + std::to_string(row_id);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", calib.gamma);
    table.meta[tag + ".gamma"] = buf;
    std::snprintf(buf, sizeof buf, "%.6g", calib.eps);
    table.meta[tag + ".eps"] = buf;
    std::snprintf(buf, sizeof buf, "%.6g", calib.q1);
    table.meta[tag + ".q1"] = buf;
    table.meta[tag + ".k"] = std::to_string(calib.k);
    if (opts.verbose)
      std::printf("  [%s xi=%d] N=%d h=%.4g e2=%.3e einf=%.3e cb=%.3e (%.1fs)\n",
                  to_string(mc.id).c_str(), xi, row.N, row.h, row.e2, row.einf, row.cb_e2,
                  row.seconds);
    ++row_id;
  }
  return table;
}

std::vector<SpectrumEntry> spectrum_report(const NodeSet& nodes, int ell,
                                           const std::vector<ScalingLaw>& laws) {
  if (nodes.part.non_ghost() > 2000)
    throw std::invalid_argument("dense spectrum limited to N <= 2000; use the Arnoldi path");
  std::vector<SpectrumEntry> out;
  KdTree tree(nodes.points, nodes.d);
  for (ScalingLaw law : laws) {
    RbfFdParams p = params_for_degree(ell, nodes.d, law);
    DiffOp lap = assemble(nodes, OperatorTag::laplacian(), p, &tree);
    Eigen::MatrixXd dense(lap.non_ghost_block());
    Eigen::EigenSolver<Eigen::MatrixXd> es(dense, false);
    SpectrumEntry e;
    e.law = law;
    e.m = p.m;
    e.max_real = es.eigenvalues().real().maxCoeff();
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      e.eigenvalues.emplace_back(es.eigenvalues()[i].real(), es.eigenvalues()[i].imag());
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<LebesgueEntry> lebesgue_report(const NodeSet& nodes, int ell,
                                           const std::vector<ScalingLaw>& laws) {
  std::vector<LebesgueEntry> out;
  KdTree tree(nodes.points, nodes.d);
  for (ScalingLaw law : laws) {
    RbfFdParams p = params_for_degree(ell, nodes.d, law);
    DiffOp lap = assemble(nodes, OperatorTag::laplacian(), p, &tree);
    LebesgueEntry e;
    e.law = law;
    e.m = p.m;
    for (const auto& row : lebesgue_map(lap)) {
      e.lambda.push_back(row.lambda);
      e.max_lambda = std::max(e.max_lambda, row.lambda);
    }
    out.push_back(std::move(e));
  }
  return out;
}

double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

NodeSet halton_square(int n_interior, double boundary_spacing) {
  NodeSet out;
  out.domain = Domain::disk(2.0);  // placeholder; diagnostics never validate it
  out.d = 2;
  for (int i = 1; i <= n_interior; ++i)
    out.points.push_back({2.0 * halton(i, 2) - 1.0, 2.0 * halton(i, 3) - 1.0, 0.0});
  const int per_side = std::max(2, (int)std::llround(2.0 / boundary_spacing));
  for (int j = 0; j < per_side; ++j) {
    const double s = -1.0 + 2.0 * j / per_side;
    out.points.push_back({s, -1.0, 0.0});
    out.points.push_back({1.0, s, 0.0});
    out.points.push_back({-s, 1.0, 0.0});
    out.points.push_back({-1.0, -s, 0.0});
  }
  out.part.n_interior = (int)out.points.size();
  out.h = std::pow((double)out.points.size(), -0.5);
  return out;
}

NodeSet uniform_grid_square(int per_side) {
  NodeSet out;
  out.domain = Domain::disk(2.0);
  out.d = 2;
  const double h = 1.0 / (per_side - 1);
  for (int i = 0; i < per_side; ++i)
    for (int j = 0; j < per_side; ++j) out.points.push_back({i * h, j * h, 0.0});
  out.part.n_interior = (int)out.points.size();
  out.h = std::pow((double)out.points.size(), -0.5);
  return out;
}

void write_spectrum_csv(const std::vector<SpectrumEntry>& entries, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "law,m,max_real,re,im\n";
  char buf[160];
  for (const auto& e : entries)
    for (const auto& [re, im] : e.eigenvalues) {
      std::snprintf(buf, sizeof buf, "%s,%d,%.10g,%.10g,%.10g\n", to_string(e.law).c_str(), e.m,
                    e.max_real, re, im);
      f << buf;
    }
}

void write_lebesgue_csv(const std::vector<LebesgueEntry>& entries, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "law,m,node,lambda\n";
  char buf[96];
  for (const auto& e : entries)
    for (size_t i = 0; i < e.lambda.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%d,%zu,%.10g\n", to_string(e.law).c_str(), e.m, i,
                    e.lambda[i]);
      f << buf;
    }
}

}  // namespace mfad
