// Manufactured solutions, convergence-study drivers, rate fitting, and the
// spectrum / Lebesgue-function diagnostics.
#pragma once

#include <map>
#include <optional>
#include <string>

#include "mfad/shell.hpp"
#include "mfad/transport.hpp"

namespace mfad {

enum class CaseId { DiskAdvection, DiskAdvDiff, BallAdvDiff, ShellCoupled };
CaseId case_from_string(const std::string& name);
std::string to_string(CaseId id);

struct ManufacturedCase {
  CaseId id = CaseId::DiskAdvDiff;
  int d = 2;
  double pe = 1.0;
  double nu = 0.0;
  double vel_scale = 1.0;  // prefactor applied to the base velocity field
  Domain domain;

  std::function<double(const Point&, double)> c;  // exact solution
  std::function<double(const Point&, double)> dcdt;
  std::function<void(const Point&, double, double*)> grad_c;
  std::function<double(const Point&, double)> lap_c;

  TransportProblem problem;  // ready to run (t_final = 2)

  // shell-only pieces
  ShellModel model;
  std::function<double(const Point&, double)> cb_exact;
  std::function<double(const Point&, double)> dcb_dt;
  std::function<double(const Point&, double)> f2;
  std::function<double(const Point&, double)> dcdn_inner;  // outward normal on S2

  ShellProblem shell_problem() const;
};

ManufacturedCase manufactured_case(CaseId id, double pe);

struct ErrorPair {
  double e2 = 0.0;
  double einf = 0.0;
};
// relative errors over non-ghost nodes against the exact solution at time t
ErrorPair relative_error(const Vec& C, const NodeSet& nodes,
                         const std::function<double(const Point&, double)>& exact, double t);

struct ConvergenceRow {
  int N = 0;  // non-ghost node count
  double h = 0.0;
  double e2 = 0.0;
  double einf = 0.0;
  double cb_e2 = 0.0;  // shell only
  double gmres_iters_mean = 0.0;
  double seconds = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::map<std::string, std::string> meta;

  double fitted_rate(bool use_inf = false) const;  // slope of ln(e) vs ln(N^(1/d)), negated
  double fitted_rate_cb() const;
  void write_csv(const std::string& path) const;
};

struct StudyOptions {
  uint64_t seed = 42;
  bool filter = true;
  Integrator integrator = Integrator::Sbdf4;
  double dt_override = 0.0;
  ScalingLaw law = ScalingLaw::LMinus1;
  bool with_eta = false;
  bool verbose = false;
};

// One table per (case, xi): runs the solver across the resolution ladder and
// fits the rate at t = 2.
ConvergenceTable convergence_study(const ManufacturedCase& mc, int xi,
                                   const std::vector<double>& h_targets,
                                   const StudyOptions& opts);

struct SpectrumEntry {
  ScalingLaw law;
  int m = 0;
  double max_real = 0.0;
  std::vector<std::pair<double, double>> eigenvalues;  // (re, im)
};
// dense spectra of the discrete Laplacian per scaling law; N <= 2000
std::vector<SpectrumEntry> spectrum_report(const NodeSet& nodes, int ell,
                                           const std::vector<ScalingLaw>& laws);

struct LebesgueEntry {
  ScalingLaw law;
  int m = 0;
  double max_lambda = 0.0;
  std::vector<double> lambda;  // per non-ghost node
};
std::vector<LebesgueEntry> lebesgue_report(const NodeSet& nodes, int ell,
                                           const std::vector<ScalingLaw>& laws);

double halton(int index, int base);  // radical-inverse sequence, index >= 1
// Halton points in [-1,1]^2 with evenly spaced nodes on the square boundary;
// used only by the Lebesgue diagnostic
NodeSet halton_square(int n_interior, double boundary_spacing);

// uniform grid on [0,1]^2 packaged as a node set (diagnostic oracle)
NodeSet uniform_grid_square(int per_side);

void write_spectrum_csv(const std::vector<SpectrumEntry>& entries, const std::string& path);
void write_lebesgue_csv(const std::vector<LebesgueEntry>& entries, const std::string& path);

}  // namespace mfad
