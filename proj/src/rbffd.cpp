#include "mfad/rbffd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mfad/util.hpp"

namespace mfad {

ScalingLaw scaling_law_from_string(const std::string& name) {
  if (name == "lm1" || name == "classical" || name == "lp1" || name == "fixed3") {
    if (name == "classical") return ScalingLaw::Classical;
    if (name == "lp1") return ScalingLaw::LPlus1;
    if (name == "fixed3") return ScalingLaw::Fixed3;
    return ScalingLaw::LMinus1;
  }
  throw std::invalid_argument("unknown scaling law: " + name);
}

std::string to_string(ScalingLaw law) {
  switch (law) {
    case ScalingLaw::LMinus1: return "lm1";
    case ScalingLaw::LPlus1: return "lp1";
    case ScalingLaw::Classical: return "classical";
    case ScalingLaw::Fixed3: return "fixed3";
  }
  return "?";
}

int phs_exponent(int ell, ScalingLaw law) {
  int m = 3;
  switch (law) {
    case ScalingLaw::LMinus1: m = (ell % 2 == 1) ? ell : ell - 1; break;
    case ScalingLaw::LPlus1: m = (ell % 2 == 1) ? ell : ell + 1; break;
    case ScalingLaw::Classical: m = 2 * ell + 1; break;
    case ScalingLaw::Fixed3: m = 3; break;
  }
  // r^1 is not twice differentiable at the origin; r^3 is the smallest PHS
  // usable for differential-operator right-hand sides.
  return std::max(m, 3);
}

double delta_heuristic(int ell) {
  if (ell <= 3) return 0.7;
  if (ell < 6) return 0.5;
  return 0.3;
}

void RbfFdParams::validate() const {
  if (d != 2 && d != 3) throw std::invalid_argument("dimension must be 2 or 3");
  if (ell < 1) throw std::invalid_argument("polynomial degree must be >= 1");
  if (m % 2 != 1) throw std::invalid_argument("PHS exponent must be odd");
  if (M != (int)binomial(ell + d, d)) throw std::invalid_argument("M != binom(ell+d, d)");
  if (M > n / 2) throw std::invalid_argument("stability requires M <= floor(n/2)");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must be in (0, 1]");
}

RbfFdParams params_for_degree(int ell, int d, ScalingLaw law) {
  RbfFdParams p;
  p.d = d;
  p.ell = ell;
  p.law = law;
  p.m = phs_exponent(ell, law);
  p.M = (int)binomial(ell + d, d);
  p.n = 2 * p.M + (int)std::floor(std::log(2.0 * p.M));
  p.delta = delta_heuristic(ell);
  p.validate();
  return p;
}

RbfFdParams select_params(int xi, int theta, int d, ScalingLaw law) {
  if (xi < 1) throw std::invalid_argument("desired order must be >= 1");
  if (theta != 1 && theta != 2) throw std::invalid_argument("operator order must be 1 or 2");
  RbfFdParams p = params_for_degree(xi + theta - 1, d, law);
  p.xi = xi;
  p.theta = theta;
  return p;
}

OperatorTag OperatorTag::deriv(int axis) {
  switch (axis) {
    case 0: return {Dx, 1};
    case 1: return {Dy, 1};
    case 2: return {Dz, 1};
  }
  throw std::invalid_argument("derivative axis must be 0, 1, or 2");
}

int OperatorTag::diff_order() const {
  switch (kind) {
    case Dx: case Dy: case Dz: return 1;
    case Laplacian: return 2;
    case LaplacianPower: return 2 * power;
    case Eval: return 0;
  }
  return 0;
}

std::string OperatorTag::name() const {
  switch (kind) {
    case Dx: return "gx";
    case Dy: return "gy";
    case Dz: return "gz";
    case Laplacian: return "lap";
    case LaplacianPower: return "lap^" + std::to_string(power);
    case Eval: return "eval";
  }
  return "?";
}

Stencil build_stencil(const NodeSet& nodes, const KdTree& tree, int center, int n, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must be in (0, 1]");
  Stencil s;
  s.center = center;
  s.neighbors = tree.nearest(nodes.points[center], n);
  // nearest() sorts ascending, so neighbors[0] is the center itself
  if (s.neighbors[0] != center)
    throw std::runtime_error("stencil center is not its own nearest neighbor (duplicate points?)");
  s.rho = std::sqrt(dist2(nodes.points[center], nodes.points[s.neighbors.back()]));
  s.r_retain = (1.0 - delta) * s.rho;
  for (int idx : s.neighbors) {
    if (std::sqrt(dist2(nodes.points[center], nodes.points[idx])) <= s.r_retain ||
        idx == center)
      s.retained.push_back(idx);
  }
  return s;
}

std::vector<std::array<int, 3>> monomial_exponents(int ell, int d) {
  std::vector<std::array<int, 3>> out;
  for (int deg = 0; deg <= ell; ++deg) {
    if (d == 2) {
      for (int i = deg; i >= 0; --i) out.push_back({i, deg - i, 0});
    } else {
      for (int i = deg; i >= 0; --i)
        for (int j = deg - i; j >= 0; --j) out.push_back({i, j, deg - i - j});
    }
  }
  return out;
}

namespace {

// polynomial as list of (coefficient, exponents); used to apply the Laplacian
// symbolically to monomials
struct PolyTerm {
  double coef;
  std::array<int, 3> e;
};

std::vector<PolyTerm> apply_laplacian(const std::vector<PolyTerm>& terms, int d) {
  std::vector<PolyTerm> out;
  for (const auto& t : terms)
    for (int s = 0; s < d; ++s)
      if (t.e[s] >= 2) {
        PolyTerm nt = t;
        nt.coef *= t.e[s] * (t.e[s] - 1);
        nt.e[s] -= 2;
        out.push_back(nt);
      }
  return out;
}

double eval_terms(const std::vector<PolyTerm>& terms, const double* y) {
  double v = 0.0;
  for (const auto& t : terms) {
    double m = t.coef;
    for (int s = 0; s < 3; ++s)
      for (int r = 0; r < t.e[s]; ++r) m *= y[s];
    v += m;
  }
  return v;
}

// L psi evaluated at y for a single monomial
double monomial_op(const std::array<int, 3>& e, const double* y, OperatorTag op, int d) {
  switch (op.kind) {
    case OperatorTag::Eval:
      return eval_terms({{1.0, e}}, y);
    case OperatorTag::Dx:
    case OperatorTag::Dy:
    case OperatorTag::Dz: {
      const int axis = op.kind == OperatorTag::Dx ? 0 : op.kind == OperatorTag::Dy ? 1 : 2;
      if (e[axis] == 0) return 0.0;
      auto de = e;
      de[axis] -= 1;
      return e[axis] * eval_terms({{1.0, de}}, y);
    }
    case OperatorTag::Laplacian:
    case OperatorTag::LaplacianPower: {
      std::vector<PolyTerm> terms{{1.0, e}};
      const int k = op.kind == OperatorTag::Laplacian ? 1 : op.power;
      for (int i = 0; i < k && !terms.empty(); ++i) terms = apply_laplacian(terms, d);
      return terms.empty() ? 0.0 : eval_terms(terms, y);
    }
  }
  return 0.0;
}

// L phi(||y - x||) for phi(r) = r^m, differentiated at the evaluation point y
double phs_op(const double* y, const double* x, int m, OperatorTag op, int d) {
  double r2 = 0.0;
  for (int s = 0; s < d; ++s) r2 += (y[s] - x[s]) * (y[s] - x[s]);
  const double r = std::sqrt(r2);
  switch (op.kind) {
    case OperatorTag::Eval:
      return std::pow(r, m);
    case OperatorTag::Dx:
    case OperatorTag::Dy:
    case OperatorTag::Dz: {
      const int axis = op.kind == OperatorTag::Dx ? 0 : op.kind == OperatorTag::Dy ? 1 : 2;
      // m r^(m-2) (y_axis - x_axis); smooth at r = 0 for m >= 3
      return r2 == 0.0 ? 0.0 : m * std::pow(r, m - 2) * (y[axis] - x[axis]);
    }
    case OperatorTag::Laplacian:
      // Delta r^m = m (m + d - 2) r^(m-2)
      return m * (m + d - 2) * std::pow(r, m - 2);
    case OperatorTag::LaplacianPower: {
      const int k = op.power;
      if (m != 2 * k + 1)
        throw std::invalid_argument("Laplacian power requires the PHS exponent 2k+1");
      double c = 1.0;
      for (int i = 0; i < k; ++i) c *= (2 * k + 1 - 2 * i) * (2 * k + d - 1 - 2 * i);
      return c * r;
    }
  }
  return 0.0;
}

// shared saddle solve: returns the (n+M) x p solution block
void solve_saddle(const NodeSet& nodes, const std::vector<int>& neighbors,
                  const std::vector<std::array<double, 3>>& eval_pts, OperatorTag op,
                  const RbfFdParams& params, int center_for_error, Eigen::MatrixXd& W,
                  Eigen::MatrixXd& lagrange) {
  const int n = (int)neighbors.size();
  const int M = params.M;
  const int d = params.d;
  const int p = (int)eval_pts.size();
  const auto exps = monomial_exponents(params.ell, d);
  if ((int)exps.size() != M) throw std::logic_error("monomial count mismatch");

  // shift to the first evaluation point’s center? No: shift to neighbors[0]
  // (the stencil center) and scale by the stencil width.
  const Point& c = nodes.points[neighbors[0]];
  double rho2 = 0.0;
  for (int j = 0; j < n; ++j) rho2 = std::max(rho2, dist2(c, nodes.points[neighbors[j]]));
  const double rho = std::sqrt(rho2);
  if (rho <= 0.0) throw std::runtime_error("degenerate stencil: zero width");

  std::vector<std::array<double, 3>> local(n);
  for (int j = 0; j < n; ++j) {
    const Point& x = nodes.points[neighbors[j]];
    local[j] = {(x[0] - c[0]) / rho, (x[1] - c[1]) / rho, (x[2] - c[2]) / rho};
    for (int i = 0; i < j; ++i) {
      double dd = 0.0;
      for (int s = 0; s < d; ++s) dd += (local[j][s] - local[i][s]) * (local[j][s] - local[i][s]);
      if (dd == 0.0)
        throw std::runtime_error("duplicate nodes in stencil at node " +
                                 std::to_string(center_for_error));
    }
  }
  std::vector<std::array<double, 3>> yloc(p);
  for (int j = 0; j < p; ++j)
    yloc[j] = {(eval_pts[j][0] - c[0]) / rho, (eval_pts[j][1] - c[1]) / rho,
               (eval_pts[j][2] - c[2]) / rho};

  const int size = n + M;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (int s = 0; s < d; ++s) r2 += (local[i][s] - local[j][s]) * (local[i][s] - local[j][s]);
      const double v = std::pow(std::sqrt(r2), params.m);
      A(i, j) = v;
      A(j, i) = v;
    }
    for (int q = 0; q < M; ++q) {
      const double v = monomial_op(exps[q], local[i].data(), OperatorTag::eval(), d);
      A(i, n + q) = v;
      A(n + q, i) = v;
    }
  }

  Eigen::MatrixXd B(size, p);
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < n; ++i)
      B(i, j) = phs_op(yloc[j].data(), local[i].data(), params.m, op, d);
    for (int q = 0; q < M; ++q) B(n + q, j) = monomial_op(exps[q], yloc[j].data(), op, d);
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rcond = lu.rcond();
  if (!(rcond > 100.0 * std::numeric_limits<double>::epsilon()))
    throw std::runtime_error("singular saddle system for stencil at node " +
                             std::to_string(center_for_error) +
                             " (rcond=" + std::to_string(rcond) + ")");
  Eigen::MatrixXd sol = lu.solve(B);

  // undo the coordinate scaling: operator of order theta picks up rho^(-theta)
  const double unscale = std::pow(rho, -op.diff_order());
  W = sol.topRows(n) * unscale;
  lagrange = sol.bottomRows(M);
}

}  // namespace

WeightBlock stencil_weights(const NodeSet& nodes, const Stencil& stencil, OperatorTag op,
                            const RbfFdParams& params) {
  params.validate();
  std::vector<std::array<double, 3>> evals;
  evals.reserve(stencil.retained.size());
  for (int idx : stencil.retained) evals.push_back(nodes.points[idx]);
  WeightBlock wb;
  solve_saddle(nodes, stencil.neighbors, evals, op, params, stencil.center, wb.W, wb.lagrange);
  return wb;
}

Eigen::VectorXd point_weights(const NodeSet& nodes, const std::vector<int>& neighbors,
                              const Point& where, OperatorTag op, const RbfFdParams& params) {
  params.validate();
  Eigen::MatrixXd W, lagrange;
  solve_saddle(nodes, neighbors, {where}, op, params, neighbors.empty() ? -1 : neighbors[0], W,
               lagrange);
  return W.col(0);
}

SpMat DiffOp::non_ghost_block() const {
  const int m = part.non_ghost();
  SpMat out(m, m);
  std::vector<Eigen::Triplet<double>> tr;
  tr.reserve(L.nonZeros());
  for (int i = 0; i < m; ++i)
    for (SpMat::InnerIterator it(L, i); it; ++it)
      if (it.col() < m) tr.emplace_back(i, (int)it.col(), it.value());
  out.setFromTriplets(tr.begin(), tr.end());
  return out;
}

DiffOp assemble(const NodeSet& nodes, OperatorTag op, const RbfFdParams& params,
                const KdTree* tree, bool include_ghost_neighbors) {
  params.validate();
  const int N = nodes.size();
  const int n_rows = nodes.part.non_ghost();
  const int pool = include_ghost_neighbors ? N : n_rows;
  if (params.n > pool) throw std::invalid_argument("stencil size exceeds node count");

  KdTree local;
  if (!tree || (!include_ghost_neighbors && tree->size() != pool)) {
    local = KdTree(nodes.points, nodes.d, pool);
    tree = &local;
  }

  // pass 1: claim sweep in node order (rows only exist for non-ghost nodes)
  struct Job {
    std::vector<int> neighbors;
    std::vector<int> rows;  // newly claimed retained nodes
  };
  std::vector<Job> jobs;
  std::vector<char> claimed(n_rows, 0);
  for (int k = 0; k < n_rows; ++k) {
    if (claimed[k]) continue;
    Stencil s = build_stencil(nodes, *tree, k, params.n, params.delta);
    Job job;
    job.neighbors = std::move(s.neighbors);
    for (int idx : s.retained)
      if (idx < n_rows && !claimed[idx]) {
        claimed[idx] = 1;
        job.rows.push_back(idx);
      }
    jobs.push_back(std::move(job));
  }

  // pass 2: weight solves, independent across stencils
  std::vector<Eigen::MatrixXd> blocks(jobs.size());
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < (int)jobs.size(); ++j) {
    try {
      std::vector<std::array<double, 3>> evals;
      evals.reserve(jobs[j].rows.size());
      for (int idx : jobs[j].rows) evals.push_back(nodes.points[idx]);
      Eigen::MatrixXd lagrange;
      solve_saddle(nodes, jobs[j].neighbors, evals, op, params, jobs[j].neighbors[0], blocks[j],
                   lagrange);
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw std::runtime_error("assembly failed: " + failure);

  // pass 3: scatter rows
  std::vector<Eigen::Triplet<double>> tr;
  tr.reserve(jobs.size() * params.n * 2);
  for (size_t j = 0; j < jobs.size(); ++j) {
    const auto& job = jobs[j];
    for (size_t i = 0; i < job.rows.size(); ++i)
      for (size_t q = 0; q < job.neighbors.size(); ++q)
        tr.emplace_back(job.rows[i], job.neighbors[q], blocks[j](q, i));
  }

  DiffOp out;
  out.L = SpMat(N, N);
  out.L.setFromTriplets(tr.begin(), tr.end());
  out.op = op;
  out.params = params;
  out.part = nodes.part;
  out.n_stencils = (int)jobs.size();
  return out;
}

std::vector<LebesgueRow> lebesgue_map(const DiffOp& op) {
  const int n_rows = op.part.non_ghost();
  std::vector<LebesgueRow> out(n_rows);
  for (int i = 0; i < n_rows; ++i) {
    LebesgueRow row;
    for (SpMat::InnerIterator it(op.L, i); it; ++it) {
      row.lambda += std::abs(it.value());
      if (it.col() == i) row.w_self = it.value();
    }
    row.diag_ok = 2.0 * row.w_self >= -row.lambda;
    out[i] = row;
  }
  return out;
}

void save_matrix_market(const SpMat& A, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "%%MatrixMarket matrix coordinate real general\n";
  f << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  char buf[96];
  for (int i = 0; i < A.outerSize(); ++i)
    for (SpMat::InnerIterator it(A, i); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", (long)it.row() + 1, (long)it.col() + 1,
                    it.value());
      f << buf;
    }
}

}  // namespace mfad
