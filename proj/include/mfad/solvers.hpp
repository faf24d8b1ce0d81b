// Sparse linear-algebra workhorses: Arnoldi Ritz-value estimation, ILU(0),
// and restarted GMRES with right preconditioning.
#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <cstdint>
#include <vector>

#include "mfad/rbffd.hpp"

namespace mfad {

// Largest real part over the Ritz values of a Krylov space of the given
// dimension, clamped at zero. Random start vector; breakdown restarts with a
// fresh vector (at most 3 times).
double arnoldi_max_real(const SpMat& A, int krylov_dim, uint64_t seed);

struct Preconditioner {
  virtual ~Preconditioner() = default;
  virtual Eigen::VectorXd solve(const Eigen::VectorXd& b) const = 0;
};

// ILU(0): incomplete LU on the sparsity pattern of A. A must have a nonzero
// diagonal and sorted inner indices (Eigen guarantees the latter).
class Ilu0 : public Preconditioner {
 public:
  Ilu0() = default;
  explicit Ilu0(const SpMat& A);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const override;
  bool valid() const { return valid_; }

 private:
  SpMat lu_;
  std::vector<int> diag_;
  bool valid_ = false;
};

// Threshold ILU with controlled fill; the fallback when the zero-fill pattern
// is too weak (high-order hyperviscosity rows).
class IluT : public Preconditioner {
 public:
  IluT() = default;
  explicit IluT(const SpMat& A, double droptol = 1e-4, int fillfactor = 20);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const override;

 private:
  Eigen::IncompleteLUT<double> ilut_;
};

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  // relative to ||b||
  bool converged = false;
  std::vector<double> history;  // relative residual per iteration
};

// Right-preconditioned restarted GMRES; preconditioner may be null (identity).
GmresResult gmres(const SpMat& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
                  const Preconditioner* precond, int restart, int max_iters, double tol);

}  // namespace mfad
