#include "mfad/solvers.hpp"

#include <cmath>
#include <stdexcept>

#include "mfad/util.hpp"

namespace mfad {

double arnoldi_max_real(const SpMat& A, int krylov_dim, uint64_t seed) {
  if (krylov_dim < 2) throw std::invalid_argument("Krylov dimension must be >= 2");
  const int N = (int)A.rows();
  if (A.cols() != N) throw std::invalid_argument("operator must be square");
  const int m = std::min(krylov_dim, N);

  for (int restart = 0; restart < 4; ++restart) {
    Rng rng(seed + 1315423911ULL * restart);
    Eigen::VectorXd v(N);
    for (int i = 0; i < N; ++i) v[i] = rng.uniform(-1.0, 1.0);
    v.normalize();

    Eigen::MatrixXd V(N, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    V.col(0) = v;
    int built = 0;
    bool breakdown = false;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd w = A * V.col(j);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      built = j + 1;
      if (H(j + 1, j) < 1e-14) { breakdown = true; break; }
      V.col(j + 1) = w / H(j + 1, j);
    }
    if (breakdown && built < std::min(m, 5) && restart < 3) continue;  // retry with a new vector

    Eigen::MatrixXd Hm = H.topLeftCorner(built, built);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Hm, false);
    const double max_re = es.eigenvalues().real().maxCoeff();
    return std::max(0.0, max_re);
  }
  throw std::runtime_error("Arnoldi iteration broke down repeatedly");
}

Ilu0::Ilu0(const SpMat& A) {
  const int N = (int)A.rows();
  lu_ = A;
  lu_.makeCompressed();
  diag_.assign(N, -1);
  const int* outer = lu_.outerIndexPtr();
  const int* inner = lu_.innerIndexPtr();
  double* val = lu_.valuePtr();

  for (int i = 0; i < N; ++i)
    for (int q = outer[i]; q < outer[i + 1]; ++q)
      if (inner[q] == i) { diag_[i] = q; break; }
  for (int i = 0; i < N; ++i)
    if (diag_[i] < 0) throw std::runtime_error("ILU(0): missing diagonal entry");

  // IKJ variant restricted to the original pattern
  std::vector<int> pos(N, -1);
  for (int i = 0; i < N; ++i) {
    for (int q = outer[i]; q < outer[i + 1]; ++q) pos[inner[q]] = q;
    for (int q = outer[i]; q < outer[i + 1] && inner[q] < i; ++q) {
      const int k = inner[q];
      const double pivot = val[diag_[k]];
      if (pivot == 0.0) throw std::runtime_error("ILU(0): zero pivot");
      const double lik = val[q] / pivot;
      val[q] = lik;
      for (int r = diag_[k] + 1; r < outer[k + 1]; ++r) {
        const int j = inner[r];
        if (pos[j] >= 0) val[pos[j]] -= lik * val[r];
      }
    }
    for (int q = outer[i]; q < outer[i + 1]; ++q) pos[inner[q]] = -1;
    if (val[diag_[i]] == 0.0) throw std::runtime_error("ILU(0): zero pivot");
  }
  valid_ = true;
}

Eigen::VectorXd Ilu0::solve(const Eigen::VectorXd& b) const {
  const int N = (int)lu_.rows();
  const int* outer = lu_.outerIndexPtr();
  const int* inner = lu_.innerIndexPtr();
  const double* val = lu_.valuePtr();
  Eigen::VectorXd y(N);
  for (int i = 0; i < N; ++i) {  // L y = b, unit diagonal
    double s = b[i];
    for (int q = outer[i]; q < diag_[i]; ++q) s -= val[q] * y[inner[q]];
    y[i] = s;
  }
  Eigen::VectorXd x(N);
  for (int i = N - 1; i >= 0; --i) {  // U x = y
    double s = y[i];
    for (int q = diag_[i] + 1; q < outer[i + 1]; ++q) s -= val[q] * x[inner[q]];
    x[i] = s / val[diag_[i]];
  }
  return x;
}

IluT::IluT(const SpMat& A, double droptol, int fillfactor) {
  ilut_.setDroptol(droptol);
  ilut_.setFillfactor(fillfactor);
  Eigen::SparseMatrix<double> col = A;
  ilut_.compute(col);
  if (ilut_.info() != Eigen::Success) throw std::runtime_error("threshold ILU factorization failed");
}

Eigen::VectorXd IluT::solve(const Eigen::VectorXd& b) const { return ilut_.solve(b); }

GmresResult gmres(const SpMat& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
                  const Preconditioner* precond, int restart, int max_iters, double tol) {
  const int N = (int)A.rows();
  GmresResult out;
  out.x = x0.size() == N ? x0 : Eigen::VectorXd::Zero(N);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x.setZero();
    out.converged = true;
    return out;
  }

  auto apply_m = [&](const Eigen::VectorXd& v) {
    return precond ? precond->solve(v) : v;
  };

  Eigen::MatrixXd V(N, restart + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
  Eigen::VectorXd cs(restart), sn(restart), g(restart + 1);

  while (out.iterations < max_iters) {
    Eigen::VectorXd r = b - A * out.x;
    double beta = r.norm();
    out.residual = beta / bnorm;
    if (out.residual <= tol) { out.converged = true; return out; }
    V.col(0) = r / beta;
    g.setZero();
    g[0] = beta;

    int j = 0;
    for (; j < restart && out.iterations < max_iters; ++j) {
      Eigen::VectorXd w = A * apply_m(V.col(j));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      const double subdiag = w.norm();
      H(j + 1, j) = subdiag;
      if (subdiag > 0.0) V.col(j + 1) = w / subdiag;

      for (int i = 0; i < j; ++i) {  // apply stored Givens rotations
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = denom == 0.0 ? 1.0 : H(j, j) / denom;
      sn[j] = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];

      ++out.iterations;
      out.residual = std::abs(g[j + 1]) / bnorm;
      out.history.push_back(out.residual);
      if (out.residual <= tol || subdiag == 0.0) { ++j; break; }
    }

    // solve the small triangular system and update x
    Eigen::VectorXd ym(j);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int q = i + 1; q < j; ++q) s -= H(i, q) * ym[q];
      ym[i] = s / H(i, i);
    }
    Eigen::VectorXd z = V.leftCols(j) * ym;
    out.x += apply_m(z);
    if (out.residual <= tol) {
      // confirm with the true residual (right preconditioning keeps these close)
      out.residual = (b - A * out.x).norm() / bnorm;
      if (out.residual <= 10 * tol) { out.converged = true; return out; }
    }
  }
  out.residual = (b - A * out.x).norm() / bnorm;
  out.converged = out.residual <= tol;
  return out;
}

}  // namespace mfad
