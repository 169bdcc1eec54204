#pragma once

// Lowest eigenpairs of the Hermitian pencil (S, M) with M diagonal positive.
//
// Dense path: scale to C = M^{-1/2} S M^{-1/2} and call LAPACK zheevr for the lowest
// eigenvalues. Iterative path: LOBPCG on C, preconditioned by a sparse Cholesky
// factorization of C - sigma I with sigma below the Gershgorin bound.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <lapacke.h>

#include "perfband/assembly.hpp"
#include "perfband/errors.hpp"

namespace perfband {

struct SolverOptions {
  std::size_t dense_threshold = 400;
  int max_iters = 500;
  double tol = 1e-10;  // on ||S v - lambda M v|| / ||M v||
};

struct EigenResult {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;  // M-orthonormal columns
  std::vector<double> residuals;
  bool dense = true;
  int iterations = 0;
};

// ||S v - lambda M v|| / ||M v||.
inline double pencil_residual(const SparseComplex& S, const Eigen::VectorXd& mass_diagonal,
                              double lambda, const Eigen::VectorXcd& v) {
  const Eigen::VectorXcd Mv = mass_diagonal.cwiseProduct(v);
  const Eigen::VectorXcd r = S * v - lambda * Mv;
  return r.norm() / Mv.norm();
}

namespace detail {

// Deterministic start block, independent of the standard library's distributions.
inline Eigen::MatrixXcd start_block(Eigen::Index n, Eigen::Index m, std::uint32_t seed = 20240611u) {
  std::mt19937 gen(seed);
  auto uniform = [&gen] { return double(gen()) / 4294967296.0 - 0.5; };
  Eigen::MatrixXcd X(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double re = uniform();
      X(i, j) = Complex(re, uniform());
    }
  }
  return X;
}

// Orthonormalizes V against the orthonormal columns of Q and then internally, dropping
// numerically dependent directions (scaled SVQB).
inline Eigen::MatrixXcd orthonormalize_against(const Eigen::MatrixXcd& Q, Eigen::MatrixXcd V) {
  for (int pass = 0; pass < 2; ++pass) {
    if (Q.cols() > 0 && V.cols() > 0) V -= Q * (Q.adjoint() * V);
    if (V.cols() == 0) return V;
    const Eigen::VectorXd norms = V.colwise().norm();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
      if (norms(j) > 0.0 && std::isfinite(norms(j))) keep.push_back(j);
    }
    Eigen::MatrixXcd W(V.rows(), Eigen::Index(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) W.col(j) = V.col(keep[j]) / norms(keep[j]);
    if (W.cols() == 0) return W;
    Eigen::MatrixXcd G = W.adjoint() * W;
    G = 0.5 * (G + G.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
    const double top = es.eigenvalues().maxCoeff();
    std::vector<Eigen::Index> good;
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      if (es.eigenvalues()(j) > 1e-13 * top) good.push_back(j);
    }
    Eigen::MatrixXcd T(G.cols(), Eigen::Index(good.size()));
    for (std::size_t j = 0; j < good.size(); ++j) {
      T.col(j) = es.eigenvectors().col(good[j]) / std::sqrt(es.eigenvalues()(good[j]));
    }
    V = W * T;
  }
  return V;
}

inline Eigen::MatrixXcd hstack(std::initializer_list<const Eigen::MatrixXcd*> blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto* b : blocks) {
    if (b->cols() == 0) continue;
    rows = b->rows();
    cols += b->cols();
  }
  Eigen::MatrixXcd out(rows, cols);
  Eigen::Index c = 0;
  for (const auto* b : blocks) {
    if (b->cols() == 0) continue;
    out.middleCols(c, b->cols()) = *b;
    c += b->cols();
  }
  return out;
}

}  // namespace detail

struct LobpcgResult {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;  // orthonormal
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
};

// Block LOBPCG for the lowest `nev` eigenpairs of a Hermitian operator.
//   apply(X)        -> A X
//   precondition(R) -> T R  (Hermitian positive definite)
//   measure(x, r, lambda) -> residual figure compared against `tol`
inline LobpcgResult lobpcg(const std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd&)>& apply,
                           const std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd&)>& precondition,
                           const std::function<double(const Eigen::VectorXcd&, const Eigen::VectorXcd&, double)>& measure,
                           Eigen::MatrixXcd X, Eigen::Index nev, double tol, int max_iters) {
  using Mat = Eigen::MatrixXcd;
  LobpcgResult out;
  const Mat empty(X.rows(), 0);
  X = detail::orthonormalize_against(empty, X);
  const Eigen::Index m = X.cols();
  if (m < nev) throw std::invalid_argument("lobpcg: start block is rank deficient");

  auto rayleigh_ritz = [&](const Mat& S, const Mat& AS, Mat& coeffs, Eigen::VectorXd& theta) {
    Mat H = S.adjoint() * AS;
    H = 0.5 * (H + H.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    coeffs = es.eigenvectors().leftCols(m);
    theta = es.eigenvalues().head(m);
  };

  Mat AX = apply(X);
  Mat C;
  Eigen::VectorXd theta;
  rayleigh_ritz(X, AX, C, theta);
  X = X * C;
  AX = apply(X);

  Mat P = empty;
  std::vector<double> res(m, INFINITY);
  for (int it = 0; it <= max_iters; ++it) {
    Mat R = AX - X * theta.asDiagonal();
    std::vector<Eigen::Index> active;
    bool done = true;
    for (Eigen::Index j = 0; j < m; ++j) {
      res[j] = measure(X.col(j), R.col(j), theta(j));
      if (res[j] > tol) {
        active.push_back(j);
        if (j < nev) done = false;
      }
    }
    out.iterations = it;
    if (done || it == max_iters) {
      out.converged = done;
      break;
    }
    Mat Ra(X.rows(), Eigen::Index(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) Ra.col(j) = R.col(active[j]);
    Mat W = precondition(Ra);
    W = detail::orthonormalize_against(X, W);
    Mat XW = detail::hstack({&X, &W});
    P = detail::orthonormalize_against(XW, P);

    const Mat S = detail::hstack({&X, &W, &P});
    const Mat AS = apply(S);
    rayleigh_ritz(S, AS, C, theta);
    const Eigen::Index nx = X.cols();
    X = S * C;
    Mat Cp = C;
    Cp.topRows(nx).setZero();
    P = S * Cp;
    AX = apply(X);
  }
  out.values = theta.head(nev);
  out.vectors = X.leftCols(nev);
  out.residuals.assign(res.begin(), res.begin() + nev);
  return out;
}

namespace detail {

inline EigenResult dense_lowest(const SparseComplex& C, const Eigen::VectorXd& inv_sqrt_mass,
                               Eigen::Index nev) {
  const Eigen::Index n = C.rows();
  Eigen::MatrixXcd A = Eigen::MatrixXcd(C);
  lapack_int found = 0;
  Eigen::VectorXd w(n);
  Eigen::MatrixXcd Z(n, nev);
  std::vector<lapack_int> support(2 * std::size_t(nev));
  const lapack_int info = LAPACKE_zheevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', lapack_int(n), reinterpret_cast<lapack_complex_double*>(A.data()),
      lapack_int(n), 0.0, 0.0, 1, lapack_int(nev), 0.0, &found, w.data(),
      reinterpret_cast<lapack_complex_double*>(Z.data()), lapack_int(n), support.data());
  if (info != 0 || found != nev) {
    std::ostringstream msg;
    msg << "dense eigensolver failed (zheevr info=" << info << ", found=" << found << ")";
    throw ConvergenceFailure(msg.str(), {}, 0);
  }
  EigenResult res;
  res.values = w.head(nev);
  res.vectors = inv_sqrt_mass.asDiagonal() * Z;
  res.dense = true;
  return res;
}

// Lower Gershgorin bound of a Hermitian sparse matrix.
inline double gershgorin_lower(const SparseComplex& C) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(C.rows());
  Eigen::VectorXd off = Eigen::VectorXd::Zero(C.rows());
  for (int c = 0; c < C.outerSize(); ++c) {
    for (SparseComplex::InnerIterator it(C, c); it; ++it) {
      if (it.row() == it.col()) {
        diag(it.row()) = it.value().real();
      } else {
        off(it.row()) += std::abs(it.value());
      }
    }
  }
  return (diag - off).minCoeff();
}

}  // namespace detail

// The `nev` smallest eigenvalues of (S, M), ascending, with M-orthonormal eigenvectors.
inline EigenResult eigs_lowest(const BlochOperator& op, Eigen::Index nev, const SolverOptions& opts = {}) {
  if (!op.real_k()) throw std::invalid_argument("eigs_lowest needs a real quasimomentum");
  const Eigen::Index n = op.size();
  if (nev < 1 || nev > n) throw std::invalid_argument("eigs_lowest: n_bands out of range");

  const Eigen::VectorXd mass = op.mass_diagonal();
  const Eigen::VectorXd inv_sqrt = mass.cwiseSqrt().cwiseInverse();
  SparseComplex C = op.stiffness;
  for (int c = 0; c < C.outerSize(); ++c) {
    for (SparseComplex::InnerIterator it(C, c); it; ++it) it.valueRef() *= inv_sqrt(it.row()) * inv_sqrt(it.col());
  }

  const Eigen::Index block = std::min<Eigen::Index>(n, nev + std::max<Eigen::Index>(4, nev));
  EigenResult res;
  if (std::size_t(n) <= opts.dense_threshold || 3 * block >= n) {
    res = detail::dense_lowest(C, inv_sqrt, nev);
  } else {
    const double sigma = detail::gershgorin_lower(C) - 1.0;
    SparseComplex shifted = C;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
    Eigen::SimplicialLLT<SparseComplex, Eigen::Lower, Eigen::AMDOrdering<int>> chol(shifted);
    if (chol.info() != Eigen::Success) {
      throw ConvergenceFailure("shifted Cholesky factorization failed", {}, 0);
    }
    const Eigen::VectorXd sqrt_mass = mass.cwiseSqrt();
    auto apply = [&C](const Eigen::MatrixXcd& X) -> Eigen::MatrixXcd { return C * X; };
    auto precondition = [&chol](const Eigen::MatrixXcd& R) -> Eigen::MatrixXcd { return chol.solve(R); };
    // Residual of the pencil for v = M^{-1/2} z: ||M^{1/2} r|| / ||M^{1/2} z||.
    auto measure = [&sqrt_mass](const Eigen::VectorXcd& z, const Eigen::VectorXcd& r, double) {
      return sqrt_mass.cwiseProduct(r).norm() / sqrt_mass.cwiseProduct(z).norm();
    };
    const auto lob = lobpcg(apply, precondition, measure, detail::start_block(n, block), nev,
                            opts.tol, opts.max_iters);
    if (!lob.converged) {
      std::ostringstream msg;
      msg << "LOBPCG did not converge in " << lob.iterations << " iterations (max residual "
          << *std::max_element(lob.residuals.begin(), lob.residuals.end()) << ")";
      throw ConvergenceFailure(msg.str(), lob.residuals, lob.iterations);
    }
    res.values = lob.values;
    res.vectors = inv_sqrt.asDiagonal() * lob.vectors;
    res.dense = false;
    res.iterations = lob.iterations;
  }
  res.residuals.resize(nev);
  for (Eigen::Index j = 0; j < nev; ++j) {
    res.residuals[j] = pencil_residual(op.stiffness, mass, res.values(j), res.vectors.col(j));
  }
  return res;
}

}  // namespace perfband
