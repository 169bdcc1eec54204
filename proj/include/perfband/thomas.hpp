#pragma once

// Thomas-type invertibility certificate at the complex quasimomentum k = (alpha + i beta) e_1.
//
// On zero-extended grid functions L(k) - V splits as A + B with A symmetric and B
// skew-symmetric Fourier multipliers, so ||(A+B)u||^2 = ||Au||^2 + ||Bu||^2 >= ||Bu||^2 and
// |b(m1)| = 2 beta |alpha - 2 pi m1| >= 2 beta pi at alpha = pi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "perfband/eigensolver.hpp"
#include "perfband/grid.hpp"
#include "perfband/multipliers.hpp"

namespace perfband {

struct ThomasCertificate {
  double C = 0.0;
  double alpha = std::numbers::pi;
  double beta = 0.0;
  double sigma_min_B = 0.0;
  double floor = 0.0;  // 2 beta pi
  double operator_bound = 0.0;
  bool pass = false;
  int n = 0;
  std::string hole;
};

inline double auto_beta(double C) { return C / 6.0 * 1.2; }

namespace detail {

inline void check_thomas_inputs(double C, double beta) {
  if (!(C > 0.0)) throw std::invalid_argument("Thomas certificate needs C > 0");
  if (!(beta > C / 6.0)) throw std::invalid_argument("Thomas certificate needs beta > C/6");
}

}  // namespace detail

// Smallest singular value of B restricted to grid functions vanishing on DIRICHLET nodes.
// B acts along x1 only, so the projected B*B splits into one circulant block per grid row.
inline double sigma_min_B(const TorusGrid& grid, double alpha, double beta) {
  const int n = grid.n();
  Eigen::VectorXcd symbol2(n);
  const Eigen::VectorXcd symbol = fourier::symbol_B(n, alpha, beta);
  for (int j = 0; j < n; ++j) symbol2(j) = std::norm(symbol(j));
  // kernel(d) = (1/n) sum_m |b(m)|^2 exp(2 pi i m d / n)
  Eigen::VectorXcd kernel(n);
  {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> in(symbol2.data(), symbol2.data() + n), out(n);
    fft.inv(out, in);
    for (int d = 0; d < n; ++d) kernel(d) = out[d];
  }
  double smallest = std::numeric_limits<double>::infinity();
  std::vector<int> cols;
  for (int i2 = 0; i2 < n; ++i2) {
    cols.clear();
    for (int i1 = 0; i1 < n; ++i1) {
      if (!grid.is_dirichlet(grid.node(i1, i2))) cols.push_back(i1);
    }
    if (cols.empty()) continue;
    const Eigen::Index m = Eigen::Index(cols.size());
    Eigen::MatrixXcd block(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) block(a, b) = kernel(((cols[a] - cols[b]) % n + n) % n);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block, Eigen::EigenvaluesOnly);
    smallest = std::min(smallest, es.eigenvalues()(0));
  }
  return std::sqrt(std::max(smallest, 0.0));
}

// Smallest singular value of A + B on the same subspace. With G = (A+B)^*(A+B), the Fourier
// multiplier a^2 + |b|^2, the projected G_ff is inverted through its Schur complement
//   G_ff^{-1} = H_ff - H_fh H_hh^{-1} H_hf,   H = G^{-1},
// which needs only a dense factorization over the DIRICHLET nodes; the largest eigenvalue of
// G_ff^{-1} then comes from LOBPCG.
inline double thomas_operator_bound(const TorusGrid& grid, double C, double beta, double alpha = std::numbers::pi,
                                    double tol = 1e-10, int max_iters = 500) {
  detail::check_thomas_inputs(C, beta);
  const int n = grid.n();
  const Eigen::VectorXd a = fourier::symbol_A(grid.lattice(), n, alpha, beta);
  const Eigen::VectorXcd b = fourier::symbol_B(n, alpha, beta);
  Eigen::VectorXcd inv_mu2(a.size());
  for (int j2 = 0; j2 < n; ++j2) {
    for (int j1 = 0; j1 < n; ++j1) {
      const int idx = j1 + n * j2;
      inv_mu2(idx) = 1.0 / (a(idx) * a(idx) + std::norm(b(j1)));
    }
  }
  auto apply_H = [&](const Eigen::VectorXcd& full) {
    return fourier::inverse2(fourier::forward2(full, n).cwiseProduct(inv_mu2), n);
  };

  std::vector<int> hole_nodes;
  for (int v = 0; v < int(grid.node_count()); ++v) {
    if (grid.is_dirichlet(v)) hole_nodes.push_back(v);
  }
  const Eigen::Index nh = Eigen::Index(hole_nodes.size());
  // H is a convolution: H(x, y) = kernel(x - y).
  const Eigen::VectorXcd kernel = fourier::inverse2(inv_mu2, n);
  Eigen::MatrixXcd Hhh(nh, nh);
  for (Eigen::Index p = 0; p < nh; ++p) {
    for (Eigen::Index q = 0; q < nh; ++q) {
      const int d1 = ((hole_nodes[p] % n) - (hole_nodes[q] % n) + n) % n;
      const int d2 = ((hole_nodes[p] / n) - (hole_nodes[q] / n) + n) % n;
      Hhh(p, q) = kernel(d1 + n * d2);
    }
  }
  const Eigen::LDLT<Eigen::MatrixXcd> Hhh_factor(Hhh);

  auto apply_T = [&](const Eigen::VectorXcd& y) -> Eigen::VectorXcd {
    const Eigen::VectorXcd z = apply_H(grid.zero_extend(y));
    Eigen::VectorXcd out = grid.restrict_to_free(z);
    if (nh == 0) return out;
    Eigen::VectorXcd zh(nh);
    for (Eigen::Index p = 0; p < nh; ++p) zh(p) = z(hole_nodes[p]);
    const Eigen::VectorXcd w = Hhh_factor.solve(zh);
    Eigen::VectorXcd wf = Eigen::VectorXcd::Zero(Eigen::Index(grid.node_count()));
    for (Eigen::Index p = 0; p < nh; ++p) wf(hole_nodes[p]) = w(p);
    out -= grid.restrict_to_free(apply_H(wf));
    return out;
  };
  auto apply = [&](const Eigen::MatrixXcd& X) -> Eigen::MatrixXcd {
    Eigen::MatrixXcd Y(X.rows(), X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) Y.col(c) = -apply_T(X.col(c));
    return Y;
  };
  auto identity = [](const Eigen::MatrixXcd& R) -> Eigen::MatrixXcd { return R; };
  auto relative = [](const Eigen::VectorXcd& x, const Eigen::VectorXcd& r, double lambda) {
    return r.norm() / (x.norm() * std::abs(lambda));
  };
  const Eigen::Index free = Eigen::Index(grid.free_count());
  const Eigen::Index block = std::min<Eigen::Index>(free, 8);
  const auto res = lobpcg(apply, identity, relative, detail::start_block(free, block), 1, tol, max_iters);
  if (!res.converged) {
    throw ConvergenceFailure("operator bound eigensolver did not converge", res.residuals, res.iterations);
  }
  return std::sqrt(-1.0 / res.values(0));
}

inline ThomasCertificate thomas_certificate(const TorusGrid& grid, double C, std::optional<double> beta = std::nullopt) {
  ThomasCertificate cert;
  cert.C = C;
  cert.alpha = std::numbers::pi;
  cert.beta = beta.value_or(auto_beta(C));
  detail::check_thomas_inputs(C, cert.beta);
  cert.floor = 2.0 * cert.beta * std::numbers::pi;
  cert.sigma_min_B = sigma_min_B(grid, cert.alpha, cert.beta);
  cert.operator_bound = thomas_operator_bound(grid, C, cert.beta, cert.alpha);
  cert.pass = cert.sigma_min_B >= cert.floor * (1.0 - 1e-8) && cert.floor > C;
  cert.n = grid.n();
  cert.hole = grid.describe_hole();
  return cert;
}

// |‖(A+B)u‖² − ‖Au‖² − ‖Bu‖²| / (‖Au‖² + ‖Bu‖²) for u on FREE nodes.
inline double pythagoras_defect(const TorusGrid& grid, const Eigen::VectorXcd& u, double alpha, double beta) {
  const Eigen::VectorXcd Au = apply_multiplier_A(grid, u, alpha, beta);
  const Eigen::VectorXcd Bu = apply_multiplier_B(grid, u, alpha, beta);
  const double a2 = Au.squaredNorm(), b2 = Bu.squaredNorm();
  return std::abs((Au + Bu).squaredNorm() - a2 - b2) / (a2 + b2);
}

}  // namespace perfband
