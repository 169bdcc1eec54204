#pragma once

// Exact Fourier multipliers on the full N x N torus grid, applied to zero-extended vectors.
//
//   A: |2 pi m|_G^2 + alpha^2 - beta^2 + 4 pi alpha m1      (real)
//   B: 2 i beta (alpha - 2 pi m1)                            (imaginary, acts along x1 only)
//
// Frequencies are m in {-N/2, ..., N/2 - 1}; |.|_G uses the lattice gram inverse.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "perfband/grid.hpp"

namespace perfband {

namespace fourier {

inline int frequency(int j, int n) { return j < n / 2 ? j : j - n; }

// In-place DFT along x1 (contiguous rows of the node ordering i1 + N*i2).
inline void transform_x1(Eigen::VectorXcd& u, int n, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(n), out(n);
  for (int i2 = 0; i2 < n; ++i2) {
    for (int i1 = 0; i1 < n; ++i1) in[i1] = u(i1 + n * i2);
    if (inverse) fft.inv(out, in); else fft.fwd(out, in);
    for (int i1 = 0; i1 < n; ++i1) u(i1 + n * i2) = out[i1];
  }
}

inline void transform_x2(Eigen::VectorXcd& u, int n, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(n), out(n);
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) in[i2] = u(i1 + n * i2);
    if (inverse) fft.inv(out, in); else fft.fwd(out, in);
    for (int i2 = 0; i2 < n; ++i2) u(i1 + n * i2) = out[i2];
  }
}

inline Eigen::VectorXcd forward2(Eigen::VectorXcd u, int n) {
  transform_x1(u, n, false);
  transform_x2(u, n, false);
  return u;
}

inline Eigen::VectorXcd inverse2(Eigen::VectorXcd u, int n) {
  transform_x1(u, n, true);
  transform_x2(u, n, true);
  return u;
}

inline double multiplier_A(const Lattice2& lattice, int m1, int m2, double alpha, double beta) {
  constexpr double pi = std::numbers::pi;
  const Eigen::Vector2d m(m1, m2);
  return 4.0 * pi * pi * m.dot(lattice.gram_inverse() * m) + alpha * alpha - beta * beta +
         4.0 * pi * alpha * m1;
}

inline std::complex<double> multiplier_B(int m1, double alpha, double beta) {
  return {0.0, 2.0 * beta * (alpha - 2.0 * std::numbers::pi * m1)};
}

// Symbol tables in the node layout (entry j1 + N*j2 belongs to frequency (m(j1), m(j2))).
inline Eigen::VectorXd symbol_A(const Lattice2& lattice, int n, double alpha, double beta) {
  Eigen::VectorXd s(std::size_t(n) * n);
  for (int j2 = 0; j2 < n; ++j2) {
    for (int j1 = 0; j1 < n; ++j1) {
      s(j1 + n * j2) = multiplier_A(lattice, frequency(j1, n), frequency(j2, n), alpha, beta);
    }
  }
  return s;
}

inline Eigen::VectorXcd symbol_B(int n, double alpha, double beta) {
  Eigen::VectorXcd s(n);
  for (int j1 = 0; j1 < n; ++j1) s(j1) = multiplier_B(frequency(j1, n), alpha, beta);
  return s;
}

}  // namespace fourier

// B on a full-grid vector.
inline Eigen::VectorXcd apply_B_full(int n, const Eigen::VectorXcd& full, double alpha, double beta) {
  Eigen::VectorXcd u = full;
  fourier::transform_x1(u, n, false);
  const Eigen::VectorXcd symbol = fourier::symbol_B(n, alpha, beta);
  for (int i2 = 0; i2 < n; ++i2) {
    for (int j1 = 0; j1 < n; ++j1) u(j1 + n * i2) *= symbol(j1);
  }
  fourier::transform_x1(u, n, true);
  return u;
}

// A on a full-grid vector.
inline Eigen::VectorXcd apply_A_full(const Lattice2& lattice, int n, const Eigen::VectorXcd& full,
                                     double alpha, double beta) {
  Eigen::VectorXcd u = fourier::forward2(full, n);
  u = u.cwiseProduct(fourier::symbol_A(lattice, n, alpha, beta).cast<std::complex<double>>());
  return fourier::inverse2(std::move(u), n);
}

// Zero-extends u from FREE nodes and applies B; the result lives on the full grid.
inline Eigen::VectorXcd apply_multiplier_B(const TorusGrid& grid, const Eigen::VectorXcd& u, double alpha,
                                           double beta) {
  return apply_B_full(grid.n(), grid.zero_extend(u), alpha, beta);
}

inline Eigen::VectorXcd apply_multiplier_A(const TorusGrid& grid, const Eigen::VectorXcd& u, double alpha,
                                           double beta) {
  return apply_A_full(grid.lattice(), grid.n(), grid.zero_extend(u), alpha, beta);
}

}  // namespace perfband
