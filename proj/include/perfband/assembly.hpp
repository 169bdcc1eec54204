#pragma once

// Q1 discretization of L(k) = (D + k)^2 + V, D = -i grad, on the perforated torus.
//
// The trial space is Bloch-modulated Q1: node a contributes
//   p_a(x) = exp(-i k.(x - x_a)) phi_a(x),
// with x_a the corner position in the element's unwrapped frame. These are periodic
// functions, so the shifted operator acts on them directly, and the resulting matrices are
// unitarily similar (diag(exp(i k.x_n))) to the Bloch-phase assembly of -Delta + V.
//
// Mass is the row-sum lumped Q1 mass: real, diagonal, independent of k. The potential term is
// lumped with the same weights, so a constant V shifts the spectrum exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "perfband/grid.hpp"
#include "perfband/potential.hpp"

namespace perfband {

using Complex = std::complex<double>;
using Vec2c = Eigen::Vector2cd;
using SparseComplex = Eigen::SparseMatrix<Complex>;
using SparseReal = Eigen::SparseMatrix<double>;

struct BlochOperator {
  SparseComplex stiffness;
  SparseReal mass;  // diagonal
  Vec2c k = Vec2c::Zero();
  Mode mode = Mode::NoHole;
  double t = 0.0;
  int n = 0;

  Eigen::Index size() const { return stiffness.rows(); }
  bool real_k() const { return k.imag().isZero(0.0); }
  Eigen::VectorXd mass_diagonal() const { return mass.diagonal(); }
};

namespace detail {

// 2x2 Gauss points on [0,1].
inline constexpr std::array<double, 2> kGauss{0.21132486540518711775, 0.78867513459481288225};
inline constexpr std::array<std::array<int, 2>, 4> kCorners{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};

struct QuadraturePoint {
  Vec2 frac;                    // unwrapped fractional position
  std::array<double, 4> phi;    // corner basis values
  std::array<Vec2, 4> grad;     // physical gradients of the basis (before pullback)
  double weight;                // physical area weight
};

// Quadrature data of element (i1, i2) on an undeformed lattice grid.
inline std::array<QuadraturePoint, 4> element_quadrature(const TorusGrid& grid, int i1, int i2) {
  const int n = grid.n();
  const Mat2& binv_t = grid.lattice().basis_inverse().transpose();
  const double weight = grid.lattice().cell_area() / (double(n) * n) * 0.25;
  std::array<QuadraturePoint, 4> points;
  int q = 0;
  for (double s2 : kGauss) {
    for (double s1 : kGauss) {
      auto& p = points[q++];
      p.frac = Vec2((i1 + s1) / n, (i2 + s2) / n);
      p.weight = weight;
      for (int a = 0; a < 4; ++a) {
        const auto [da, db] = kCorners[a];
        const double f1 = da ? s1 : 1.0 - s1;
        const double f2 = db ? s2 : 1.0 - s2;
        const double g1 = (da ? 1.0 : -1.0) * n;
        const double g2 = (db ? 1.0 : -1.0) * n;
        p.phi[a] = f1 * f2;
        p.grad[a] = binv_t * Vec2(g1 * f2, f1 * g2);
      }
    }
  }
  return points;
}

struct Triplets {
  std::vector<Eigen::Triplet<Complex>> stiffness;
  std::vector<double> mass_diagonal;
};

inline BlochOperator finish(const TorusGrid& grid, Triplets&& trip, const Vec2c& k) {
  const auto n_free = static_cast<Eigen::Index>(grid.free_count());
  BlochOperator op;
  op.stiffness.resize(n_free, n_free);
  op.stiffness.setFromTriplets(trip.stiffness.begin(), trip.stiffness.end());
  op.stiffness.makeCompressed();
  op.mass.resize(n_free, n_free);
  std::vector<Eigen::Triplet<double>> mass;
  mass.reserve(trip.mass_diagonal.size());
  for (Eigen::Index f = 0; f < n_free; ++f) mass.emplace_back(f, f, trip.mass_diagonal[f]);
  op.mass.setFromTriplets(mass.begin(), mass.end());
  op.mass.makeCompressed();
  op.k = k;
  op.mode = grid.mode();
  op.t = grid.t();
  op.n = grid.n();
  return op;
}

}  // namespace detail

// Shifted-operator assembly. Complex k is allowed: test functions then use conj(k), so
// entries stay analytic in k and the matrix is no longer Hermitian.
inline BlochOperator assemble(const TorusGrid& grid, const PotentialSpec& V, const Vec2c& k) {
  const int n = grid.n();
  const Lattice2& lattice = grid.lattice();
  const bool pullback = grid.mode() == Mode::Pullback && grid.t() != 0.0;
  const Vec2c k_test = k.conjugate();
  const Complex I(0.0, 1.0);

  detail::Triplets trip;
  trip.stiffness.reserve(std::size_t(16) * n * n);
  trip.mass_diagonal.assign(grid.free_count(), 0.0);

  for (int i2 = 0; i2 < n; ++i2) {
    for (int i1 = 0; i1 < n; ++i1) {
      if (!grid.element_retained(i1, i2)) continue;
      std::array<int, 4> dof;
      std::array<Vec2, 4> corner;
      for (int a = 0; a < 4; ++a) {
        const auto [da, db] = detail::kCorners[a];
        dof[a] = grid.free_index(grid.node(i1 + da, i2 + db));
        corner[a] = lattice.to_physical(Vec2(double(i1 + da) / n, double(i2 + db) / n));
      }
      Eigen::Matrix4cd local = Eigen::Matrix4cd::Zero();
      std::array<double, 4> lumped{}, lumped_v{};

      for (const auto& qp : detail::element_quadrature(grid, i1, i2)) {
        Vec2 x = lattice.to_physical(qp.frac);
        Vec2 potential_at = qp.frac;
        double w = qp.weight;
        std::array<Vec2, 4> grad = qp.grad;
        if (pullback) {
          const JacobianSample js = grid.family()->jacobian(x, grid.t());
          if (!js.identity) {
            const Mat2 jinv_t = js.J.inverse().transpose();
            for (auto& g : grad) g = jinv_t * g;
            w *= std::abs(js.det);
            x = js.image;
            potential_at = lattice.to_fractional(x);
          }
        }
        const double v = V(potential_at);

        // (D + k) p_a for the trial side and (D + conj k) p_a for the test side.
        std::array<Vec2c, 4> trial, test;
        for (int a = 0; a < 4; ++a) {
          const Vec2 offset = x - corner[a];
          const Complex phase = std::exp(-I * k.dot(offset.cast<Complex>()));
          const Complex phase_test = std::exp(-I * k_test.dot(offset.cast<Complex>()));
          const Vec2c g = grad[a].cast<Complex>();
          trial[a] = -I * phase * (g - I * k * qp.phi[a]) + k * (qp.phi[a] * phase);
          test[a] = -I * phase_test * (g - I * k_test * qp.phi[a]) + k_test * (qp.phi[a] * phase_test);
        }
        for (int a = 0; a < 4; ++a) {
          lumped[a] += w * qp.phi[a];
          lumped_v[a] += w * v * qp.phi[a];
          for (int b = 0; b < 4; ++b) {
            // row a = test function, column b = trial function
            local(a, b) += w * (trial[b](0) * std::conj(test[a](0)) + trial[b](1) * std::conj(test[a](1)));
          }
        }
      }
      for (int a = 0; a < 4; ++a) local(a, a) += lumped_v[a];

      for (int a = 0; a < 4; ++a) {
        if (dof[a] < 0) continue;
        trip.mass_diagonal[dof[a]] += lumped[a];
        for (int b = 0; b < 4; ++b) {
          if (dof[b] < 0) continue;
          trip.stiffness.emplace_back(dof[a], dof[b], local(a, b));
        }
      }
    }
  }
  return detail::finish(grid, std::move(trip), k);
}

inline BlochOperator assemble(const TorusGrid& grid, const PotentialSpec& V, const Vec2& k) {
  return assemble(grid, V, Vec2c(k.cast<Complex>()));
}

// -Delta + V on quasi-periodic Q1 functions: the real element matrices are coupled across
// the cell boundary with Bloch factors exp(i k . (lattice jump)).
inline BlochOperator assemble_gauge(const TorusGrid& grid, const PotentialSpec& V, const Vec2& k) {
  if (grid.mode() == Mode::Pullback && grid.t() != 0.0) {
    throw std::invalid_argument("assemble_gauge supports nohole and regrid modes only");
  }
  const int n = grid.n();
  const Lattice2& lattice = grid.lattice();

  detail::Triplets trip;
  trip.stiffness.reserve(std::size_t(16) * n * n);
  trip.mass_diagonal.assign(grid.free_count(), 0.0);

  for (int i2 = 0; i2 < n; ++i2) {
    for (int i1 = 0; i1 < n; ++i1) {
      if (!grid.element_retained(i1, i2)) continue;
      std::array<int, 4> dof;
      std::array<Complex, 4> bloch;
      for (int a = 0; a < 4; ++a) {
        const auto [da, db] = detail::kCorners[a];
        dof[a] = grid.free_index(grid.node(i1 + da, i2 + db));
        const Vec2 jump(double((i1 + da) / n), double((i2 + db) / n));  // lattice jump, 0 or 1
        const double arg = k.dot(lattice.to_physical(jump));
        bloch[a] = Complex(std::cos(arg), std::sin(arg));
      }
      Eigen::Matrix4d local = Eigen::Matrix4d::Zero();
      std::array<double, 4> lumped{};
      for (const auto& qp : detail::element_quadrature(grid, i1, i2)) {
        const double v = V(qp.frac);
        for (int a = 0; a < 4; ++a) {
          lumped[a] += qp.weight * qp.phi[a];
          local(a, a) += qp.weight * v * qp.phi[a];
          for (int b = 0; b < 4; ++b) local(a, b) += qp.weight * qp.grad[a].dot(qp.grad[b]);
        }
      }
      for (int a = 0; a < 4; ++a) {
        if (dof[a] < 0) continue;
        trip.mass_diagonal[dof[a]] += lumped[a];
        for (int b = 0; b < 4; ++b) {
          if (dof[b] < 0) continue;
          trip.stiffness.emplace_back(dof[a], dof[b], std::conj(bloch[a]) * bloch[b] * local(a, b));
        }
      }
    }
  }
  return detail::finish(grid, std::move(trip), k.cast<Complex>());
}

// Max |S - S^*| entrywise over max |S|.
inline double hermitian_defect(const SparseComplex& S) {
  const SparseComplex diff = S - SparseComplex(S.adjoint());
  double num = 0.0, den = 0.0;
  for (int c = 0; c < diff.outerSize(); ++c) {
    for (SparseComplex::InnerIterator it(diff, c); it; ++it) num = std::max(num, std::abs(it.value()));
  }
  for (int c = 0; c < S.outerSize(); ++c) {
    for (SparseComplex::InnerIterator it(S, c); it; ++it) den = std::max(den, std::abs(it.value()));
  }
  return den > 0.0 ? num / den : num;
}

// Coordinate-format text, "row col re im" per line, 0-based, sorted by (row, col).
template <class Scalar>
void write_coordinate(std::ostream& out, const Eigen::SparseMatrix<Scalar>& A) {
  std::vector<std::tuple<Eigen::Index, Eigen::Index, Complex>> entries;
  for (int c = 0; c < A.outerSize(); ++c) {
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(A, c); it; ++it) {
      entries.emplace_back(it.row(), it.col(), Complex(it.value()));
    }
  }
  std::sort(entries.begin(), entries.end(), [](const auto& l, const auto& r) {
    return std::tie(std::get<0>(l), std::get<1>(l)) < std::tie(std::get<0>(r), std::get<1>(r));
  });
  const auto old_precision = out.precision(17);
  for (const auto& [row, col, v] : entries) {
    out << row << ' ' << col << ' ' << v.real() << ' ' << v.imag() << '\n';
  }
  out.precision(old_precision);
}

}  // namespace perfband
