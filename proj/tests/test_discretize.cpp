#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "perfband/assembly.hpp"
#include "perfband/diagnostics.hpp"
#include "perfband/eigensolver.hpp"
#include "perfband/grid.hpp"
#include "perfband/multipliers.hpp"

using namespace perfband;
using cd = std::complex<double>;
constexpr double pi = std::numbers::pi;

namespace {

const Lattice2 square{};
const HoleShape disk(Vec2(0.5, 0.5), 0.25);
const ShapeFamily petal(disk, {{2, 0.05, 0.0}}, 0.30, 0.45, 2);

TorusGrid free_grid(int n) { return build_grid(square, std::nullopt, n, {}); }
TorusGrid disk_grid(int n) { return build_grid(square, disk, n, {Mode::Regrid, 0.0, std::nullopt}); }

// Lowest eigenvalues of -Delta on the torus with quasimomentum k.
std::vector<double> free_oracle(const Vec2& k, int count) {
  std::vector<double> out;
  for (int m1 = -4; m1 <= 4; ++m1) {
    for (int m2 = -4; m2 <= 4; ++m2) out.push_back((k + 2.0 * pi * Vec2(m1, m2)).squaredNorm());
  }
  std::sort(out.begin(), out.end());
  out.resize(count);
  return out;
}

Eigen::VectorXcd plane_wave(int n, int m1, int m2) {
  Eigen::VectorXcd u(n * n);
  for (int i2 = 0; i2 < n; ++i2) {
    for (int i1 = 0; i1 < n; ++i1) u(i1 + n * i2) = std::exp(cd(0, 2.0 * pi * (m1 * i1 + m2 * i2) / n));
  }
  return u;
}

Eigen::VectorXcd random_vector(Eigen::Index size, std::mt19937& gen) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd u(size);
  for (auto& x : u) x = cd(g(gen), g(gen));
  return u;
}

}  // namespace

// ---- grid ----

TEST(Grid, NoHoleHasEveryNodeFree) {
  const TorusGrid g = free_grid(16);
  EXPECT_EQ(g.node_count(), 256u);
  EXPECT_EQ(g.free_count(), 256u);
  EXPECT_EQ(g.dirichlet_count(), 0u);
}

TEST(Grid, DiskDirichletCountNearArea) {
  const TorusGrid g = disk_grid(32);
  const double expected = pi * 0.25 * 0.25 * 32 * 32;  // about 201
  EXPECT_NEAR(double(g.dirichlet_count()), expected, 32.0);
  EXPECT_TRUE(g.is_dirichlet(g.node(16, 16)));
  EXPECT_FALSE(g.is_dirichlet(g.node(0, 0)));
}

TEST(Grid, ZeroExtendRoundTrip) {
  const TorusGrid g = disk_grid(24);
  std::mt19937 gen(3);
  const Eigen::VectorXcd u = random_vector(Eigen::Index(g.free_count()), gen);
  const Eigen::VectorXcd full = g.zero_extend(u);
  EXPECT_EQ(g.restrict_to_free(full), u);
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    if (g.is_dirichlet(int(node))) EXPECT_EQ(full(Eigen::Index(node)), cd(0.0));
  }
}

TEST(Grid, OversizedHoleRejected) {
  EXPECT_THROW(HoleShape(Vec2(0.5, 0.5), 0.6), HoleTooLarge);
}

TEST(Grid, PullbackAtZeroMatchesRegridNodes) {
  const TorusGrid a = disk_grid(32);
  const TorusGrid b = build_grid(square, disk, 32, {Mode::Pullback, 0.0, petal});
  ASSERT_EQ(a.free_count(), b.free_count());
  for (std::size_t node = 0; node < a.node_count(); ++node) EXPECT_EQ(a.is_dirichlet(int(node)), b.is_dirichlet(int(node)));
}

// ---- assembly ----

TEST(Assembly, KernelAtZeroQuasimomentumIsConstant) {
  const TorusGrid g = free_grid(12);
  const BlochOperator op = assemble(g, PotentialSpec{}, Vec2(0.0, 0.0));
  const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(op.size());
  EXPECT_LE((op.stiffness * ones).norm(), 1e-11);
  EXPECT_NEAR(op.mass_diagonal().sum(), 1.0, 1e-13);
}

TEST(Assembly, StiffnessIsHermitian) {
  PotentialSpec V;
  V.c0 = 1.0;
  V.terms.push_back({2.0, {1, 0}, 0.3});
  for (const Vec2& k : {Vec2(0.3, -1.1), Vec2(pi, pi)}) {
    EXPECT_LE(hermitian_defect(assemble(disk_grid(24), V, k).stiffness), 1e-13);
    EXPECT_LE(hermitian_defect(assemble(build_grid(square, disk, 24, {Mode::Pullback, 0.2, petal}), V, k).stiffness),
              1e-13);
  }
}

TEST(Assembly, GaugeFormIdenticalAtZero) {
  const TorusGrid g = disk_grid(16);
  const SparseComplex a = assemble(g, PotentialSpec{}, Vec2(0, 0)).stiffness;
  const SparseComplex b = assemble_gauge(g, PotentialSpec{}, Vec2(0, 0)).stiffness;
  EXPECT_LE(Eigen::MatrixXcd(a - b).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Assembly, GaugeFormPeriodicInK) {
  const TorusGrid g = disk_grid(16);
  const Vec2 k(0.7, -0.4);
  const SparseComplex a = assemble_gauge(g, PotentialSpec{}, k).stiffness;
  const SparseComplex b = assemble_gauge(g, PotentialSpec{}, k + Vec2(2.0 * pi, 0.0)).stiffness;
  EXPECT_LE(Eigen::MatrixXcd(a - b).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Assembly, EigenvaluesPeriodicInK) {
  const TorusGrid g = disk_grid(20);
  const Vec2 k(0.9, 0.2);
  const auto a = eigs_lowest(assemble(g, PotentialSpec{}, k), 4).values;
  const auto b = eigs_lowest(assemble(g, PotentialSpec{}, Vec2(k + Vec2(0.0, 2.0 * pi))), 4).values;
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff());
}

TEST(Assembly, ShiftedAndGaugeFormsShareSpectrum) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-pi, pi);
  const TorusGrid g = disk_grid(24);
  for (int trial = 0; trial < 3; ++trial) {
    const Vec2 k(u(gen), u(gen));
    const auto a = eigs_lowest(assemble(g, PotentialSpec{}, k), 5).values;
    const auto b = eigs_lowest(assemble_gauge(g, PotentialSpec{}, k), 5).values;
    EXPECT_LE((a - b).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Assembly, GaugeAgreementAtFixedK) {
  const TorusGrid g = disk_grid(24);
  const Vec2 k(pi / 2.0, 0.3);
  const auto a = eigs_lowest(assemble(g, PotentialSpec{}, k), 5).values;
  const auto b = eigs_lowest(assemble_gauge(g, PotentialSpec{}, k), 5).values;
  EXPECT_LE(((a - b).array().abs() / a.array().abs()).maxCoeff(), 1e-10);
}

TEST(Assembly, PullbackAtZeroEqualsRegrid) {
  PotentialSpec V;
  V.terms.push_back({1.5, {0, 1}, 0.0});
  const Vec2 k(1.0, 0.5);
  const BlochOperator a = assemble(disk_grid(24), V, k);
  const BlochOperator b = assemble(build_grid(square, disk, 24, {Mode::Pullback, 0.0, petal}), V, k);
  EXPECT_EQ(Eigen::MatrixXcd(a.stiffness), Eigen::MatrixXcd(b.stiffness));
  EXPECT_EQ(a.mass_diagonal(), b.mass_diagonal());
}

TEST(Assembly, ConstantPotentialShiftsSpectrum) {
  PotentialSpec V;
  V.c0 = 3.0;
  const TorusGrid g = disk_grid(20);
  const auto a = eigs_lowest(assemble(g, PotentialSpec{}, Vec2(0.4, 0.1)), 3).values;
  const auto b = eigs_lowest(assemble(g, V, Vec2(0.4, 0.1)), 3).values;
  EXPECT_LE((b - a - Eigen::VectorXd::Constant(3, 3.0)).cwiseAbs().maxCoeff(), 1e-9);
}

// ---- multipliers ----

TEST(Multipliers, BOnPlaneWave) {
  const TorusGrid g = free_grid(16);
  const Eigen::VectorXcd u = plane_wave(16, 1, 0);
  const Eigen::VectorXcd Bu = apply_multiplier_B(g, u, pi, 1.0);
  EXPECT_LE((Bu - cd(0, -2.0 * pi) * u).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Multipliers, BOnConstant) {
  const TorusGrid g = free_grid(16);
  const Eigen::VectorXcd u = Eigen::VectorXcd::Ones(256);
  EXPECT_LE((apply_multiplier_B(g, u, pi, 2.0) - cd(0, 4.0 * pi) * u).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Multipliers, AExamples) {
  const TorusGrid g = free_grid(16);
  const Eigen::VectorXcd one = Eigen::VectorXcd::Ones(256);
  EXPECT_LE((apply_multiplier_A(g, one, pi, 0.0) - pi * pi * one).cwiseAbs().maxCoeff(), 1e-11);
  const Eigen::VectorXcd w = plane_wave(16, 1, 0);
  EXPECT_LE((apply_multiplier_A(g, w, 0.0, 0.0) - 4.0 * pi * pi * w).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Multipliers, SymbolsAndFrequencies) {
  EXPECT_EQ(fourier::frequency(3, 8), 3);
  EXPECT_EQ(fourier::frequency(4, 8), -4);
  EXPECT_EQ(fourier::frequency(7, 8), -1);
  EXPECT_DOUBLE_EQ(fourier::multiplier_A(square, 0, 0, 2.0, 1.0), 3.0);
  EXPECT_EQ(fourier::multiplier_B(0, 0.0, 5.0), cd(0.0, 0.0));
}

TEST(Multipliers, ParsevalForForwardTransform) {
  std::mt19937 gen(9);
  const int n = 16;
  const Eigen::VectorXcd u = random_vector(n * n, gen);
  const Eigen::VectorXcd U = fourier::forward2(u, n);
  EXPECT_NEAR(U.squaredNorm(), double(n) * n * u.squaredNorm(), 1e-9 * U.squaredNorm());
  EXPECT_LE((fourier::inverse2(U, n) - u).norm(), 1e-12 * u.norm());
}

TEST(Multipliers, ParsevalForB) {
  std::mt19937 gen(13);
  const int n = 16;
  const double alpha = pi, beta = 2.0;
  const Eigen::VectorXcd u = random_vector(n * n, gen);
  const Eigen::VectorXcd U = fourier::forward2(u, n) / double(n * n);  // Fourier coefficients u_m
  double expected = 0.0;
  for (int j2 = 0; j2 < n; ++j2) {
    for (int j1 = 0; j1 < n; ++j1) {
      const double s = 2.0 * beta * (alpha - 2.0 * pi * fourier::frequency(j1, n));
      expected += s * s * std::norm(U(j1 + n * j2));
    }
  }
  const double measured = apply_B_full(n, u, alpha, beta).squaredNorm() / double(n * n);
  EXPECT_NEAR(measured, expected, 1e-12 * expected);
}

TEST(Multipliers, PythagorasOnPerforatedGrid) {
  // A real symbol, B imaginary and x2-independent: Re<Au, Bu> = 0.
  const TorusGrid g = disk_grid(32);
  std::mt19937 gen(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXcd u = random_vector(Eigen::Index(g.free_count()), gen);
    const Eigen::VectorXcd Au = apply_multiplier_A(g, u, pi, 2.0);
    const Eigen::VectorXcd Bu = apply_multiplier_B(g, u, pi, 2.0);
    const double lhs = (Au + Bu).squaredNorm();
    EXPECT_NEAR(lhs, Au.squaredNorm() + Bu.squaredNorm(), 1e-10 * lhs);
  }
}

// ---- eigensolver ----

TEST(Eigensolver, FreeOracleWithinTwoPercent) {
  const TorusGrid g = free_grid(32);
  for (const Vec2& k : {Vec2(pi / 2.0, 0.0), Vec2(0.3, 1.2)}) {
    const auto values = eigs_lowest(assemble(g, PotentialSpec{}, k), 6).values;
    const auto exact = free_oracle(k, 6);
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(values(j), exact[j], 0.02 * exact[j]) << "band " << j;
  }
  const auto lowest = eigs_lowest(assemble(g, PotentialSpec{}, Vec2(pi / 2.0, 0.0)), 1).values;
  EXPECT_NEAR(lowest(0), pi * pi / 4.0, 0.01 * pi * pi / 4.0);
}

TEST(Eigensolver, FreeErrorQuadraticInMesh) {
  const Vec2 k(pi / 2.0, 0.0);
  const double exact = free_oracle(k, 2)[1];
  const double e32 = std::abs(eigs_lowest(assemble(free_grid(32), PotentialSpec{}, k), 2).values(1) - exact);
  const double e64 = std::abs(eigs_lowest(assemble(free_grid(64), PotentialSpec{}, k), 2).values(1) - exact);
  EXPECT_GE(e32 / e64, 3.5);
  EXPECT_LE(e32 / e64, 4.5);
}

TEST(Eigensolver, DenseAndIterativeAgree) {
  const TorusGrid g = disk_grid(40);
  const BlochOperator op = assemble(g, PotentialSpec{}, Vec2(0.5, 1.5));
  SolverOptions dense;
  dense.dense_threshold = 100000;
  SolverOptions iterative;
  iterative.dense_threshold = 0;
  const EigenResult a = eigs_lowest(op, 5, dense);
  const EigenResult b = eigs_lowest(op, 5, iterative);
  EXPECT_TRUE(a.dense);
  EXPECT_FALSE(b.dense);
  EXPECT_LE((a.values - b.values).cwiseAbs().maxCoeff(), 1e-8 * a.values.cwiseAbs().maxCoeff());
  for (double r : b.residuals) EXPECT_LE(r, 1e-10);
}

TEST(Eigensolver, EigenvectorsAreMassOrthonormal) {
  const BlochOperator op = assemble(disk_grid(24), PotentialSpec{}, Vec2(0.2, 0.0));
  const EigenResult r = eigs_lowest(op, 4);
  const Eigen::MatrixXcd G = r.vectors.adjoint() * op.mass_diagonal().asDiagonal() * r.vectors;
  EXPECT_LE((G - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
  for (int j = 0; j < 4; ++j) {
    EXPECT_LE(pencil_residual(op.stiffness, op.mass_diagonal(), r.values(j), r.vectors.col(j)), 1e-9);
  }
}

TEST(Eigensolver, RejectsBadRequests) {
  const BlochOperator op = assemble(free_grid(8), PotentialSpec{}, Vec2(0, 0));
  EXPECT_THROW(eigs_lowest(op, 0), std::invalid_argument);
  EXPECT_THROW(eigs_lowest(op, 65), std::invalid_argument);
}

TEST(Eigensolver, PinnedDiskExtrapolation) {
  // Lowest disk eigenvalue at k = 0, extrapolated in N^-2 from N = 32, 48, 64 (frozen reference).
  const std::vector<int> ns{32, 48, 64};
  std::vector<double> values;
  for (int n : ns) values.push_back(eigs_lowest(assemble(disk_grid(n), PotentialSpec{}, Vec2(0, 0)), 1).values(0));
  EXPECT_NEAR(values[0], 14.4243653262348, 1e-9);
  EXPECT_NEAR(values[2], 15.4892404673947, 1e-9);
  const RichardsonFit fit = richardson(ns, values);
  EXPECT_NEAR(fit.limit, 15.6919452769124, 1e-8);
}

TEST(Eigensolver, DirichletHolesRaiseEigenvalues) {
  const HoleShape larger(Vec2(0.5, 0.5), 0.30);
  const double a = eigs_lowest(assemble(disk_grid(32), PotentialSpec{}, Vec2(0, 0)), 1).values(0);
  const double b =
      eigs_lowest(assemble(build_grid(square, larger, 32, {Mode::Regrid, 0.0, std::nullopt}), PotentialSpec{}, Vec2(0, 0)),
                  1)
          .values(0);
  EXPECT_GT(a, 0.0);
  EXPECT_GE(b, a);
}
