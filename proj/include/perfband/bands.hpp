#pragma once

// Band structures over k-paths and k-grids, and the spectrum projection.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "perfband/assembly.hpp"
#include "perfband/eigensolver.hpp"
#include "perfband/errors.hpp"
#include "perfband/grid.hpp"

namespace perfband {

// Everything needed to assemble L(k) at some shape parameter t.
struct Problem {
  Lattice2 lattice;
  std::optional<HoleShape> hole;
  std::optional<ShapeFamily> family;
  PotentialSpec potential;
  int n = 48;
  Mode mode = Mode::NoHole;
  double t = 0.0;
  SolverOptions solver;
  int threads = 1;

  TorusGrid grid() const { return grid_at(t); }
  TorusGrid grid_at(double t_value) const {
    return build_grid(lattice, hole, n, Deformation{mode, t_value, family});
  }
};

// Runs f(0..count-1) on up to `threads` workers; results land by index. The first failure
// (by index) is rethrown after all workers stop.
template <class F>
auto parallel_map(std::size_t count, int threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t width = std::clamp<std::size_t>(std::size_t(std::max(threads, 1)), 1, std::max<std::size_t>(count, 1));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(width);
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct KVertex {
  std::string label;
  Vec2 k;
};

struct KPath {
  std::vector<KVertex> vertices;
  int points_per_segment = 30;

  struct Sample {
    Vec2 k;
    double arclength;
    int segment;
  };

  void check() const {
    if (vertices.size() < 2) throw std::invalid_argument("k-path needs at least two vertices");
    if (points_per_segment < 2) throw std::invalid_argument("points_per_segment must be >= 2");
    for (std::size_t i = 1; i < vertices.size(); ++i) {
      if (vertices[i].k == vertices[i - 1].k) throw std::invalid_argument("consecutive k-path vertices coincide");
    }
  }

  // Points along the path; a vertex shared by two segments appears once, tagged with the
  // earlier segment.
  std::vector<Sample> samples() const {
    check();
    std::vector<Sample> out;
    double s0 = 0.0;
    const int p = points_per_segment;
    for (std::size_t seg = 0; seg + 1 < vertices.size(); ++seg) {
      const Vec2 a = vertices[seg].k, b = vertices[seg + 1].k;
      const double len = (b - a).norm();
      for (int i = seg == 0 ? 0 : 1; i < p; ++i) {
        const double f = double(i) / (p - 1);
        out.push_back({a + f * (b - a), s0 + f * len, int(seg)});
      }
      s0 += len;
    }
    return out;
  }

  std::vector<double> vertex_arclengths() const {
    std::vector<double> s{0.0};
    for (std::size_t i = 1; i < vertices.size(); ++i) s.push_back(s.back() + (vertices[i].k - vertices[i - 1].k).norm());
    return s;
  }
};

// Gamma -> X -> M -> Gamma with X = G_1/2, M = (G_1 + G_2)/2.
inline KPath default_kpath(const Lattice2& lattice, int points_per_segment = 30) {
  const Mat2 G = lattice.dual_basis();
  const Vec2 gamma = Vec2::Zero();
  const Vec2 x = 0.5 * G.col(0);
  const Vec2 m = 0.5 * (G.col(0) + G.col(1));
  return KPath{{{"Γ", gamma}, {"X", x}, {"M", m}, {"Γ", gamma}}, points_per_segment};
}

struct BandStructure {
  std::vector<Vec2> k;
  std::vector<double> arclength;        // path only
  std::vector<int> segment;             // path only
  std::vector<KVertex> vertices;        // path only
  std::vector<double> vertex_arclength; // path only
  int grid_n1 = 0, grid_n2 = 0;         // > 0 for gridded input; index = i*n2 + j
  Eigen::MatrixXd bands;                // rows: k, columns: band (ascending)
  Eigen::MatrixXd residuals;
  int n = 0;
  Mode mode = Mode::NoHole;
  double t = 0.0;
  std::string potential;
  std::string hole;

  bool gridded() const { return grid_n1 > 0; }
  Eigen::Index n_bands() const { return bands.cols(); }
  Eigen::Index n_k() const { return bands.rows(); }
};

struct PointSpectrum {
  Eigen::VectorXd values;
  std::vector<double> residuals;
};

inline std::string format_k(const Vec2& k) {
  std::ostringstream s;
  s.precision(17);
  s << "k=(" << k.x() << ", " << k.y() << ")";
  return s.str();
}

inline PointSpectrum solve_at(const TorusGrid& grid, const PotentialSpec& V, const Vec2& k, int n_bands,
                              const SolverOptions& opts) {
  try {
    const EigenResult r = eigs_lowest(assemble(grid, V, k), n_bands, opts);
    return {r.values, r.residuals};
  } catch (const ConvergenceFailure& e) {
    throw ConvergenceFailure(std::string(e.what()) + " at " + format_k(k), e.residuals(), e.iterations());
  }
}

namespace detail {

inline BandStructure solve_points(const Problem& problem, const TorusGrid& grid, const std::vector<Vec2>& ks,
                                  int n_bands) {
  BandStructure bs;
  bs.k = ks;
  bs.n = problem.n;
  bs.mode = grid.mode();
  bs.t = grid.t();
  bs.potential = problem.potential.describe();
  bs.hole = grid.describe_hole();
  const auto points = parallel_map(ks.size(), problem.threads, [&](std::size_t i) {
    return solve_at(grid, problem.potential, ks[i], n_bands, problem.solver);
  });
  bs.bands.resize(Eigen::Index(ks.size()), n_bands);
  bs.residuals.resize(Eigen::Index(ks.size()), n_bands);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    bs.bands.row(Eigen::Index(i)) = points[i].values.transpose();
    for (int j = 0; j < n_bands; ++j) bs.residuals(Eigen::Index(i), j) = points[i].residuals[j];
  }
  return bs;
}

}  // namespace detail

inline BandStructure band_structure(const Problem& problem, const KPath& path, int n_bands,
                                    std::optional<TorusGrid> grid = std::nullopt) {
  const auto samples = path.samples();
  std::vector<Vec2> ks;
  for (const auto& s : samples) ks.push_back(s.k);
  if (!grid) grid = problem.grid();
  BandStructure bs = detail::solve_points(problem, *grid, ks, n_bands);
  for (const auto& s : samples) {
    bs.arclength.push_back(s.arclength);
    bs.segment.push_back(s.segment);
  }
  bs.vertices = path.vertices;
  bs.vertex_arclength = path.vertex_arclengths();
  return bs;
}

// k-point (i, j) of an n1 x n2 grid over the reciprocal cell: 2 pi B^{-T} (i/n1, j/n2).
inline Vec2 grid_k(const Lattice2& lattice, int i, int j, int n1, int n2) {
  return lattice.dual_basis() * Vec2(double(i) / n1, double(j) / n2);
}

inline BandStructure dispersion_surface(const Problem& problem, int n1, int n2, int n_bands) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("k-grid dimensions must be positive");
  std::vector<Vec2> ks;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) ks.push_back(grid_k(problem.lattice, i, j, n1, n2));
  }
  BandStructure bs = detail::solve_points(problem, problem.grid(), ks, n_bands);
  bs.grid_n1 = n1;
  bs.grid_n2 = n2;
  return bs;
}

using Interval = std::pair<double, double>;

// Union of closed intervals: sorted, pairwise disjoint.
inline std::vector<Interval> merge_intervals(std::vector<Interval> intervals) {
  std::sort(intervals.begin(), intervals.end());
  std::vector<Interval> out;
  for (const auto& iv : intervals) {
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

// Open gaps between consecutive merged intervals.
inline std::vector<Interval> gaps_between(const std::vector<Interval>& merged) {
  std::vector<Interval> gaps;
  for (std::size_t i = 1; i < merged.size(); ++i) gaps.emplace_back(merged[i - 1].second, merged[i].first);
  return gaps;
}

struct SpectrumReport {
  std::vector<Interval> bands;
  std::vector<Interval> spectrum;
  std::vector<Interval> gaps;
  int grid_n1 = 0, grid_n2 = 0;
  int n = 0;
  std::vector<std::string> warnings;  // InsufficientSampling notes
};

inline SpectrumReport spectrum_report(const BandStructure& bs) {
  if (!bs.gridded()) {
    throw std::invalid_argument("spectrum_report needs a k-grid; a k-path does not cover the zone");
  }
  SpectrumReport rep;
  rep.grid_n1 = bs.grid_n1;
  rep.grid_n2 = bs.grid_n2;
  rep.n = bs.n;
  for (Eigen::Index j = 0; j < bs.n_bands(); ++j) {
    const double lo = bs.bands.col(j).minCoeff();
    const double hi = bs.bands.col(j).maxCoeff();
    rep.bands.emplace_back(lo, hi);
    const double res = bs.residuals.col(j).maxCoeff();
    if (hi - lo < 10.0 * res) {
      std::ostringstream w;
      w << "InsufficientSampling: band " << j + 1 << " oscillation " << hi - lo
        << " is below 10x the solver residual " << res;
      rep.warnings.push_back(w.str());
    }
  }
  rep.spectrum = merge_intervals(rep.bands);
  rep.gaps = gaps_between(rep.spectrum);
  return rep;
}

// Sorted spectra at k and -k, compared on a k-grid: max |lambda_j(k) - lambda_j(-k)|.
inline double time_reversal_defect(const BandStructure& bs) {
  if (!bs.gridded()) throw std::invalid_argument("time_reversal_defect needs a k-grid");
  double worst = 0.0;
  for (int i = 0; i < bs.grid_n1; ++i) {
    for (int j = 0; j < bs.grid_n2; ++j) {
      const int mi = (bs.grid_n1 - i) % bs.grid_n1;
      const int mj = (bs.grid_n2 - j) % bs.grid_n2;
      const auto a = bs.bands.row(i * bs.grid_n2 + j);
      const auto b = bs.bands.row(mi * bs.grid_n2 + mj);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace perfband
