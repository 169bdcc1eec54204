#pragma once

// Flat-band test, analyticity probe along a shape family, shape sweeps, Richardson fits.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "perfband/bands.hpp"
#include "perfband/errors.hpp"

namespace perfband {

enum class FlatVerdict { NonFlat, Suspect };

inline std::string to_string(FlatVerdict v) { return v == FlatVerdict::NonFlat ? "NONFLAT" : "SUSPECT"; }

struct BandFlatness {
  int band = 0;  // 1-based
  double oscillation = 0.0;
  double threshold = 0.0;
  FlatVerdict verdict = FlatVerdict::Suspect;
};

// A band is NONFLAT once its sampled oscillation clears 10 * residual * max(1, |lambda|).
inline std::vector<BandFlatness> flat_band_test(const BandStructure& bs, double residual) {
  if (!bs.gridded() || bs.grid_n1 < 9 || bs.grid_n2 < 9) {
    throw std::invalid_argument("flat_band_test needs a k-grid of at least 9x9 points");
  }
  std::vector<BandFlatness> out;
  for (Eigen::Index j = 0; j < bs.n_bands(); ++j) {
    BandFlatness f;
    f.band = int(j) + 1;
    const auto col = bs.bands.col(j);
    f.oscillation = col.maxCoeff() - col.minCoeff();
    f.threshold = 10.0 * residual * std::max(1.0, col.cwiseAbs().maxCoeff());
    f.verdict = f.oscillation > f.threshold ? FlatVerdict::NonFlat : FlatVerdict::Suspect;
    out.push_back(f);
  }
  return out;
}

struct RichardsonFit {
  double limit = 0.0;
  double coefficient = 0.0;
  double max_residual = 0.0;
};

// Least-squares fit lambda(N) = limit + coefficient / N^2.
inline RichardsonFit richardson(const std::vector<int>& ns, const std::vector<double>& values) {
  if (ns.size() != values.size() || ns.size() < 2) throw std::invalid_argument("richardson needs >= 2 paired samples");
  Eigen::MatrixXd A(Eigen::Index(ns.size()), 2);
  Eigen::VectorXd y(Eigen::Index(ns.size()));
  for (std::size_t i = 0; i < ns.size(); ++i) {
    A(Eigen::Index(i), 0) = 1.0;
    A(Eigen::Index(i), 1) = 1.0 / (double(ns[i]) * ns[i]);
    y(Eigen::Index(i)) = values[i];
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(y);
  return {c(0), c(1), (A * c - y).cwiseAbs().maxCoeff()};
}

// Max |p(t_i) - y_i| for the least-squares polynomial of the given degree.
inline double polynomial_fit_residual(const std::vector<double>& t, const std::vector<double>& y, int degree) {
  const Eigen::Index m = Eigen::Index(t.size());
  if (m <= degree) throw std::invalid_argument("polynomial fit needs more samples than the degree");
  const double scale = *std::max_element(t.begin(), t.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  const double s = scale != 0.0 ? std::abs(scale) : 1.0;
  Eigen::MatrixXd V(m, degree + 1);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d, p *= t[i] / s) V(i, d) = p;
    rhs(i) = y[i];
  }
  const Eigen::VectorXd c = V.colPivHouseholderQr().solve(rhs);
  return (V * c - rhs).cwiseAbs().maxCoeff();
}

struct ProbeSample {
  double t = 0.0;
  double lambda = 0.0;
  double gap = 0.0;  // distance to the nearest other computed eigenvalue
  double residual = 0.0;
};

struct AnalyticityProbe {
  Vec2 k0 = Vec2::Zero();
  int band = 1;
  double t_max = 0.0;
  double step = 0.0;
  std::vector<ProbeSample> samples;     // sorted by t
  std::vector<double> steps;            // h, h/2, h/4
  std::vector<double> d1, d2;           // central differences at each step
  double d1_order = 0.0, d2_order = 0.0;
  double fit_residual = 0.0;            // degree-4 least squares over the Chebyshev samples
  double min_gap = 0.0;
};

namespace detail {

// Chebyshev-Lobatto points on [-t_max, t_max], ascending; the middle one is exactly 0 for odd counts.
inline std::vector<double> lobatto_points(double t_max, int count) {
  std::vector<double> t(count);
  for (int i = 0; i < count; ++i) {
    t[i] = -t_max * std::cos(std::numbers::pi * i / (count - 1));
  }
  if (count % 2 == 1) t[count / 2] = 0.0;
  for (int i = 0; i < count / 2; ++i) t[count - 1 - i] = -t[i];
  return t;
}

inline double convergence_order(const std::vector<double>& d) {
  const double a = std::abs(d[0] - d[1]), b = std::abs(d[1] - d[2]);
  if (a == 0.0 || b == 0.0) return 0.0;
  return std::log2(a / b);
}

}  // namespace detail

// Tracks the band-th eigenvalue at k0 along h_t on the fixed pullback grid.
// `step` is the finite-difference step h (defaults to t_max / 2).
inline AnalyticityProbe analyticity_probe(const Problem& base, const ShapeFamily& family, const Vec2& k0, int band,
                                          double t_max, int n_steps, double step = 0.0) {
  if (band < 1) throw std::invalid_argument("probe band index is 1-based");
  if (!(t_max > 0.0)) throw std::invalid_argument("probe t_max must be positive");
  if (n_steps < 6) throw std::invalid_argument("probe needs at least 6 samples for a degree-4 fit");
  if (step <= 0.0) step = t_max / 2.0;
  if (step > t_max) throw std::invalid_argument("probe step exceeds t_max");
  const FamilyValidity validity = family.validate(t_max, 400);
  if (!validity.pass) {
    std::ostringstream msg;
    msg << "shape family degenerates within |t| <= " << t_max << " (min det J " << validity.min_det << ")";
    throw DegenerateMap(msg.str());
  }

  Problem problem = base;
  problem.mode = Mode::Pullback;
  problem.family = family;
  problem.hole = family.base();

  AnalyticityProbe probe;
  probe.k0 = k0;
  probe.band = band;
  probe.t_max = t_max;
  probe.step = step;
  probe.steps = {step, step / 2.0, step / 4.0};

  const std::vector<double> cheb = detail::lobatto_points(t_max, n_steps);
  std::vector<double> ts = cheb;
  ts.push_back(0.0);
  for (double h : probe.steps) {
    ts.push_back(h);
    ts.push_back(-h);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  const int n_eigs = band + 1;
  const auto spectra = parallel_map(ts.size(), problem.threads, [&](std::size_t i) {
    return solve_at(problem.grid_at(ts[i]), problem.potential, k0, n_eigs, problem.solver);
  });

  // Nearest-value tracking outward from t = 0 in both directions.
  const std::size_t zero = std::size_t(std::find(ts.begin(), ts.end(), 0.0) - ts.begin());
  std::vector<ProbeSample> tracked(ts.size());
  auto record = [&](std::size_t i, double previous, bool first) {
    const Eigen::VectorXd& vals = spectra[i].values;
    Eigen::Index idx = band - 1;
    if (!first) (vals.array() - previous).abs().minCoeff(&idx);
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < vals.size(); ++j) {
      if (j != idx) gap = std::min(gap, std::abs(vals(j) - vals(idx)));
    }
    const double residual = *std::max_element(spectra[i].residuals.begin(), spectra[i].residuals.end());
    const double margin = 10.0 * residual * std::max(1.0, std::abs(vals(idx)));
    if (!(gap > margin)) {
      std::ostringstream msg;
      msg << "band " << band << " is not simple at t=" << ts[i] << " (gap " << gap << ", margin " << margin << ")";
      throw SimplicityLost(msg.str());
    }
    tracked[i] = {ts[i], vals(idx), gap, residual};
    return vals(idx);
  };
  const double lambda0 = record(zero, 0.0, true);
  double prev = lambda0;
  for (std::size_t i = zero + 1; i < ts.size(); ++i) prev = record(i, prev, false);
  prev = lambda0;
  for (std::size_t i = zero; i-- > 0;) prev = record(i, prev, false);
  probe.samples = tracked;

  auto value_at = [&](double t) {
    const auto it = std::find(ts.begin(), ts.end(), t);
    return tracked[std::size_t(it - ts.begin())].lambda;
  };
  for (double h : probe.steps) {
    const double up = value_at(h), down = value_at(-h);
    probe.d1.push_back((up - down) / (2.0 * h));
    probe.d2.push_back((up - 2.0 * lambda0 + down) / (h * h));
  }
  probe.d1_order = detail::convergence_order(probe.d1);
  probe.d2_order = detail::convergence_order(probe.d2);

  std::vector<double> fit_y;
  for (double t : cheb) fit_y.push_back(value_at(t));
  probe.fit_residual = polynomial_fit_residual(cheb, fit_y, 4);
  probe.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& s : tracked) probe.min_gap = std::min(probe.min_gap, s.gap);
  return probe;
}

// Band structures along a path for each t, on the fixed pullback grid.
inline std::map<double, BandStructure> shape_sweep(const Problem& base, const ShapeFamily& family, const KPath& path,
                                                   const std::vector<double>& ts, int n_bands) {
  Problem problem = base;
  problem.mode = Mode::Pullback;
  problem.family = family;
  problem.hole = family.base();
  std::map<double, BandStructure> out;
  for (double t : ts) {
    problem.t = t;
    out.emplace(t, band_structure(problem, path, n_bands));
  }
  return out;
}

}  // namespace perfband
