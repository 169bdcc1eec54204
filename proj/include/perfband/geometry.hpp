#pragma once

// Unit cell, hole shape and the radial shape-perturbation maps h_t.
//
// Coordinates: a point is either fractional (xi in [0,1)^2, the torus) or
// physical (x = basis * xi). Hole shapes are star-shaped about their center
// and parameterized by the physical polar angle.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "perfband/errors.hpp"

namespace perfband {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

class Lattice2 {
 public:
  Lattice2() : Lattice2(Mat2::Identity()) {}

  // Columns of `basis` are the period vectors.
  explicit Lattice2(const Mat2& basis) : basis_(basis) {
    if (!(basis.determinant() > 0.0)) {
      throw std::invalid_argument("lattice basis must have positive determinant");
    }
    basis_inverse_ = basis.inverse();
    gram_inverse_ = (basis.transpose() * basis).inverse();
  }

  const Mat2& basis() const noexcept { return basis_; }
  const Mat2& basis_inverse() const noexcept { return basis_inverse_; }
  const Mat2& gram_inverse() const noexcept { return gram_inverse_; }
  double cell_area() const noexcept { return basis_.determinant(); }

  Vec2 to_physical(const Vec2& frac) const { return basis_ * frac; }
  Vec2 to_fractional(const Vec2& x) const { return basis_inverse_ * x; }

  // Generators of the dual lattice, 2*pi * basis^{-T}.
  Mat2 dual_basis() const { return 2.0 * std::numbers::pi * basis_inverse_.transpose(); }

  // Physical distance from a fractional point inside the cell to the nearest cell edge.
  double distance_to_cell_boundary(const Vec2& frac) const {
    const double det = cell_area();
    const double edge1 = basis_.col(0).norm();
    const double edge2 = basis_.col(1).norm();
    const double d1 = std::min(frac.x(), 1.0 - frac.x()) * det / edge2;
    const double d2 = std::min(frac.y(), 1.0 - frac.y()) * det / edge1;
    return std::min(d1, d2);
  }

  bool is_identity() const { return basis_ == Mat2::Identity(); }

 private:
  Mat2 basis_;
  Mat2 basis_inverse_;
  Mat2 gram_inverse_;
};

// One harmonic a cos(m theta) + b sin(m theta).
struct FourierTerm {
  int m = 1;
  double a = 0.0;
  double b = 0.0;
};

namespace detail {

inline double fourier_sum(double constant, const std::vector<FourierTerm>& terms, double theta) {
  double r = constant;
  for (const auto& term : terms) {
    r += term.a * std::cos(term.m * theta) + term.b * std::sin(term.m * theta);
  }
  return r;
}

inline double fourier_sum_derivative(const std::vector<FourierTerm>& terms, double theta) {
  double dr = 0.0;
  for (const auto& term : terms) {
    dr += term.m * (term.b * std::cos(term.m * theta) - term.a * std::sin(term.m * theta));
  }
  return dr;
}

inline double wrap_centered(double v) { return v - std::floor(v + 0.5); }

constexpr int kShapeSamples = 4096;

}  // namespace detail

class HoleShape {
 public:
  // `center` is fractional. Harmonics must have m >= 1.
  HoleShape(Vec2 center, double r0, std::vector<FourierTerm> coeffs = {}, Lattice2 lattice = {})
      : center_(std::move(center)), r0_(r0), coeffs_(std::move(coeffs)), lattice_(std::move(lattice)) {
    if (!(r0_ > 0.0)) throw std::invalid_argument("hole r0 must be positive");
    for (const auto& term : coeffs_) {
      if (term.m < 1) throw std::invalid_argument("hole fourier_coeffs need m >= 1");
    }
    if (center_.x() < 0.0 || center_.x() >= 1.0 || center_.y() < 0.0 || center_.y() >= 1.0) {
      throw std::invalid_argument("hole center must be fractional in [0,1)^2");
    }
    auto [lo, hi] = radius_range();
    if (!(lo > 0.0)) throw std::invalid_argument("hole radius must stay positive");
    const double room = lattice_.distance_to_cell_boundary(center_);
    if (!(hi < room)) {
      std::ostringstream msg;
      msg << "hole exits unit cell (max radius " << hi << " >= distance to cell boundary " << room
          << ")";
      throw HoleTooLarge(msg.str());
    }
  }

  const Vec2& center() const noexcept { return center_; }
  Vec2 center_physical() const { return lattice_.to_physical(center_); }
  double r0() const noexcept { return r0_; }
  const std::vector<FourierTerm>& coeffs() const noexcept { return coeffs_; }
  const Lattice2& lattice() const noexcept { return lattice_; }

  double radius(double theta) const { return detail::fourier_sum(r0_, coeffs_, theta); }

  // Sampled [min, max] of r(theta).
  std::pair<double, double> radius_range() const {
    double lo = radius(0.0), hi = lo;
    for (int i = 1; i < detail::kShapeSamples; ++i) {
      const double r = radius(2.0 * std::numbers::pi * i / detail::kShapeSamples);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    return {lo, hi};
  }

  // Physical offset of a physical point from the center, nearest periodic image.
  Vec2 offset(const Vec2& x) const {
    Vec2 d = lattice_.to_fractional(x) - center_;
    d = d.unaryExpr([](double v) { return detail::wrap_centered(v); });
    return lattice_.to_physical(d);
  }

  // Offset from fractional coordinates; exact for lattice-aligned grids.
  Vec2 offset_fractional(const Vec2& frac) const {
    Vec2 d = (frac - center_).unaryExpr([](double v) { return detail::wrap_centered(v); });
    return lattice_.to_physical(d);
  }

  bool contains(const Vec2& x) const { return contains_offset(offset(x)); }

  bool contains_offset(const Vec2& d, double extra = 0.0) const {
    const double r = d.norm();
    if (r == 0.0) return true;
    return r < radius(std::atan2(d.y(), d.x())) + extra;
  }

 private:
  Vec2 center_;
  double r0_;
  std::vector<FourierTerm> coeffs_;
  Lattice2 lattice_;
};

// chi(r) = 1 for r <= r_in, 0 for r >= r_out, the degree 2s+1 smoothstep in between
// with s vanishing derivatives at both ends.
class CutoffPolynomial {
 public:
  CutoffPolynomial(double r_in, double r_out, int smoothness)
      : r_in_(r_in), r_out_(r_out), s_(smoothness) {
    if (!(r_out > r_in)) throw std::invalid_argument("cutoff needs r_outer > r_inner");
    if (smoothness < 1) throw std::invalid_argument("cutoff smoothness must be >= 1");
    // S(u) = u^{s+1} sum_j C(s+j, j) C(2s+1, s-j) (-u)^j
    coeffs_.assign(2 * s_ + 2, 0.0);
    for (int j = 0; j <= s_; ++j) {
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      coeffs_[s_ + 1 + j] = sign * binomial(s_ + j, j) * binomial(2 * s_ + 1, s_ - j);
    }
  }

  double value(double r) const {
    if (r <= r_in_) return 1.0;
    if (r >= r_out_) return 0.0;
    return 1.0 - horner(coeffs_, u(r));
  }

  double derivative(double r) const {
    if (r <= r_in_ || r >= r_out_) return 0.0;
    double acc = 0.0;
    const double x = u(r);
    for (std::size_t p = coeffs_.size() - 1; p >= 1; --p) acc = acc * x + p * coeffs_[p];
    return -acc / (r_out_ - r_in_);
  }

  // sup |chi'| = S'(1/2) / width.
  double max_abs_derivative() const { return -derivative(0.5 * (r_in_ + r_out_)); }

  double r_inner() const noexcept { return r_in_; }
  double r_outer() const noexcept { return r_out_; }
  int smoothness() const noexcept { return s_; }

 private:
  double u(double r) const { return (r - r_in_) / (r_out_ - r_in_); }

  static double horner(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  static double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  double r_in_, r_out_;
  int s_;
  std::vector<double> coeffs_;
};

// Value of the map h_t and its derivative at one point.
struct JacobianSample {
  Mat2 J = Mat2::Identity();
  double det = 1.0;
  Mat2 A = Mat2::Identity();  // |det J| J^{-1} J^{-T}
  Vec2 image = Vec2::Zero();  // h_t(x)
  bool identity = true;       // exactly the identity at this point
};

struct FamilyValidity {
  double t_max = 0.0;
  double min_det = 1.0;
  double kappa = 1.0;  // eigenvalues of A lie in [1/kappa, kappa]
  std::size_t samples = 0;
  bool pass = true;
};

// Radial perturbation family h_t(r, theta) = (r + t rho(theta) chi(r), theta) about the
// hole center. Identity for r >= r_outer and at t = 0.
class ShapeFamily {
 public:
  // `direction` entries with m = 0 give the constant part of rho (b ignored).
  ShapeFamily(HoleShape base, std::vector<FourierTerm> direction, double r_inner, double r_outer,
              int cutoff_smoothness = 2)
      : base_(std::move(base)),
        direction_(std::move(direction)),
        cutoff_(r_inner, r_outer, std::max(cutoff_smoothness, 1)) {
    if (cutoff_smoothness < 2) throw std::invalid_argument("cutoff_smoothness must be >= 2");
    for (const auto& term : direction_) {
      if (term.m < 0) throw std::invalid_argument("direction harmonics need m >= 0");
      if (term.m == 0) {
        rho0_ += term.a;
      } else {
        harmonics_.push_back(term);
      }
    }
    const double r_max = base_.radius_range().second;
    if (!(r_inner > r_max)) {
      throw std::invalid_argument("annulus r_inner must exceed the largest hole radius");
    }
    if (!(r_outer < base_.lattice().distance_to_cell_boundary(base_.center()))) {
      throw std::invalid_argument("annulus r_outer must stay inside the unit cell");
    }
  }

  const HoleShape& base() const noexcept { return base_; }
  const std::vector<FourierTerm>& direction() const noexcept { return direction_; }
  const CutoffPolynomial& cutoff() const noexcept { return cutoff_; }
  double r_inner() const noexcept { return cutoff_.r_inner(); }
  double r_outer() const noexcept { return cutoff_.r_outer(); }

  double rho(double theta) const { return detail::fourier_sum(rho0_, harmonics_, theta); }
  double rho_derivative(double theta) const {
    return detail::fourier_sum_derivative(harmonics_, theta);
  }

  // Boundary radius of the perturbed hole, r_base + t rho (chi = 1 there).
  double perturbed_radius(double theta, double t) const { return base_.radius(theta) + t * rho(theta); }

  Vec2 displace(const Vec2& x, double t) const { return jacobian(x, t).image; }

  JacobianSample jacobian(const Vec2& x, double t) const {
    JacobianSample s;
    s.image = x;
    if (t == 0.0) return s;
    const Vec2 d = base_.offset(x);
    const double r = d.norm();
    if (r >= r_outer() || r == 0.0) return s;

    const double theta = std::atan2(d.y(), d.x());
    const double chi = cutoff_.value(r);
    const double rho_v = rho(theta);
    const double R = r + t * rho_v * chi;
    const double R_r = 1.0 + t * rho_v * cutoff_.derivative(r);
    const double R_theta = t * rho_derivative(theta) * chi;
    if (!(R > 0.0) || !(R_r > 0.0)) {
      std::ostringstream msg;
      msg << "shape map folds over at r=" << r << ", theta=" << theta << ", t=" << t;
      throw DegenerateMap(msg.str());
    }
    const Vec2 er(std::cos(theta), std::sin(theta));
    const Vec2 et(-er.y(), er.x());
    s.J = R_r * er * er.transpose() + (R_theta / r) * er * et.transpose() +
          (R / r) * et * et.transpose();
    s.det = R_r * R / r;
    const Mat2 Jinv = s.J.inverse();
    s.A = std::abs(s.det) * Jinv * Jinv.transpose();
    s.image = x + (R - r) * er;
    s.identity = false;
    return s;
  }

  // Samples the perforated part of the annulus region at t in [-t_max, t_max].
  FamilyValidity validate(double t_max, std::size_t samples) const {
    if (samples < 100) throw std::invalid_argument("validate_family needs >= 100 samples");
    FamilyValidity report;
    report.t_max = t_max;
    const auto n_theta = static_cast<std::size_t>(std::ceil(std::sqrt(double(samples))));
    const std::size_t n_r = (samples + n_theta - 1) / n_theta;
    const std::array<double, 5> ts{-t_max, -0.5 * t_max, 0.0, 0.5 * t_max, t_max};
    double lo_eig = 1.0, hi_eig = 1.0;
    for (std::size_t i = 0; i < n_theta; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / n_theta;
      const double r_start = base_.radius(theta);
      for (std::size_t j = 0; j < n_r; ++j) {
        const double r = r_start + (r_outer() - r_start) * j / std::max<std::size_t>(n_r - 1, 1);
        for (double t : ts) {
          const double chi = cutoff_.value(r);
          const double rho_v = rho(theta);
          const double R = r + t * rho_v * chi;
          const double R_r = 1.0 + t * rho_v * cutoff_.derivative(r);
          double det = R_r * R / r;
          if (R <= 0.0) det = std::min(det, R / r);
          ++report.samples;
          report.min_det = std::min(report.min_det, det);
          if (det > 0.0) {
            const Vec2 x = base_.center_physical() + r * Vec2(std::cos(theta), std::sin(theta));
            const auto js = jacobian(x, t);
            Eigen::SelfAdjointEigenSolver<Mat2> es(js.A);
            lo_eig = std::min(lo_eig, es.eigenvalues()(0));
            hi_eig = std::max(hi_eig, es.eigenvalues()(1));
          }
        }
      }
    }
    report.pass = report.min_det > 0.0;
    report.kappa = report.pass ? std::max(hi_eig, 1.0 / lo_eig) : INFINITY;
    return report;
  }

 private:
  HoleShape base_;
  std::vector<FourierTerm> direction_;
  std::vector<FourierTerm> harmonics_;
  double rho0_ = 0.0;
  CutoffPolynomial cutoff_;
};

// Free-function spellings of the geometry operations.
inline double radius(const HoleShape& shape, double theta) { return shape.radius(theta); }
inline bool contains(const HoleShape& shape, const Vec2& x) { return shape.contains(x); }
inline Vec2 displace(const ShapeFamily& family, const Vec2& x, double t) {
  return family.displace(x, t);
}
inline JacobianSample jacobian(const ShapeFamily& family, const Vec2& x, double t) {
  return family.jacobian(x, t);
}
inline FamilyValidity validate_family(const ShapeFamily& family, double t_max, std::size_t samples) {
  return family.validate(t_max, samples);
}

}  // namespace perfband
