#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace perfband {

// V(xi) = c0 + sum_j c_j cos(2 pi m_j . xi + phi_j), xi fractional. Real and Z^2-periodic.
struct PotentialSpec {
  struct Term {
    double c = 0.0;
    std::array<int, 2> m{0, 0};
    double phi = 0.0;
  };

  double c0 = 0.0;
  std::vector<Term> terms;

  double operator()(const Eigen::Vector2d& frac) const {
    double v = c0;
    for (const auto& term : terms) {
      v += term.c * std::cos(2.0 * std::numbers::pi * (term.m[0] * frac.x() + term.m[1] * frac.y()) +
                             term.phi);
    }
    return v;
  }

  // Triangle-inequality bound on sup |V|.
  double sup_bound() const {
    double s = std::abs(c0);
    for (const auto& term : terms) s += std::abs(term.c);
    return s;
  }

  bool is_zero() const {
    if (c0 != 0.0) return false;
    for (const auto& term : terms) {
      if (term.c != 0.0) return false;
    }
    return true;
  }

  std::string describe() const {
    std::ostringstream out;
    out.precision(17);
    out << c0;
    for (const auto& term : terms) {
      out << " + " << term.c << "*cos(2pi*(" << term.m[0] << "," << term.m[1] << ").x + "
          << term.phi << ")";
    }
    return out.str();
  }
};

}  // namespace perfband
