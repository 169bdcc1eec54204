#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "perfband/geometry.hpp"

namespace perfband {

enum class Mode { NoHole, Regrid, Pullback };

inline std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::NoHole: return "nohole";
    case Mode::Regrid: return "regrid";
    case Mode::Pullback: return "pullback";
  }
  return "unknown";
}

// How the hole enters the discretization: regrid classifies nodes against the perturbed
// boundary; pullback keeps the base grid and carries h_t in the coefficients.
struct Deformation {
  Mode mode = Mode::NoHole;
  double t = 0.0;
  std::optional<ShapeFamily> family;
};

// Periodic N x N node grid on the unit cell. Node (i1, i2) sits at fractional (i1/N, i2/N)
// and has flat index i1 + N*i2. Element (i1, i2) spans nodes (i1..i1+1, i2..i2+1) mod N.
class TorusGrid {
 public:
  int n() const noexcept { return n_; }
  std::size_t node_count() const noexcept { return dirichlet_.size(); }
  std::size_t free_count() const noexcept { return free_nodes_.size(); }
  const Lattice2& lattice() const noexcept { return lattice_; }
  Mode mode() const noexcept { return mode_; }
  double t() const noexcept { return t_; }
  const std::optional<HoleShape>& hole() const noexcept { return hole_; }
  const std::optional<ShapeFamily>& family() const noexcept { return family_; }

  int node(int i1, int i2) const { return wrap(i1) + n_ * wrap(i2); }
  bool is_dirichlet(int node) const { return dirichlet_[node] != 0; }
  // -1 for Dirichlet nodes.
  int free_index(int node) const { return free_index_[node]; }
  const std::vector<int>& free_nodes() const noexcept { return free_nodes_; }
  std::size_t dirichlet_count() const { return node_count() - free_count(); }

  // An element is kept while any corner is FREE; its DIRICHLET corners carry zero values.
  bool element_retained(int i1, int i2) const {
    return !is_dirichlet(node(i1, i2)) || !is_dirichlet(node(i1 + 1, i2)) ||
           !is_dirichlet(node(i1, i2 + 1)) || !is_dirichlet(node(i1 + 1, i2 + 1));
  }

  Vec2 node_fractional(int node) const {
    return Vec2(double(node % n_) / n_, double(node / n_) / n_);
  }

  int wrap(int i) const { return ((i % n_) + n_) % n_; }

  // Zero-extends a vector on FREE nodes to the full grid.
  template <class Vector>
  Vector zero_extend(const Vector& u) const {
    Vector full = Vector::Zero(static_cast<Eigen::Index>(node_count()));
    for (std::size_t f = 0; f < free_nodes_.size(); ++f) full(free_nodes_[f]) = u(f);
    return full;
  }

  template <class Vector>
  Vector restrict_to_free(const Vector& full) const {
    Vector u(static_cast<Eigen::Index>(free_count()));
    for (std::size_t f = 0; f < free_nodes_.size(); ++f) u(f) = full(free_nodes_[f]);
    return u;
  }

  std::string describe_hole() const {
    if (!hole_ || mode_ == Mode::NoHole) return "none";
    std::ostringstream out;
    out.precision(17);
    out << "center=(" << hole_->center().x() << "," << hole_->center().y() << ") r0=" << hole_->r0();
    for (const auto& term : hole_->coeffs()) out << " [" << term.m << "," << term.a << "," << term.b << "]";
    if (mode_ != Mode::NoHole && t_ != 0.0) out << " t=" << t_ << " (" << to_string(mode_) << ")";
    return out.str();
  }

 private:
  friend TorusGrid build_grid(const Lattice2&, const std::optional<HoleShape>&, int, const Deformation&);

  int n_ = 0;
  Lattice2 lattice_;
  Mode mode_ = Mode::NoHole;
  double t_ = 0.0;
  std::optional<HoleShape> hole_;
  std::optional<ShapeFamily> family_;
  std::vector<std::uint8_t> dirichlet_;
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
};

inline TorusGrid build_grid(const Lattice2& lattice, const std::optional<HoleShape>& hole, int n,
                            const Deformation& deformation = {}) {
  if (n < 8) throw std::invalid_argument("grid needs N >= 8");
  TorusGrid grid;
  grid.n_ = n;
  grid.lattice_ = lattice;
  grid.mode_ = deformation.mode;
  grid.t_ = deformation.t;
  grid.family_ = deformation.family;

  const bool perforated = deformation.mode != Mode::NoHole;
  if (perforated) {
    if (deformation.mode == Mode::Pullback && !deformation.family) {
      throw std::invalid_argument("pullback mode requires a shape family");
    }
    if (deformation.mode == Mode::Regrid && deformation.t != 0.0 && !deformation.family) {
      throw std::invalid_argument("regrid with t != 0 requires a shape family");
    }
    grid.hole_ = deformation.family ? std::optional<HoleShape>(deformation.family->base()) : hole;
    if (!grid.hole_) throw std::invalid_argument("perforated mode requires a hole");
    if (grid.hole_->lattice().basis() != lattice.basis()) {
      throw std::invalid_argument("hole and grid use different lattices");
    }
  } else {
    grid.t_ = 0.0;
  }

  const std::size_t nodes = std::size_t(n) * n;
  grid.dirichlet_.assign(nodes, 0);
  if (perforated) {
    const HoleShape& shape = *grid.hole_;
    // Offsets in grid units keep mirror-symmetric nodes bitwise symmetric.
    const double c1 = shape.center().x() * n;
    const double c2 = shape.center().y() * n;
    auto wrap_units = [n](double v) { return v - n * std::floor(v / n + 0.5); };
    for (int i2 = 0; i2 < n; ++i2) {
      for (int i1 = 0; i1 < n; ++i1) {
        const Vec2 d_frac(wrap_units(i1 - c1) / n, wrap_units(i2 - c2) / n);
        const Vec2 d = lattice.to_physical(d_frac);
        bool inside;
        if (deformation.mode == Mode::Regrid && deformation.t != 0.0) {
          const double r = d.norm();
          inside = r == 0.0 ||
                   r < deformation.family->perturbed_radius(std::atan2(d.y(), d.x()), deformation.t);
        } else {
          inside = shape.contains_offset(d);
        }
        grid.dirichlet_[grid.node(i1, i2)] = inside ? 1 : 0;
      }
    }
  }

  grid.free_index_.assign(nodes, -1);
  for (std::size_t v = 0; v < nodes; ++v) {
    if (!grid.dirichlet_[v]) {
      grid.free_index_[v] = static_cast<int>(grid.free_nodes_.size());
      grid.free_nodes_.push_back(static_cast<int>(v));
    }
  }
  if (grid.free_nodes_.empty()) throw HoleTooLarge("hole covers every grid node");

  return grid;
}

}  // namespace perfband
