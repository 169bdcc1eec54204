#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace perfband {

// Base for every error the library reports by name.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The shape-perturbation map folds over (det Dh_t <= 0) at a queried point.
class DegenerateMap : public Error {
 public:
  using Error::Error;
};

// Hole leaves the unit cell, swallows the whole grid, or isolates free nodes.
class HoleTooLarge : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, std::vector<double> residuals, int iterations)
      : Error(what), residuals_(std::move(residuals)), iterations_(iterations) {}

  const std::vector<double>& residuals() const noexcept { return residuals_; }
  int iterations() const noexcept { return iterations_; }

 private:
  std::vector<double> residuals_;
  int iterations_;
};

class SimplicityLost : public Error {
 public:
  using Error::Error;
};

// Malformed configuration text.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed configuration that violates a constraint. Carries the field path.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& constraint)
      : Error(field + ": " + constraint), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace perfband
