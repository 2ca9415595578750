#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace layerspectra {

// Base class for every failure raised by the toolkit. The CLI maps the
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Adaptive quadrature or an iterative solver ran out of refinements.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double estimate, double error_bound)
      : Error(what), estimate_(estimate), error_bound_(error_bound) {}
  double estimate() const { return estimate_; }
  double error_bound() const { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

class IntegrationBlowup : public Error {
 public:
  IntegrationBlowup(const std::string& what, std::size_t last_valid_node)
      : Error(what), last_valid_node_(last_valid_node) {}
  std::size_t last_valid_node() const { return last_valid_node_; }

 private:
  std::size_t last_valid_node_;
};

// The meridian degenerates (r <= 0 away from the pole).
class GeometryError : public Error {
 public:
  GeometryError(const std::string& what, std::size_t node) : Error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

// Two independent evaluation routes disagree beyond their error bounds.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// No sign-definite region of k_s + 2 k_theta to carry the perturbation bump.
class NoBumpError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace layerspectra
