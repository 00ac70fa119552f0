#pragma once

#include "vmckit/types.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>

namespace vmckit {

class Ansatz;

/// Configuration space: either a finite set {0, ..., S-1} or an axis-aligned box in R^D.
class ConfigSpace {
 public:
  static ConfigSpace finite(Index size);
  static ConfigSpace box(Vector lower, Vector upper);
  /// Symmetric cube [-half_width, half_width]^dim.
  static ConfigSpace cube(Index dim, double half_width);

  bool is_finite() const { return size_ > 0; }
  Index size() const;
  Index dim() const;
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  bool contains(const Vector& x) const;
  double volume() const;

 private:
  ConfigSpace() = default;
  Index size_ = 0;
  Vector lower_;
  Vector upper_;
};

/// A point of a ConfigSpace: an index on finite spaces, coordinates on boxes.
class ConfigPoint {
 public:
  ConfigPoint(Index index) : data_(index) {}  // NOLINT(google-explicit-constructor)
  ConfigPoint(Vector coords) : data_(std::move(coords)) {}  // NOLINT(google-explicit-constructor)

  bool is_index() const { return std::holds_alternative<Index>(data_); }
  Index index() const;
  const Vector& coords() const;

  friend bool operator==(const ConfigPoint& a, const ConfigPoint& b);

 private:
  std::variant<Index, Vector> data_;
};

using ScalarField = std::function<double(const Vector&)>;

/// Probability measure rho used by the supervised objective.
class Measure {
 public:
  enum class Kind { FiniteWeights, Lebesgue, TargetInduced };

  /// Weights are normalised here; they must be nonnegative with a positive sum.
  static Measure finite_weights(const Vector& weights);
  static Measure uniform(Index size);
  /// Normalised Lebesgue measure on a box (uniform distribution).
  static Measure lebesgue();
  /// d rho proportional to |phi|^2 dx.
  static Measure target_induced(ScalarField phi);

  Kind kind() const { return kind_; }
  const Vector& weights() const;
  const ScalarField& target() const;
  std::string name() const;

 private:
  Measure() = default;
  Kind kind_ = Kind::Lebesgue;
  Vector weights_;
  ScalarField target_;
};

/// Real symmetric operator: a dense matrix on a finite space, or -1/2 Laplacian + V on a box.
class Hamiltonian {
 public:
  static Hamiltonian matrix(Matrix h, double symmetry_tol = 1e-12);
  /// Skips the symmetry check. Only for negative-control fixtures.
  static Hamiltonian unchecked_matrix(Matrix h);
  static Hamiltonian schrodinger(ScalarField potential, std::string name = "custom");

  static constexpr double kinetic_coefficient = 0.5;

  bool is_matrix() const { return is_matrix_; }
  const Matrix& mat() const;
  double potential(const Vector& x) const;
  const std::string& name() const { return name_; }

 private:
  Hamiltonian() = default;
  bool is_matrix_ = true;
  Matrix h_;
  ScalarField potential_;
  std::string name_;
};

// Common Hamiltonians used by the experiments and fixtures.

/// Path-graph Laplacian plus a diagonal potential.
Hamiltonian path_hamiltonian(const Vector& diagonal);
Hamiltonian harmonic_oscillator(Index dim = 1);
/// -1/r Coulomb potential of a unit nucleus at the origin.
Hamiltonian hydrogen_atom();

/// Weighted inner product sum_x w(x) f(x) g(x) over a full finite space.
template <typename DF, typename DG, typename DW>
typename DF::Scalar inner_product(const Eigen::MatrixBase<DF>& f, const Eigen::MatrixBase<DG>& g,
                                  const Eigen::MatrixBase<DW>& w) {
  require(f.size() == g.size() && f.size() == w.size(), "inner_product: length mismatch");
  require(f.allFinite() && g.allFinite(), "inner_product: non-finite values");
  return (w.array() * f.array() * g.array()).sum();
}

/// Monte Carlo estimate of <f, g>_rho from samples of rho: the sample mean of f*g.
template <typename DF, typename DG>
typename DF::Scalar batch_inner_product(const Eigen::MatrixBase<DF>& f,
                                        const Eigen::MatrixBase<DG>& g) {
  require(f.size() == g.size(), "batch_inner_product: length mismatch");
  require(f.size() > 0, "batch_inner_product: empty batch");
  require(f.allFinite() && g.allFinite(), "batch_inner_product: non-finite values");
  return (f.array() * g.array()).sum() / static_cast<typename DF::Scalar>(f.size());
}

double inner_product(const Vector& f, const Vector& g, const Measure& rho);
double norm(const Vector& f, const Measure& rho);

/// (H psi)(x). Matrix case evaluates psi on every point of the space.
double apply_hamiltonian(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                         const ConfigPoint& x);
/// Matrix case with the psi vector already evaluated.
double apply_hamiltonian(const Hamiltonian& h, const Vector& psi_values, Index x);

struct Spectrum {
  double e0 = 0.0;
  Vector psi0;
  /// E1 - E0; zero signals a degenerate ground state.
  double gap = 0.0;
};

/// Lowest eigenpair of a dense symmetric matrix, first nonzero component positive.
Spectrum ground_truth_spectrum(const Hamiltonian& h);

}  // namespace vmckit
