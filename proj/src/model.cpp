#include "vmckit/model.hpp"

#include "vmckit/ansatz.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace vmckit {

ConfigSpace ConfigSpace::finite(Index size) {
  require(size >= 2, "ConfigSpace: finite spaces need at least two points");
  ConfigSpace s;
  s.size_ = size;
  return s;
}

ConfigSpace ConfigSpace::box(Vector lower, Vector upper) {
  require(lower.size() >= 1 && lower.size() == upper.size(), "ConfigSpace: bad box dimension");
  require(lower.allFinite() && upper.allFinite(), "ConfigSpace: non-finite box bounds");
  require((lower.array() < upper.array()).all(), "ConfigSpace: lower bound must be < upper bound");
  ConfigSpace s;
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

ConfigSpace ConfigSpace::cube(Index dim, double half_width) {
  require(half_width > 0, "ConfigSpace: half width must be positive");
  return box(Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width));
}

Index ConfigSpace::size() const {
  require(is_finite(), "ConfigSpace: size() on a continuous space");
  return size_;
}

Index ConfigSpace::dim() const { return is_finite() ? 0 : lower_.size(); }

bool ConfigSpace::contains(const Vector& x) const {
  if (is_finite()) return false;
  return x.size() == lower_.size() && (x.array() >= lower_.array()).all() &&
         (x.array() <= upper_.array()).all();
}

double ConfigSpace::volume() const {
  require(!is_finite(), "ConfigSpace: volume() on a finite space");
  return (upper_ - lower_).prod();
}

Index ConfigPoint::index() const {
  if (!is_index()) throw InvalidArgument("ConfigPoint: expected a finite-space index");
  return std::get<Index>(data_);
}

const Vector& ConfigPoint::coords() const {
  if (is_index()) throw InvalidArgument("ConfigPoint: expected continuous coordinates");
  return std::get<Vector>(data_);
}

bool operator==(const ConfigPoint& a, const ConfigPoint& b) {
  if (a.is_index() != b.is_index()) return false;
  if (a.is_index()) return a.index() == b.index();
  return a.coords().size() == b.coords().size() && a.coords() == b.coords();
}

Measure Measure::finite_weights(const Vector& weights) {
  require(weights.size() >= 2, "Measure: need at least two weights");
  require(weights.allFinite() && (weights.array() >= 0).all(), "Measure: weights must be >= 0");
  const double total = weights.sum();
  require(total > 0, "Measure: weights sum to zero");
  Measure m;
  m.kind_ = Kind::FiniteWeights;
  m.weights_ = weights / total;
  return m;
}

Measure Measure::uniform(Index size) { return finite_weights(Vector::Ones(size)); }

Measure Measure::lebesgue() {
  Measure m;
  m.kind_ = Kind::Lebesgue;
  return m;
}

Measure Measure::target_induced(ScalarField phi) {
  require(static_cast<bool>(phi), "Measure: target-induced measure needs a target");
  Measure m;
  m.kind_ = Kind::TargetInduced;
  m.target_ = std::move(phi);
  return m;
}

const Vector& Measure::weights() const {
  require(kind_ == Kind::FiniteWeights, "Measure: weights() on a non-finite measure");
  return weights_;
}

const ScalarField& Measure::target() const {
  require(kind_ == Kind::TargetInduced, "Measure: target() on a non-target measure");
  return target_;
}

std::string Measure::name() const {
  switch (kind_) {
    case Kind::FiniteWeights: return "finite";
    case Kind::Lebesgue: return "lebesgue";
    case Kind::TargetInduced: return "target";
  }
  return "?";
}

Hamiltonian Hamiltonian::matrix(Matrix h, double symmetry_tol) {
  require(h.rows() == h.cols() && h.rows() >= 2, "Hamiltonian: matrix must be square, size >= 2");
  require(h.allFinite(), "Hamiltonian: non-finite matrix entries");
  require((h - h.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol,
          "Hamiltonian: matrix is not symmetric");
  return unchecked_matrix(std::move(h));
}

Hamiltonian Hamiltonian::unchecked_matrix(Matrix h) {
  Hamiltonian out;
  out.is_matrix_ = true;
  out.h_ = std::move(h);
  out.name_ = "matrix";
  return out;
}

Hamiltonian Hamiltonian::schrodinger(ScalarField potential, std::string name) {
  require(static_cast<bool>(potential), "Hamiltonian: missing potential");
  Hamiltonian out;
  out.is_matrix_ = false;
  out.potential_ = std::move(potential);
  out.name_ = std::move(name);
  return out;
}

const Matrix& Hamiltonian::mat() const {
  require(is_matrix_, "Hamiltonian: mat() on a Schrodinger operator");
  return h_;
}

double Hamiltonian::potential(const Vector& x) const {
  require(!is_matrix_, "Hamiltonian: potential() on a matrix operator");
  return potential_(x);
}

Hamiltonian path_hamiltonian(const Vector& diagonal) {
  const Index s = diagonal.size();
  require(s >= 2, "path_hamiltonian: need at least two sites");
  Matrix h = Matrix::Zero(s, s);
  for (Index i = 0; i < s; ++i) {
    h(i, i) = diagonal(i);
    if (i > 0) {
      h(i, i) += 1.0;
      h(i, i - 1) = -1.0;
    }
    if (i + 1 < s) {
      h(i, i) += 1.0;
      h(i, i + 1) = -1.0;
    }
  }
  return Hamiltonian::matrix(std::move(h));
}

Hamiltonian harmonic_oscillator(Index dim) {
  require(dim >= 1, "harmonic_oscillator: dim >= 1");
  return Hamiltonian::schrodinger([](const Vector& x) { return 0.5 * x.squaredNorm(); },
                                  "harmonic");
}

Hamiltonian hydrogen_atom() {
  return Hamiltonian::schrodinger(
      [](const Vector& x) {
        const double r = x.norm();
        if (r == 0.0) throw NumericalError("hydrogen potential evaluated at the nucleus");
        return -1.0 / r;
      },
      "coulomb");
}

double inner_product(const Vector& f, const Vector& g, const Measure& rho) {
  return inner_product(f, g, rho.weights());
}

double norm(const Vector& f, const Measure& rho) { return std::sqrt(inner_product(f, f, rho)); }

double apply_hamiltonian(const Hamiltonian& h, const Vector& psi_values, Index x) {
  const Matrix& m = h.mat();
  require(psi_values.size() == m.rows(), "apply_hamiltonian: psi length != matrix size");
  require(x >= 0 && x < m.rows(), "apply_hamiltonian: point out of range");
  return m.row(x).dot(psi_values);
}

double apply_hamiltonian(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                         const ConfigPoint& x) {
  if (h.is_matrix()) {
    return apply_hamiltonian(h, psi_vector(psi, theta, h.mat().rows()), x.index());
  }
  const Vector& r = x.coords();
  const double lap = psi.laplacian_x(theta, x);
  return -Hamiltonian::kinetic_coefficient * lap + h.potential(r) * psi.value(theta, x);
}

Spectrum ground_truth_spectrum(const Hamiltonian& h) {
  const Matrix& m = h.mat();
  require(m.rows() <= 512, "ground_truth_spectrum: dense eigensolve limited to S <= 512");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "ground_truth_spectrum: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw NumericalError("ground_truth_spectrum: eigensolver failed");
  Spectrum out;
  out.e0 = solver.eigenvalues()(0);
  out.gap = solver.eigenvalues()(1) - solver.eigenvalues()(0);
  out.psi0 = solver.eigenvectors().col(0).normalized();
  for (Index i = 0; i < out.psi0.size(); ++i) {
    if (std::abs(out.psi0(i)) > 1e-12) {
      if (out.psi0(i) < 0) out.psi0 = -out.psi0;
      break;
    }
  }
  return out;
}

}  // namespace vmckit
