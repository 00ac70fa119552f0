#pragma once

#include "vmckit/ansatz.hpp"
#include "vmckit/model.hpp"
#include "vmckit/sampler.hpp"
#include "vmckit/trace.hpp"
#include "vmckit/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vmckit {

enum class EstimatorKind { VmcUnbiased, PretrainUnbiased, PretrainPlugin };

std::string to_string(EstimatorKind kind);

struct GradientEstimate {
  Vector g;
  Index n = 0;
  EstimatorKind kind = EstimatorKind::VmcUnbiased;
};

struct EnergyReport {
  double l_hat = 0.0;
  std::optional<double> exact;
  Vector per_sample;
};

/// Learning-rate schedule eta_m, m = 0, 1, 2, ...
class Schedule {
 public:
  enum class Kind { Constant, InverseSqrt, H4Style };

  static Schedule constant(double eta0);
  /// eta_m = eta0 sqrt(n / (m + 1)).
  static Schedule inverse_sqrt(double eta0, Index n);
  /// eta_m = eta0 / sqrt(1 + m / m0).
  static Schedule h4_style(double eta0, double m0);

  double operator()(Index m) const;
  Kind kind() const { return kind_; }
  double eta0() const { return eta0_; }
  double scale() const { return scale_; }
  std::string describe() const;

 private:
  Schedule(Kind kind, double eta0, double scale) : kind_(kind), eta0_(eta0), scale_(scale) {}
  Kind kind_;
  double eta0_;
  double scale_;  // n for InverseSqrt, m0 for H4Style
};

/// (H psi)(x) / psi(x). Throws NumericalError where psi(x) = 0.
double local_energy(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                    const ConfigPoint& x);

/// Local energies at every point of a batch (parallel map; the matrix case
/// evaluates the psi vector once).
Vector local_energies(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                      const std::vector<ConfigPoint>& points);

/// Rayleigh quotient psi^T H psi / psi^T psi by full sums.
double exact_energy(const Hamiltonian& h, const Ansatz& psi, const Vector& theta);

/// 2 sum_x p(x) (E(x) - L) grad log|psi(x)| by full summation; points with psi = 0 carry no mass.
Vector exact_grad_energy(const Hamiltonian& h, const Ansatz& psi, const Vector& theta);

/// grad_theta E_theta(x) = (grad(H psi)(x) psi(x) - (H psi)(x) grad psi(x)) / psi(x)^2.
Vector local_energy_gradient(const Hamiltonian& h, const Ansatz& psi, const Vector& theta, Index x);

/// Unbiased estimator from local energies and log-derivative columns:
/// G = 2/(n-1) sum_i (E_i - mean E) grad log|psi(X_i)|.
GradientEstimate grad_estimator(const Vector& energies, const Matrix& grad_log);
/// Same estimator for a batch given as multiplicities over distinct states.
Vector grad_estimator_counts(const Vector& counts, const Vector& energies, const Matrix& grad_log);

/// Same estimator on a batch whose psi/grad cache and local energies are filled.
GradientEstimate grad_estimator(const SampleBatch& batch);

struct VmcConfig {
  enum class Sampler { Exact, Metropolis };

  AnsatzPtr ansatz;
  Hamiltonian hamiltonian = Hamiltonian::matrix(Matrix::Identity(2, 2));
  /// Box for continuous problems; ignored for matrix Hamiltonians.
  std::optional<ConfigSpace> space;
  Sampler sampler = Sampler::Exact;
  double step_size = 0.0;  ///< <= 0 tunes toward 50% acceptance before training
  Index burn_in = 500;
  Index thinning = 10;
  Index n = 16;
  Schedule schedule = Schedule::constant(0.01);
  Index steps = 1000;
  std::uint64_t seed = 0;
  Vector theta0;
  double divergence_limit = 1e8;
};

struct TrainResult {
  Vector theta;
  std::vector<TraceRow> trace;
  bool diverged = false;
  std::string message;
  /// Parameter vector at each recorded step (only when record_parameters is set).
  std::vector<Vector> parameters;
};

/// Plain SGD with the unbiased VMC estimator: sample from p_theta, estimate, step.
TrainResult vmc_train(const VmcConfig& config, bool record_parameters = false);

}  // namespace vmckit
