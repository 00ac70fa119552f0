#pragma once

#include "vmckit/ansatz.hpp"
#include "vmckit/model.hpp"
#include "vmckit/sampler.hpp"
#include "vmckit/trace.hpp"
#include "vmckit/vmc.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace vmckit {

/// Supervised target phi with its sampling measure rho.
class Target {
 public:
  /// Explicit values on a finite space; rho must carry matching weights.
  static Target finite(Vector phi, Measure rho);
  static Target continuous(ScalarField phi, Measure rho, ConfigSpace space);

  double operator()(const ConfigPoint& x) const;
  Vector values(const std::vector<ConfigPoint>& points) const;

  bool is_finite() const { return space_.is_finite(); }
  const Vector& finite_values() const;
  const Measure& measure() const { return rho_; }
  const ConfigSpace& space() const { return space_; }

  std::optional<double> bound;  ///< C_phi, when known

 private:
  Target(Vector values, ScalarField fn, Measure rho, ConfigSpace space);
  Vector values_;
  ScalarField fn_;
  Measure rho_;
  ConfigSpace space_;
};

// --- Scale-invariant losses ------------------------------------------------

/// ||phi||^2 - <phi, psi>^2 / ||psi||^2 under weights w (squared sine for unit phi).
template <typename DP, typename DF, typename DW>
double si_loss(const Eigen::MatrixBase<DP>& psi, const Eigen::MatrixBase<DF>& phi,
               const Eigen::MatrixBase<DW>& w) {
  const double pp = inner_product(psi, psi, w);
  if (!(pp > 0)) throw NumericalError("si_loss: psi has zero norm under rho");
  const double fp = inner_product(phi, psi, w);
  return inner_product(phi, phi, w) - fp * fp / pp;
}

/// sin of the angle between psi and phi under weights w, in [0, 1].
template <typename DP, typename DF, typename DW>
double wavefunction_angle(const Eigen::MatrixBase<DP>& psi, const Eigen::MatrixBase<DF>& phi,
                          const Eigen::MatrixBase<DW>& w) {
  const double pp = inner_product(psi, psi, w);
  const double ff = inner_product(phi, phi, w);
  if (!(pp > 0) || !(ff > 0)) throw NumericalError("wavefunction_angle: zero norm");
  const double c = inner_product(phi, psi, w) / std::sqrt(pp * ff);
  return std::sqrt(std::max(0.0, 1.0 - c * c));
}

double si_loss(const Vector& psi, const Vector& phi, const Measure& rho);
double wavefunction_angle(const Vector& psi, const Vector& phi, const Measure& rho);
/// Plug-in versions with uniform weights over a batch drawn from rho (biased; monitoring only).
double batch_si_loss(const Vector& psi, const Vector& phi);
double batch_wavefunction_angle(const Vector& psi, const Vector& phi);

/// min over lambda of ||lambda psi - phi||^2 via the closed-form minimiser lambda* = <phi,psi>/||psi||^2.
double best_fit_residual(const Vector& psi, const Vector& phi, const Measure& rho);

/// -<phi, psi_theta>_rho / ||psi_theta||_rho by full sums on a finite space.
double objective(const Ansatz& psi, const Vector& theta, const Target& target);

/// Exact gradient -<phi, grad psi>/||psi|| + <phi,psi><psi, grad psi>/||psi||^3.
Vector exact_grad_supervised(const Ansatz& psi, const Vector& theta, const Target& target);

// --- Estimators -------------------------------------------------------------

/// a_j = -||psi||_n^2 phi_j + <phi, psi>_n psi_j.
Vector pretrain_coefficients(const Vector& psi, const Vector& phi);

/// G = 1/(z^3 (n-1)) sum_j a_j grad psi(X_j) from cached batch values.
GradientEstimate lemma2_estimator(const Vector& psi, const Vector& phi, const Matrix& grad,
                                  double z_tilde);
Vector lemma2_estimator_counts(const Vector& counts, const Vector& psi, const Vector& phi, const Matrix& grad,
                               double z_tilde);
GradientEstimate lemma2_estimator(const Ansatz& psi, const Vector& theta, const Target& target,
                                  const std::vector<ConfigPoint>& batch, double z_tilde);

/// -phi(X1) grad psi(X1) / z + phi(X2) psi(X2) psi(X1) grad psi(X1) / z^3.
/// Unbalanced in z; exists only as a negative control.
GradientEstimate plugin_biased_estimator(double psi1, double phi1, const Vector& grad1, double psi2,
                                         double phi2, double z_tilde);
GradientEstimate plugin_biased_estimator(const Ansatz& psi, const Vector& theta, const Target& target,
                                         const ConfigPoint& x1, const ConfigPoint& x2, double z_tilde);

enum class NormStrategy { SameBatch, IndependentBatch, PeriodicLargeBatch };

std::string to_string(NormStrategy s);
NormStrategy norm_strategy_from_string(const std::string& s);

struct NormEstimate {
  double z_tilde = 0.0;
  NormStrategy strategy = NormStrategy::SameBatch;
  bool refreshed = false;
};

/// Z~ for ||psi_theta||_rho by one of three strategies:
///  - SameBatch: root mean square of psi over the training batch;
///  - IndependentBatch: same, over a fresh batch of `batch_size` draws;
///  - PeriodicLargeBatch: over `batch_size` fresh draws when m % period == 0, reused otherwise.
class NormEstimator {
 public:
  NormEstimator(NormStrategy strategy, Index batch_size, Index period = 100);

  NormEstimate estimate(const Ansatz& psi, const Vector& theta, const Vector& training_psi,
                        RhoSampler& sampler, Index m);

  NormStrategy strategy() const { return strategy_; }

 private:
  NormStrategy strategy_;
  Index batch_size_;
  Index period_;
  std::optional<double> carried_;
};

// --- Training loop ----------------------------------------------------------

struct PretrainConfig {
  AnsatzPtr ansatz;
  std::optional<Target> target;
  Index n = 16;
  Schedule schedule = Schedule::constant(0.01);
  Index steps = 1000;
  std::uint64_t seed = 0;
  Vector theta0;
  NormStrategy strategy = NormStrategy::SameBatch;
  Index norm_batch = 0;  ///< 0: use n (IndependentBatch) or 100 (PeriodicLargeBatch)
  Index period = 100;    ///< K for PeriodicLargeBatch
  /// Fixed evaluation set for continuous targets (si_loss / angle columns).
  Index eval_points = 2048;
  double divergence_limit = 1e8;
  RhoSampler::McmcSettings mcmc;
};

/// SGD with the directionally unbiased estimator.
TrainResult pretrain_train(const PretrainConfig& config);

/// Evaluation points and weights approximating rho: exact on finite spaces, a
/// midpoint grid for 1-D Lebesgue boxes, otherwise draws from rho with equal weights.
struct EvaluationSet {
  std::vector<ConfigPoint> points;
  Vector weights;
};
EvaluationSet make_evaluation_set(const Target& target, Index size, std::uint64_t seed);

// --- Orbital (determinant) pre-training ---------------------------------------

/// Network outputs for a batch: y[b][k] is the N x N matrix of determinant k at sample b.
using OrbitalBatch = std::vector<std::vector<Matrix>>;
/// Target orbital values: phi[b](i, j) = phi_j(x_{b,i}).
using OrbitalTargets = std::vector<Matrix>;

struct LossWithGrad {
  double value = 0.0;
  OrbitalBatch grad;  ///< dL/dy, same shape as y
};

/// Sum over determinants k and orbitals j of 1 - (y_col . phi_col)^2 / (|y_col|^2 |phi_col|^2),
/// where a column stacks (sample b, electron i). Invariant to rescaling any y column.
double columnwise_si_loss(const OrbitalBatch& y, const OrbitalTargets& phi);
LossWithGrad columnwise_si_loss_with_grad(const OrbitalBatch& y, const OrbitalTargets& phi);

/// sum_k sum_b sum_ij (y - phi)^2.
double mse_orbital_loss(const OrbitalBatch& y, const OrbitalTargets& phi);
LossWithGrad mse_orbital_loss_with_grad(const OrbitalBatch& y, const OrbitalTargets& phi);

/// phi_j(x) = H_j(x) exp(-x^2/2) with physicists' Hermite polynomials, j = 0, 1, ...
double hermite_orbital(Index j, double x);
/// phi(x) = det[phi_j(x_i)] for N electrons on a line.
double slater_target(const Vector& x);
Matrix slater_orbitals(const Vector& x);

enum class OrbitalLoss { ScaleInvariant, Mse };
std::string to_string(OrbitalLoss l);

struct OrbitalPretrainConfig {
  Index electrons = 2;
  Index determinants = 1;
  std::vector<Index> hidden = {16, 16};
  Index batch = 256;
  Index steps = 1000;
  Schedule schedule = Schedule::constant(0.05);
  OrbitalLoss loss = OrbitalLoss::ScaleInvariant;
  std::uint64_t seed = 0;
  bool sample_from_target = true;  ///< rho = |phi|^2; otherwise Lebesgue on the box
  double half_width = 6.0;
  Index eval_points = 2048;
  /// Optional fixed initial parameters (otherwise drawn from the seed).
  Vector theta0;
  RhoSampler::McmcSettings mcmc;
};

struct OrbitalPretrainResult {
  Vector theta;
  std::vector<TraceRow> trace;
  double final_angle = 0.0;  ///< after the last update; trace rows are taken before each update
};

/// Fits the orbital network to the Slater target with the chosen loss and plain
/// SGD, tracing the sine of the angle between sum_k det y^(k) and the target under |phi|^2.
OrbitalPretrainResult orbital_pretrain(const OrbitalPretrainConfig& config);

}  // namespace vmckit
