#pragma once

#include "vmckit/ansatz.hpp"
#include "vmckit/model.hpp"
#include "vmckit/pretrain.hpp"
#include "vmckit/trace.hpp"
#include "vmckit/vmc.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vmckit {

/// Prefix minima.
Vector running_min(const Vector& series);

struct ConvergenceFit {
  double slope = 0.0;
  double intercept = 0.0;
  Index burn_in_step = 0;
  Index points = 0;
};

/// Least squares of log(value) against log(step). Entry i of `series` belongs to
/// iteration count i + 1; only entries with i >= burn_in enter the fit.
ConvergenceFit loglog_slope(const Vector& series, Index burn_in = 200);
/// Same with explicit abscissae (e.g. batch sizes).
ConvergenceFit loglog_fit(const Vector& x, const Vector& y);

/// Angle in radians between two nonzero vectors, accurate near 0 and pi.
double vector_angle(const Vector& a, const Vector& b);

/// |G_curr - G_prev| / |theta_curr - theta_prev|.
double lipschitz_estimate(const Vector& g_prev, const Vector& g_curr, const Vector& theta_prev,
                          const Vector& theta_curr);

struct VmcMoments {
  double e4 = 0.0;     ///< || H psi / psi ||_4
  double de2 = 0.0;    ///< || grad_theta (H psi) / psi ||_2
  double dpsi4 = 0.0;  ///< || grad_theta psi / psi ||_4
  std::optional<double> hess2;  ///< || Hess_theta psi / psi ||_2 (spectral norm); absent without a Hessian
  /// Standard errors of the Monte Carlo estimates (empty when exact).
  std::optional<Vector> stderr_;
};

struct PretrainMoments {
  double v = 0.0;  ///< || psi^2 ||^(1/2) / || psi ||
  double g = 0.0;  ///< || |grad psi|^2 ||^(1/2) / || psi ||
  std::optional<double> h;  ///< || ||Hess psi||_2^2 ||^(1/2) / || psi ||
};

/// VMC moment norms under p_theta by full sums on a finite space.
VmcMoments vmc_moments_exact(const Hamiltonian& h, const Ansatz& psi, const Vector& theta);
/// Monte Carlo version over a batch drawn from p_theta; grad_theta (H psi) is taken
/// by central differences in theta when H is a Schrodinger operator.
VmcMoments vmc_moments_batch(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                             const std::vector<ConfigPoint>& batch);

/// Pre-training moment norms under rho by full sums on a finite space.
PretrainMoments pretrain_moments_exact(const Ansatz& psi, const Vector& theta, const Measure& rho);
/// Plug-in version over a batch drawn from rho.
PretrainMoments pretrain_moments_batch(const Ansatz& psi, const Vector& theta,
                                       const std::vector<ConfigPoint>& batch);

/// Running maximum of the moments over a run: the empirical C_psi.
class MomentTracker {
 public:
  void observe(const VmcMoments& m);
  void observe(const PretrainMoments& m);
  double c_psi() const { return c_psi_; }

 private:
  double c_psi_ = 0.0;
};

struct VarianceRow {
  Index n = 0;
  double variance = 0.0;   ///< E|G - mean G|^2 over the repetitions
  double mean_norm = 0.0;  ///< |mean G|
  double mean_stderr = 0.0;  ///< sqrt(variance / reps)
};

struct VarianceTable {
  std::vector<VarianceRow> rows;
  ConvergenceFit fit;  ///< log Var against log n
};

/// Unbiased VMC estimator on a finite space with exact Born sampling.
VarianceTable variance_vs_n_vmc(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                                const std::vector<Index>& n_list, Index reps, std::uint64_t seed);
/// Unbiased pre-training estimator on a finite target with the given norm strategy.
VarianceTable variance_vs_n_pretrain(const Ansatz& psi, const Vector& theta, const Target& target,
                                     NormStrategy strategy, const std::vector<Index>& n_list,
                                     Index reps, std::uint64_t seed);

struct LedgerReport {
  Index steps = 0;
  double loss_gap = 0.0;      ///< L(theta_0) - inf L
  double c_r = 1.0;           ///< max over the run of max(r, 1/r), r = ||psi|| / Z~
  double lhs = 0.0;           ///< sum eta_m |grad L|^2
  double sum_eta2_over_n = 0.0;
  double c_hat = 0.0;         ///< fitted on the first half
  double max_ratio = 0.0;     ///< max over the second half of LHS / RHS
  double lhs_growth = 0.0;    ///< log-log slope of LHS over the second half (0 when LHS is flat)
  bool proxy = false;         ///< |G| used instead of exact |grad L|
  bool passed = false;
  std::string detail;
};

/// Split-sample check of sum_{m<M} eta_m |grad L_m|^2 <= 2 C_r^2 (L_0 - inf L) + C sum eta_m^2 / n:
/// C is fitted on the first half of the trace, the inequality verified on the second.
/// Uses exact_grad_norm when the trace has it; otherwise grad_norm (flagged as proxy).
LedgerReport theorem_ledger(const Trace& trace, Index n, double loss_gap, bool use_norm_ratio = false);

struct LipschitzReport {
  double c_psi = 0.0;
  double c_prime = 0.0;    ///< fitted on the first half: max L_est / (C_psi^4 + 1)
  double max_ratio = 0.0;  ///< second half: max L_est / (C' (C_psi^4 + 1))
  bool passed = false;
};

/// Checks the per-step Lipschitz estimates against C'(C_psi^4 + 1).
LipschitzReport lipschitz_ledger(const Vector& lipschitz, double c_psi);

}  // namespace vmckit
