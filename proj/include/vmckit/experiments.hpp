#pragma once

#include "vmckit/config.hpp"
#include "vmckit/diagnostics.hpp"
#include "vmckit/pretrain.hpp"
#include "vmckit/trace.hpp"
#include "vmckit/vmc.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vmckit {

// --- Fixtures shared by the CLI, the acceptance suite and the tests -----------

/// Diagonal used when a finite system does not specify one: uniform in [-1, 1] from a fixed stream.
Vector default_diagonal(Index size);
/// S x d table with entries cos(pi (k + 1) (x + 1/2) / S).
Matrix cosine_feature_table(Index size, Index features);
/// Random phi normalised to ||phi||_rho = 1 under the uniform measure.
Vector random_unit_target(Index size, std::uint64_t seed);

// --- Runs --------------------------------------------------------------------

struct RunOutput {
  Trace trace;
  Vector theta;
  std::string ansatz_kind;
  bool diverged = false;
  std::string message;
  std::vector<std::string> summary;
};

/// vmc-run: finite | ho1d | hatom systems.
RunOutput run_vmc(const ExperimentConfig& cfg);
/// pretrain-run: pretrain_finite | pretrain_gauss | pretrain_toy systems.
RunOutput run_pretrain(const ExperimentConfig& cfg);

struct CompareOutput {
  std::vector<RunOutput> si;
  std::vector<RunOutput> mse;
  std::vector<double> si_angles;
  std::vector<double> mse_angles;
  double si_median = 0.0;
  double mse_median = 0.0;
  std::vector<std::string> summary;
};

/// compare-pretrain: both orbital losses with identical seeds, initialisation and batches.
CompareOutput compare_pretrain(const ExperimentConfig& cfg);

double median(std::vector<double> v);

// --- Checks ------------------------------------------------------------------

struct CheckResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

enum class Injection { None, AsymmetricH, Plugin };

CheckResult check_vmc_estimator_unbiased(Index fixtures, std::uint64_t seed);
CheckResult check_zero_mean_local_energy_gradient(Index fixtures, std::uint64_t seed, bool asymmetric = false);
CheckResult check_directional_unbiasedness(Index fixtures, std::uint64_t seed, bool use_plugin = false);
CheckResult check_plugin_counterexample();
CheckResult check_energy_gradient_formula(Index fixtures, std::uint64_t seed);
CheckResult check_supervised_gradient_formula(Index fixtures, std::uint64_t seed);
CheckResult check_scale_invariance(std::uint64_t seed);
CheckResult check_moment_scale_invariance(std::uint64_t seed);
CheckResult check_orbital_losses();
CheckResult check_best_fit_identity(std::uint64_t seed);
CheckResult check_spectrum_residual(std::uint64_t seed);
CheckResult check_ansatz_derivatives(std::uint64_t seed);
CheckResult check_born_scale_invariance(std::uint64_t seed);
CheckResult check_hamiltonian_symmetry(std::uint64_t seed);

/// Every check above with default fixture counts.
std::vector<CheckResult> run_verify(Injection injection = Injection::None);

// --- Report ------------------------------------------------------------------

struct ReportFile {
  std::string name;
  std::string content;
};

struct ReportOutput {
  std::string text;
  std::vector<ReportFile> files;
};

/// Plots and a text summary for one or more traces; deterministic for fixed input.
ReportOutput build_report(const std::vector<Trace>& traces, const std::vector<std::string>& names,
                          Index burn_in = 200);

}  // namespace vmckit
