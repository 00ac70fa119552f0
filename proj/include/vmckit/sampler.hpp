#pragma once

#include "vmckit/ansatz.hpp"
#include "vmckit/model.hpp"
#include "vmckit/rng.hpp"
#include "vmckit/types.hpp"

#include <optional>
#include <vector>

namespace vmckit {

/// Born probabilities p(x) = |psi(x)|^2 / sum_y |psi(y)|^2 on a finite space.
struct BornDensity {
  Vector probabilities;

  static BornDensity from_values(const Vector& psi_values);
  static BornDensity from_ansatz(const Ansatz& psi, const Vector& theta, Index size);
};

/// n configurations plus the psi / grad psi values cached at the theta they were drawn for.
struct SampleBatch {
  std::vector<ConfigPoint> points;
  Vector psi;           ///< psi_theta(X_i), empty until evaluate() is called
  Matrix grad;          ///< column i is grad_theta psi_theta(X_i)
  Vector local_energy;  ///< filled by the VMC module when needed
  std::uint64_t rng_stream = 0;

  Index size() const { return static_cast<Index>(points.size()); }
  bool evaluated() const { return psi.size() == size(); }
  /// Fills psi and grad. Runs as a parallel map over samples.
  void evaluate(const Ansatz& ansatz, const Vector& theta);
  /// Matrix of coordinates (D x n) for continuous batches.
  Matrix coordinates() const;
};

/// n i.i.d. draws from an explicit probability vector by inverse CDF.
std::vector<Index> sample_categorical(const Vector& probabilities, Index n, Rng& rng);
/// Multinomial counts of n categorical draws, by conditional binomials.
Vector sample_counts(const Vector& probabilities, Index n, Rng& rng);

/// Exact i.i.d. Born sampling on a finite space.
SampleBatch sample_exact_finite(const BornDensity& density, Index n, Rng& rng);

/// Ensemble of independent random-walk Metropolis chains inside a box.
struct WalkerChain {
  ConfigSpace space;
  Matrix positions;  ///< D x n_walkers
  double step_size = 1.0;
  std::uint64_t accepted = 0;
  std::uint64_t proposed = 0;
  std::vector<Rng> streams;  ///< one per walker

  /// Walkers drawn uniformly from the box.
  static WalkerChain uniform(const ConfigSpace& space, Index n_walkers, double step_size,
                             std::uint64_t seed);
  /// All walkers at the same point.
  static WalkerChain point_mass(const ConfigSpace& space, const Vector& at, Index n_walkers,
                                double step_size, std::uint64_t seed);

  Index n_walkers() const { return positions.cols(); }
  double acceptance_rate() const;
  void reset_counters() { accepted = proposed = 0; }
};

/// One Metropolis sweep: every walker proposes x' = x + step * N(0, I) and accepts
/// with min(1, |f(x')|^2 / |f(x)|^2); proposals outside the box are rejected.
/// Walkers are updated in parallel, each with its own stream.
void metropolis_step(WalkerChain& chain, const ScalarField& amplitude);
void metropolis_step(WalkerChain& chain, const Ansatz& psi, const Vector& theta);

/// Advance burn_in + thinning sweeps and emit the walker ensemble as the batch.
SampleBatch sample_mcmc(WalkerChain& chain, const Ansatz& psi, const Vector& theta, Index burn_in,
                        Index thinning);

/// Doubling/halving search on the step size toward the requested acceptance rate,
/// then frozen. Counters are reset afterwards.
double tune_step_size(WalkerChain& chain, const ScalarField& amplitude, double target = 0.5,
                      Index sweeps_per_probe = 20, Index rounds = 16);

/// Lag-k sample autocorrelation: Pearson correlation of (s_t, s_{t+k}).
/// Throws NumericalError on a zero-variance segment.
double autocorrelation(const Vector& series, Index lag);

/// Lag-1 autocorrelation of the ensemble mean (first coordinate) over successive emitted batches.
struct MixingReport {
  double lag1 = 0.0;
  bool flagged = false;  ///< lag1 > threshold: the emitted batches are not close to independent
};
MixingReport mixing_diagnostic(WalkerChain& chain, const ScalarField& amplitude, Index burn_in,
                               Index thinning, Index batches, double threshold = 0.5);

/// Draws from a pre-training measure rho. Target-induced measures keep a
/// persistent Metropolis ensemble on |phi|^2 between calls.
class RhoSampler {
 public:
  struct McmcSettings {
    Index walkers = 256;
    Index burn_in = 500;
    Index thinning = 10;
    double step_size = 0.0;  ///< <= 0: tune toward 50% acceptance
  };

  RhoSampler(Measure rho, ConfigSpace space, std::uint64_t seed);
  RhoSampler(Measure rho, ConfigSpace space, std::uint64_t seed, McmcSettings mcmc);

  SampleBatch draw(Index n);
  const Measure& measure() const { return rho_; }
  const ConfigSpace& space() const { return space_; }
  std::optional<double> acceptance_rate() const;

 private:
  Measure rho_;
  ConfigSpace space_;
  Rng rng_;
  McmcSettings mcmc_;
  std::optional<WalkerChain> chain_;
  std::vector<Vector> pending_;
};

/// One-shot n draws from rho.
SampleBatch sample_rho(const Measure& rho, const ConfigSpace& space, Index n, Rng& rng);

}  // namespace vmckit
