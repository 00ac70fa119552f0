#include "vmckit/sampler.hpp"

#include "vmckit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vmckit {

BornDensity BornDensity::from_values(const Vector& psi_values) {
  require(psi_values.allFinite(), "BornDensity: non-finite psi values");
  const Vector sq = psi_values.array().square();
  const double total = sq.sum();
  if (!(total > 0)) throw NumericalError("BornDensity: psi vanishes everywhere");
  return BornDensity{sq / total};
}

BornDensity BornDensity::from_ansatz(const Ansatz& psi, const Vector& theta, Index size) {
  return from_values(psi_vector(psi, theta, size));
}

void SampleBatch::evaluate(const Ansatz& ansatz, const Vector& theta) {
  const Index n = size();
  psi.resize(n);
  grad.resize(ansatz.num_params(), n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Vector g;
    psi(static_cast<Index>(i)) = ansatz.value_and_grad(theta, points[i], g);
    grad.col(static_cast<Index>(i)) = g;
  });
}

Matrix SampleBatch::coordinates() const {
  require(!points.empty() && !points.front().is_index(), "SampleBatch: not a continuous batch");
  Matrix out(points.front().coords().size(), size());
  for (Index i = 0; i < size(); ++i) out.col(i) = points[static_cast<std::size_t>(i)].coords();
  return out;
}

std::vector<Index> sample_categorical(const Vector& probabilities, Index n, Rng& rng) {
  require(n >= 0, "sample_categorical: n >= 0");
  require(probabilities.size() >= 1 && (probabilities.array() >= 0).all(),
          "sample_categorical: invalid probabilities");
  std::vector<double> cdf(static_cast<std::size_t>(probabilities.size()));
  std::partial_sum(probabilities.data(), probabilities.data() + probabilities.size(), cdf.begin());
  const double total = cdf.back();
  if (!(total > 0)) throw NumericalError("sample_categorical: zero total probability");
  std::vector<Index> out(static_cast<std::size_t>(n));
  for (auto& idx : out) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) it = std::prev(cdf.end());
    // skip trailing zero-probability points that share the final CDF value
    while (it != cdf.begin() && probabilities(std::distance(cdf.begin(), it)) == 0.0) --it;
    idx = static_cast<Index>(std::distance(cdf.begin(), it));
  }
  return out;
}

Vector sample_counts(const Vector& probabilities, Index n, Rng& rng) {
  require(n >= 0, "sample_counts: n >= 0");
  require(probabilities.size() >= 1 && (probabilities.array() >= 0).all(), "sample_counts: invalid probabilities");
  double mass = probabilities.sum();
  if (!(mass > 0)) throw NumericalError("sample_counts: zero total probability");
  Vector counts = Vector::Zero(probabilities.size());
  Index left = n;
  for (Index x = 0; x < probabilities.size() && left > 0; ++x) {
    const double p = probabilities(x);
    if (p <= 0) continue;
    Index c = left;
    if (p < mass) {
      std::binomial_distribution<Index> bin(left, std::min(1.0, p / mass));
      c = bin(rng.engine());
    }
    counts(x) = static_cast<double>(c);
    left -= c;
    mass -= p;
  }
  return counts;
}

SampleBatch sample_exact_finite(const BornDensity& density, Index n, Rng& rng) {
  SampleBatch batch;
  for (Index i : sample_categorical(density.probabilities, n, rng)) batch.points.emplace_back(i);
  return batch;
}

// ---------------------------------------------------------------------------
// Metropolis

WalkerChain WalkerChain::uniform(const ConfigSpace& space, Index n_walkers, double step_size,
                                 std::uint64_t seed) {
  require(!space.is_finite(), "WalkerChain: needs a continuous space");
  require(n_walkers >= 1, "WalkerChain: n_walkers >= 1");
  require(step_size > 0, "WalkerChain: step_size > 0");
  WalkerChain chain{space, Matrix(space.dim(), n_walkers), step_size, 0, 0,
                    make_streams(seed, static_cast<std::size_t>(n_walkers))};
  for (Index w = 0; w < n_walkers; ++w) {
    auto& rng = chain.streams[static_cast<std::size_t>(w)];
    for (Index k = 0; k < space.dim(); ++k)
      chain.positions(k, w) = space.lower()(k) + rng.uniform() * (space.upper()(k) - space.lower()(k));
  }
  return chain;
}

WalkerChain WalkerChain::point_mass(const ConfigSpace& space, const Vector& at, Index n_walkers,
                                    double step_size, std::uint64_t seed) {
  require(space.contains(at), "WalkerChain: start point outside the box");
  WalkerChain chain = uniform(space, n_walkers, step_size, seed);
  chain.positions.colwise() = at;
  return chain;
}

double WalkerChain::acceptance_rate() const {
  return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
}

void metropolis_step(WalkerChain& chain, const ScalarField& amplitude) {
  const Index n = chain.n_walkers();
  const Index dim = chain.positions.rows();
  std::vector<unsigned char> accepted(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t w) {
    auto& rng = chain.streams[w];
    const Index col = static_cast<Index>(w);
    const Vector current = chain.positions.col(col);
    const double now = amplitude(current);
    if (now == 0.0 || !std::isfinite(now))
      throw NumericalError("metropolis_step: walker " + std::to_string(w) +
                           " sits where the amplitude is zero or non-finite");
    Vector proposal(dim);
    for (Index k = 0; k < dim; ++k) proposal(k) = current(k) + chain.step_size * rng.normal();
    const double u = rng.uniform();
    if (!chain.space.contains(proposal)) return;
    const double next = amplitude(proposal);
    const double ratio = (next * next) / (now * now);
    if (u < ratio) {
      chain.positions.col(col) = proposal;
      accepted[w] = 1;
    }
  });
  chain.proposed += static_cast<std::uint64_t>(n);
  chain.accepted += static_cast<std::uint64_t>(std::count(accepted.begin(), accepted.end(), 1));
}

void metropolis_step(WalkerChain& chain, const Ansatz& psi, const Vector& theta) {
  metropolis_step(chain, [&](const Vector& x) { return psi.value(theta, ConfigPoint(x)); });
}

SampleBatch sample_mcmc(WalkerChain& chain, const Ansatz& psi, const Vector& theta, Index burn_in,
                        Index thinning) {
  require(burn_in >= 0, "sample_mcmc: burn_in >= 0");
  require(thinning >= 1, "sample_mcmc: thinning >= 1");
  for (Index s = 0; s < burn_in + thinning; ++s) metropolis_step(chain, psi, theta);
  SampleBatch batch;
  batch.points.reserve(static_cast<std::size_t>(chain.n_walkers()));
  for (Index w = 0; w < chain.n_walkers(); ++w) batch.points.emplace_back(Vector(chain.positions.col(w)));
  return batch;
}

double tune_step_size(WalkerChain& chain, const ScalarField& amplitude, double target,
                      Index sweeps_per_probe, Index rounds) {
  require(target > 0 && target < 1, "tune_step_size: target in (0,1)");
  double lo = 0.0, hi = 0.0;  // bracket in which acceptance crosses the target
  for (Index r = 0; r < rounds; ++r) {
    chain.reset_counters();
    for (Index s = 0; s < sweeps_per_probe; ++s) metropolis_step(chain, amplitude);
    const double rate = chain.acceptance_rate();
    if (rate > target) {
      lo = chain.step_size;
      chain.step_size = hi > 0 ? 0.5 * (lo + hi) : 2.0 * chain.step_size;
    } else {
      hi = chain.step_size;
      chain.step_size = lo > 0 ? 0.5 * (lo + hi) : 0.5 * chain.step_size;
    }
  }
  chain.reset_counters();
  return chain.step_size;
}

double autocorrelation(const Vector& series, Index lag) {
  require(lag >= 0 && lag < series.size() - 1, "autocorrelation: need lag < length - 1");
  const Index m = series.size() - lag;
  const Vector a = series.head(m);
  const Vector b = series.tail(m);
  const double ma = a.mean(), mb = b.mean();
  const double va = (a.array() - ma).square().sum();
  const double vb = (b.array() - mb).square().sum();
  if (va == 0.0 || vb == 0.0) throw NumericalError("autocorrelation: zero-variance series");
  return ((a.array() - ma) * (b.array() - mb)).sum() / std::sqrt(va * vb);
}

MixingReport mixing_diagnostic(WalkerChain& chain, const ScalarField& amplitude, Index burn_in,
                               Index thinning, Index batches, double threshold) {
  require(batches >= 3, "mixing_diagnostic: need at least three batches");
  for (Index s = 0; s < burn_in; ++s) metropolis_step(chain, amplitude);
  Vector means(batches);
  for (Index b = 0; b < batches; ++b) {
    for (Index s = 0; s < thinning; ++s) metropolis_step(chain, amplitude);
    means(b) = chain.positions.row(0).mean();
  }
  MixingReport report;
  report.lag1 = autocorrelation(means, 1);
  report.flagged = report.lag1 > threshold;
  return report;
}

// ---------------------------------------------------------------------------
// rho sampling

RhoSampler::RhoSampler(Measure rho, ConfigSpace space, std::uint64_t seed)
    : RhoSampler(std::move(rho), std::move(space), seed, McmcSettings{}) {}

RhoSampler::RhoSampler(Measure rho, ConfigSpace space, std::uint64_t seed, McmcSettings mcmc)
    : rho_(std::move(rho)), space_(std::move(space)), rng_(seed, 0x7250), mcmc_(mcmc) {
  if (rho_.kind() == Measure::Kind::FiniteWeights) {
    require(space_.is_finite() && space_.size() == rho_.weights().size(),
            "RhoSampler: weights do not match the finite space");
  } else {
    require(!space_.is_finite(), "RhoSampler: continuous measure on a finite space");
  }
}

std::optional<double> RhoSampler::acceptance_rate() const {
  if (!chain_) return std::nullopt;
  return chain_->acceptance_rate();
}

SampleBatch RhoSampler::draw(Index n) {
  require(n >= 1, "RhoSampler: n >= 1");
  SampleBatch batch;
  batch.points.reserve(static_cast<std::size_t>(n));
  switch (rho_.kind()) {
    case Measure::Kind::FiniteWeights:
      for (Index i : sample_categorical(rho_.weights(), n, rng_)) batch.points.emplace_back(i);
      break;
    case Measure::Kind::Lebesgue:
      for (Index i = 0; i < n; ++i) {
        Vector x(space_.dim());
        for (Index k = 0; k < space_.dim(); ++k)
          x(k) = space_.lower()(k) + rng_.uniform() * (space_.upper()(k) - space_.lower()(k));
        batch.points.emplace_back(std::move(x));
      }
      break;
    case Measure::Kind::TargetInduced: {
      const ScalarField& phi = rho_.target();
      if (!chain_) {
        const double step = mcmc_.step_size > 0 ? mcmc_.step_size : 0.5;
        chain_ = WalkerChain::uniform(space_, mcmc_.walkers, step, rng_.bits());
        // start from points where the target is nonzero
        for (Index w = 0; w < chain_->n_walkers(); ++w) {
          int tries = 0;
          while (phi(chain_->positions.col(w)) == 0.0) {
            if (++tries > 1000) throw NumericalError("RhoSampler: target vanishes on the box");
            auto& rng = chain_->streams[static_cast<std::size_t>(w)];
            for (Index k = 0; k < space_.dim(); ++k)
              chain_->positions(k, w) = space_.lower()(k) + rng.uniform() * (space_.upper()(k) - space_.lower()(k));
          }
        }
        if (mcmc_.step_size <= 0) tune_step_size(*chain_, phi);
        for (Index s = 0; s < mcmc_.burn_in; ++s) metropolis_step(*chain_, phi);
      }
      while (static_cast<Index>(pending_.size()) < n) {
        for (Index s = 0; s < mcmc_.thinning; ++s) metropolis_step(*chain_, phi);
        for (Index w = 0; w < chain_->n_walkers(); ++w) pending_.emplace_back(chain_->positions.col(w));
      }
      for (Index i = 0; i < n; ++i) batch.points.emplace_back(std::move(pending_[static_cast<std::size_t>(i)]));
      pending_.erase(pending_.begin(), pending_.begin() + n);
      break;
    }
  }
  return batch;
}

SampleBatch sample_rho(const Measure& rho, const ConfigSpace& space, Index n, Rng& rng) {
  if (rho.kind() == Measure::Kind::TargetInduced) {
    RhoSampler::McmcSettings s;
    s.walkers = n;
    RhoSampler sampler(rho, space, rng.bits(), s);
    return sampler.draw(n);
  }
  RhoSampler sampler(rho, space, rng.bits());
  return sampler.draw(n);
}

}  // namespace vmckit
