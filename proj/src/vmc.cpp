#include "vmckit/vmc.hpp"

#include "vmckit/diagnostics.hpp"
#include "vmckit/numfmt.hpp"
#include "vmckit/parallel.hpp"

#include <cmath>
#include <limits>

namespace vmckit {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::VmcUnbiased: return "vmc_unbiased";
    case EstimatorKind::PretrainUnbiased: return "pretrain_unbiased";
    case EstimatorKind::PretrainPlugin: return "pretrain_plugin";
  }
  return "?";
}

Schedule Schedule::constant(double eta0) {
  require(eta0 > 0 && std::isfinite(eta0), "Schedule: eta0 must be positive");
  return Schedule(Kind::Constant, eta0, 0.0);
}

Schedule Schedule::inverse_sqrt(double eta0, Index n) {
  require(eta0 > 0 && std::isfinite(eta0), "Schedule: eta0 must be positive");
  require(n >= 1, "Schedule: n >= 1");
  return Schedule(Kind::InverseSqrt, eta0, static_cast<double>(n));
}

Schedule Schedule::h4_style(double eta0, double m0) {
  require(eta0 > 0 && std::isfinite(eta0), "Schedule: eta0 must be positive");
  require(m0 > 0, "Schedule: m0 > 0");
  return Schedule(Kind::H4Style, eta0, m0);
}

double Schedule::operator()(Index m) const {
  require(m >= 0, "Schedule: step must be >= 0");
  const double md = static_cast<double>(m);
  switch (kind_) {
    case Kind::Constant: return eta0_;
    case Kind::InverseSqrt: return eta0_ * std::sqrt(scale_ / (md + 1.0));
    case Kind::H4Style: return eta0_ / std::sqrt(1.0 + md / scale_);
  }
  return eta0_;
}

std::string Schedule::describe() const {
  switch (kind_) {
    case Kind::Constant: return "constant(eta0=" + format_double(eta0_) + ")";
    case Kind::InverseSqrt:
      return "inverse_sqrt(eta0=" + format_double(eta0_) + ",n=" + format_double(scale_) + ")";
    case Kind::H4Style: return "h4(eta0=" + format_double(eta0_) + ",m0=" + format_double(scale_) + ")";
  }
  return "?";
}

double local_energy(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                    const ConfigPoint& x) {
  const double v = psi.value(theta, x);
  if (v == 0.0) throw NumericalError("local_energy: psi(x) = 0, local energy undefined");
  return apply_hamiltonian(h, psi, theta, x) / v;
}

Vector local_energies(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                      const std::vector<ConfigPoint>& points) {
  const Index n = static_cast<Index>(points.size());
  Vector out(n);
  if (h.is_matrix()) {
    const Vector values = psi_vector(psi, theta, h.mat().rows());
    const Vector h_psi = h.mat() * values;
    for (Index i = 0; i < n; ++i) {
      const Index x = points[static_cast<std::size_t>(i)].index();
      if (values(x) == 0.0) throw NumericalError("local_energy: psi(x) = 0, local energy undefined");
      out(i) = h_psi(x) / values(x);
    }
    return out;
  }
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    out(static_cast<Index>(i)) = local_energy(h, psi, theta, points[i]);
  });
  return out;
}

double exact_energy(const Hamiltonian& h, const Ansatz& psi, const Vector& theta) {
  const Vector values = psi_vector(psi, theta, h.mat().rows());
  const double denom = values.squaredNorm();
  if (!(denom > 0)) throw NumericalError("exact_energy: psi vanishes identically");
  return values.dot(h.mat() * values) / denom;
}

Vector exact_grad_energy(const Hamiltonian& h, const Ansatz& psi, const Vector& theta) {
  const Index s = h.mat().rows();
  const Vector values = psi_vector(psi, theta, s);
  const double denom = values.squaredNorm();
  if (!(denom > 0)) throw NumericalError("exact_grad_energy: psi vanishes identically");
  const Vector h_psi = h.mat() * values;
  const double energy = values.dot(h_psi) / denom;
  Vector grad = Vector::Zero(psi.num_params());
  for (Index x = 0; x < s; ++x) {
    if (values(x) == 0.0) continue;
    const double p = values(x) * values(x) / denom;
    const double e_local = h_psi(x) / values(x);
    grad += 2.0 * p * (e_local - energy) * psi.grad_log_abs(theta, ConfigPoint(x));
  }
  return grad;
}

Vector local_energy_gradient(const Hamiltonian& h, const Ansatz& psi, const Vector& theta, Index x) {
  const Matrix& m = h.mat();
  const Index s = m.rows();
  require(x >= 0 && x < s, "local_energy_gradient: point out of range");
  Vector values(s);
  Matrix grads(psi.num_params(), s);
  for (Index y = 0; y < s; ++y) {
    Vector g;
    values(y) = psi.value_and_grad(theta, ConfigPoint(y), g);
    grads.col(y) = g;
  }
  if (values(x) == 0.0) throw NumericalError("local_energy_gradient: psi(x) = 0");
  const double h_psi = m.row(x).dot(values);
  const Vector grad_h_psi = grads * m.row(x).transpose();
  return (grad_h_psi * values(x) - h_psi * grads.col(x)) / (values(x) * values(x));
}

GradientEstimate grad_estimator(const Vector& energies, const Matrix& grad_log) {
  const Index n = energies.size();
  if (n < 2) throw InvalidArgument("grad_estimator: need n >= 2 samples");
  require(grad_log.cols() == n, "grad_estimator: energies and log-derivatives disagree on n");
  const double mean = energies.mean();
  GradientEstimate out;
  out.n = n;
  out.kind = EstimatorKind::VmcUnbiased;
  out.g = Vector::Zero(grad_log.rows());
  for (Index i = 0; i < n; ++i) out.g += (energies(i) - mean) * grad_log.col(i);
  out.g *= 2.0 / static_cast<double>(n - 1);
  return out;
}

Vector grad_estimator_counts(const Vector& counts, const Vector& energies, const Matrix& grad_log) {
  require(counts.size() == energies.size() && grad_log.cols() == counts.size(), "grad_estimator_counts: shapes disagree");
  const double n = counts.sum();
  if (n < 2) throw InvalidArgument("grad_estimator_counts: need n >= 2 samples");
  double mean = 0.0;
  for (Index x = 0; x < counts.size(); ++x)
    if (counts(x) > 0) mean += counts(x) * energies(x);
  mean /= n;
  Vector g = Vector::Zero(grad_log.rows());
  for (Index x = 0; x < counts.size(); ++x)
    if (counts(x) > 0) g += counts(x) * (energies(x) - mean) * grad_log.col(x);
  return g * (2.0 / (n - 1.0));
}

GradientEstimate grad_estimator(const SampleBatch& batch) {
  require(batch.evaluated(), "grad_estimator: batch cache not evaluated");
  require(batch.local_energy.size() == batch.size(), "grad_estimator: local energies missing");
  Matrix grad_log(batch.grad.rows(), batch.size());
  for (Index i = 0; i < batch.size(); ++i) {
    if (batch.psi(i) == 0.0) throw NumericalError("grad_estimator: psi = 0 at a sample");
    grad_log.col(i) = batch.grad.col(i) / batch.psi(i);
  }
  return grad_estimator(batch.local_energy, grad_log);
}

TrainResult vmc_train(const VmcConfig& cfg, bool record_parameters) {
  require(cfg.ansatz != nullptr, "vmc_train: missing ansatz");
  require(cfg.n >= 2, "vmc_train: n >= 2");
  require(cfg.steps >= 1, "vmc_train: steps >= 1");
  require(cfg.theta0.size() == cfg.ansatz->num_params(), "vmc_train: theta0 has the wrong size");
  const Ansatz& psi = *cfg.ansatz;
  const bool finite = cfg.hamiltonian.is_matrix();
  require(finite == (cfg.sampler == VmcConfig::Sampler::Exact),
          "vmc_train: exact sampling is for finite spaces, Metropolis for continuous ones");

  Rng rng(cfg.seed, 0);
  std::optional<WalkerChain> chain;
  Vector theta = cfg.theta0;
  if (!finite) {
    require(cfg.space.has_value(), "vmc_train: continuous problems need a box");
    chain = WalkerChain::uniform(*cfg.space, cfg.n, cfg.step_size > 0 ? cfg.step_size : 1.0, rng.bits());
    if (cfg.step_size <= 0) {
      tune_step_size(*chain, [&](const Vector& x) { return psi.value(theta, ConfigPoint(x)); });
    }
  }

  TrainResult result;
  std::optional<Vector> prev_g, prev_theta;
  double runmin = std::numeric_limits<double>::infinity();
  for (Index m = 0; m < cfg.steps; ++m) {
    const double eta = cfg.schedule(m);
    SampleBatch batch;
    if (finite) {
      batch = sample_exact_finite(BornDensity::from_ansatz(psi, theta, cfg.hamiltonian.mat().rows()),
                                  cfg.n, rng);
    } else {
      chain->reset_counters();
      batch = sample_mcmc(*chain, psi, theta, m == 0 ? cfg.burn_in : 0, cfg.thinning);
    }
    batch.evaluate(psi, theta);
    batch.local_energy = local_energies(cfg.hamiltonian, psi, theta, batch.points);
    const GradientEstimate est = grad_estimator(batch);

    TraceRow row;
    row.step = m;
    row.eta = eta;
    row.energy_est = batch.local_energy.mean();
    if (finite) {
      row.energy_exact = exact_energy(cfg.hamiltonian, psi, theta);
      row.exact_grad_norm = exact_grad_energy(cfg.hamiltonian, psi, theta).norm();
    } else {
      row.acceptance_rate = chain->acceptance_rate();
    }
    const double gnorm = est.g.norm();
    row.grad_norm = gnorm;
    if (std::isfinite(gnorm)) runmin = std::min(runmin, gnorm);
    row.runmin_grad_norm = runmin;
    if (prev_g && (theta - *prev_theta).norm() > 0)
      row.lipschitz_est = lipschitz_estimate(*prev_g, est.g, *prev_theta, theta);
    if (record_parameters) result.parameters.push_back(theta);

    const bool bad = !est.g.allFinite() || !std::isfinite(*row.energy_est) ||
                     theta.norm() > cfg.divergence_limit;
    result.trace.push_back(row);
    if (bad) {
      result.diverged = true;
      result.message = "diverged at step " + std::to_string(m) + ": |theta|=" +
                       format_double(theta.norm()) + " energy=" + format_double(*row.energy_est);
      break;
    }
    prev_g = est.g;
    prev_theta = theta;
    theta -= eta * est.g;
  }
  result.theta = theta;
  return result;
}

}  // namespace vmckit
