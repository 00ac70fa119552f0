#include "vmckit/pretrain.hpp"

#include "vmckit/diagnostics.hpp"
#include "vmckit/numfmt.hpp"
#include "vmckit/parallel.hpp"

#include <cmath>
#include <limits>

namespace vmckit {

// ---------------------------------------------------------------------------
// Target

Target::Target(Vector values, ScalarField fn, Measure rho, ConfigSpace space)
    : values_(std::move(values)), fn_(std::move(fn)), rho_(std::move(rho)), space_(std::move(space)) {}

Target Target::finite(Vector phi, Measure rho) {
  require(rho.kind() == Measure::Kind::FiniteWeights, "Target: finite targets need finite weights");
  require(phi.size() == rho.weights().size(), "Target: phi and rho sizes differ");
  require(phi.allFinite(), "Target: non-finite phi");
  if (!(inner_product(phi, phi, rho.weights()) > 0)) throw NumericalError("Target: ||phi||_rho = 0");
  auto space = ConfigSpace::finite(phi.size());
  return Target(std::move(phi), {}, std::move(rho), std::move(space));
}

Target Target::continuous(ScalarField phi, Measure rho, ConfigSpace space) {
  require(static_cast<bool>(phi), "Target: missing phi");
  require(!space.is_finite(), "Target: continuous targets need a box");
  require(rho.kind() != Measure::Kind::FiniteWeights, "Target: finite weights on a box");
  return Target({}, std::move(phi), std::move(rho), std::move(space));
}

double Target::operator()(const ConfigPoint& x) const {
  if (is_finite()) {
    const Index i = x.index();
    require(i >= 0 && i < values_.size(), "Target: point out of range");
    return values_(i);
  }
  return fn_(x.coords());
}

Vector Target::values(const std::vector<ConfigPoint>& points) const {
  Vector out(static_cast<Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) out(static_cast<Index>(i)) = (*this)(points[i]);
  return out;
}

const Vector& Target::finite_values() const {
  require(is_finite(), "Target: finite_values() on a continuous target");
  return values_;
}

// ---------------------------------------------------------------------------
// Losses

double si_loss(const Vector& psi, const Vector& phi, const Measure& rho) {
  return si_loss(psi, phi, rho.weights());
}

double wavefunction_angle(const Vector& psi, const Vector& phi, const Measure& rho) {
  return wavefunction_angle(psi, phi, rho.weights());
}

double batch_si_loss(const Vector& psi, const Vector& phi) {
  require(psi.size() >= 1, "batch_si_loss: empty batch");
  return si_loss(psi, phi, Vector::Constant(psi.size(), 1.0 / static_cast<double>(psi.size())));
}

double batch_wavefunction_angle(const Vector& psi, const Vector& phi) {
  require(psi.size() >= 1, "batch_wavefunction_angle: empty batch");
  return wavefunction_angle(psi, phi, Vector::Constant(psi.size(), 1.0 / static_cast<double>(psi.size())));
}

double best_fit_residual(const Vector& psi, const Vector& phi, const Measure& rho) {
  const double pp = inner_product(psi, psi, rho);
  if (!(pp > 0)) throw NumericalError("best_fit_residual: psi has zero norm");
  const double lambda = inner_product(phi, psi, rho) / pp;
  const Vector r = lambda * psi - phi;
  return inner_product(r, r, rho);
}

double objective(const Ansatz& psi, const Vector& theta, const Target& target) {
  const Vector& w = target.measure().weights();
  const Vector values = psi_vector(psi, theta, w.size());
  const double nn = inner_product(values, values, w);
  if (!(nn > 0)) throw NumericalError("objective: psi has zero norm under rho");
  return -inner_product(target.finite_values(), values, w) / std::sqrt(nn);
}

Vector exact_grad_supervised(const Ansatz& psi, const Vector& theta, const Target& target) {
  const Vector& w = target.measure().weights();
  const Vector& phi = target.finite_values();
  const Index s = w.size();
  Vector values(s);
  Matrix grads(psi.num_params(), s);
  for (Index x = 0; x < s; ++x) {
    Vector g;
    values(x) = psi.value_and_grad(theta, ConfigPoint(x), g);
    grads.col(x) = g;
  }
  const double nn = inner_product(values, values, w);
  if (!(nn > 0)) throw NumericalError("exact_grad_supervised: psi has zero norm under rho");
  const double z = std::sqrt(nn);
  const Vector phi_grad = grads * w.cwiseProduct(phi);
  const Vector psi_grad = grads * w.cwiseProduct(values);
  const double phi_psi = inner_product(phi, values, w);
  return -phi_grad / z + phi_psi * psi_grad / (z * z * z);
}

// ---------------------------------------------------------------------------
// Estimators

Vector pretrain_coefficients(const Vector& psi, const Vector& phi) {
  require(psi.size() == phi.size() && psi.size() >= 1, "pretrain_coefficients: size mismatch");
  const double n = static_cast<double>(psi.size());
  const double psi_sq = psi.squaredNorm() / n;
  const double phi_psi = phi.dot(psi) / n;
  return -psi_sq * phi + phi_psi * psi;
}

GradientEstimate lemma2_estimator(const Vector& psi, const Vector& phi, const Matrix& grad,
                                  double z_tilde) {
  const Index n = psi.size();
  if (n < 2) throw InvalidArgument("lemma2_estimator: need n >= 2 samples");
  if (!(z_tilde > 0) || !std::isfinite(z_tilde))
    throw InvalidArgument("lemma2_estimator: norm estimate must be positive");
  require(grad.cols() == n && phi.size() == n, "lemma2_estimator: batch shapes disagree");
  const Vector a = pretrain_coefficients(psi, phi);
  GradientEstimate out;
  out.n = n;
  out.kind = EstimatorKind::PretrainUnbiased;
  out.g = grad * a / (z_tilde * z_tilde * z_tilde * static_cast<double>(n - 1));
  return out;
}

Vector lemma2_estimator_counts(const Vector& counts, const Vector& psi, const Vector& phi, const Matrix& grad,
                               double z_tilde) {
  require(counts.size() == psi.size() && phi.size() == psi.size() && grad.cols() == psi.size(),
          "lemma2_estimator_counts: shapes disagree");
  const double n = counts.sum();
  if (n < 2) throw InvalidArgument("lemma2_estimator_counts: need n >= 2 samples");
  if (!(z_tilde > 0) || !std::isfinite(z_tilde))
    throw InvalidArgument("lemma2_estimator_counts: norm estimate must be positive");
  const double psi_sq = counts.dot(psi.cwiseProduct(psi)) / n;
  const double phi_psi = counts.dot(phi.cwiseProduct(psi)) / n;
  const Vector a = counts.cwiseProduct(-psi_sq * phi + phi_psi * psi);
  return grad * a / (z_tilde * z_tilde * z_tilde * (n - 1.0));
}

GradientEstimate lemma2_estimator(const Ansatz& psi, const Vector& theta, const Target& target,
                                  const std::vector<ConfigPoint>& batch, double z_tilde) {
  const Index n = static_cast<Index>(batch.size());
  Vector values(n);
  Matrix grads(psi.num_params(), n);
  for (Index i = 0; i < n; ++i) {
    Vector g;
    values(i) = psi.value_and_grad(theta, batch[static_cast<std::size_t>(i)], g);
    grads.col(i) = g;
  }
  return lemma2_estimator(values, target.values(batch), grads, z_tilde);
}

GradientEstimate plugin_biased_estimator(double psi1, double phi1, const Vector& grad1, double psi2,
                                         double phi2, double z_tilde) {
  if (!(z_tilde > 0) || !std::isfinite(z_tilde))
    throw InvalidArgument("plugin_biased_estimator: norm estimate must be positive");
  GradientEstimate out;
  out.n = 2;
  out.kind = EstimatorKind::PretrainPlugin;
  out.g = -phi1 * grad1 / z_tilde + phi2 * psi2 * psi1 * grad1 / (z_tilde * z_tilde * z_tilde);
  return out;
}

GradientEstimate plugin_biased_estimator(const Ansatz& psi, const Vector& theta, const Target& target,
                                         const ConfigPoint& x1, const ConfigPoint& x2, double z_tilde) {
  Vector g1;
  const double psi1 = psi.value_and_grad(theta, x1, g1);
  return plugin_biased_estimator(psi1, target(x1), g1, psi.value(theta, x2), target(x2), z_tilde);
}

std::string to_string(NormStrategy s) {
  switch (s) {
    case NormStrategy::SameBatch: return "same_batch";
    case NormStrategy::IndependentBatch: return "independent_batch";
    case NormStrategy::PeriodicLargeBatch: return "periodic";
  }
  return "?";
}

NormStrategy norm_strategy_from_string(const std::string& s) {
  if (s == "same_batch") return NormStrategy::SameBatch;
  if (s == "independent_batch") return NormStrategy::IndependentBatch;
  if (s == "periodic") return NormStrategy::PeriodicLargeBatch;
  throw ConfigError("unknown norm strategy '" + s + "' (same_batch|independent_batch|periodic)");
}

NormEstimator::NormEstimator(NormStrategy strategy, Index batch_size, Index period)
    : strategy_(strategy), batch_size_(batch_size), period_(period) {
  require(strategy == NormStrategy::SameBatch || batch_size >= 1, "NormEstimator: batch size >= 1");
  require(period >= 1, "NormEstimator: period >= 1");
}

NormEstimate NormEstimator::estimate(const Ansatz& psi, const Vector& theta, const Vector& training_psi,
                                     RhoSampler& sampler, Index m) {
  auto rms_of_fresh_batch = [&] {
    SampleBatch extra = sampler.draw(batch_size_);
    Vector values(extra.size());
    for (Index i = 0; i < extra.size(); ++i) values(i) = psi.value(theta, extra.points[static_cast<std::size_t>(i)]);
    return std::sqrt(values.squaredNorm() / static_cast<double>(values.size()));
  };
  NormEstimate out;
  out.strategy = strategy_;
  switch (strategy_) {
    case NormStrategy::SameBatch:
      out.z_tilde = std::sqrt(training_psi.squaredNorm() / static_cast<double>(training_psi.size()));
      out.refreshed = true;
      break;
    case NormStrategy::IndependentBatch:
      out.z_tilde = rms_of_fresh_batch();
      out.refreshed = true;
      break;
    case NormStrategy::PeriodicLargeBatch:
      if (m % period_ == 0 || !carried_) {
        carried_ = rms_of_fresh_batch();
        out.refreshed = true;
      }
      out.z_tilde = *carried_;
      break;
  }
  if (!(out.z_tilde > 0)) throw NumericalError("norm_estimate: psi vanishes on the estimation batch");
  return out;
}

// ---------------------------------------------------------------------------
// Training

EvaluationSet make_evaluation_set(const Target& target, Index size, std::uint64_t seed) {
  EvaluationSet out;
  if (target.is_finite()) {
    const Index s = target.space().size();
    for (Index i = 0; i < s; ++i) out.points.emplace_back(i);
    out.weights = target.measure().weights();
    return out;
  }
  const ConfigSpace& space = target.space();
  if (target.measure().kind() == Measure::Kind::Lebesgue && space.dim() == 1) {
    const double lo = space.lower()(0), hi = space.upper()(0);
    const double h = (hi - lo) / static_cast<double>(size);
    for (Index i = 0; i < size; ++i) out.points.emplace_back(Vector::Constant(1, lo + (static_cast<double>(i) + 0.5) * h));
  } else {
    RhoSampler sampler(target.measure(), space, seed ^ 0xe7a1u);
    out.points = sampler.draw(size).points;
  }
  out.weights = Vector::Constant(size, 1.0 / static_cast<double>(size));
  return out;
}

TrainResult pretrain_train(const PretrainConfig& cfg) {
  require(cfg.ansatz != nullptr, "pretrain_train: missing ansatz");
  require(cfg.target.has_value(), "pretrain_train: missing target");
  require(cfg.n >= 2, "pretrain_train: n >= 2");
  require(cfg.steps >= 1, "pretrain_train: steps >= 1");
  require(cfg.theta0.size() == cfg.ansatz->num_params(), "pretrain_train: theta0 has the wrong size");
  const Ansatz& psi = *cfg.ansatz;
  const Target& target = *cfg.target;

  RhoSampler sampler(target.measure(), target.space(), cfg.seed, cfg.mcmc);
  RhoSampler norm_sampler(target.measure(), target.space(), cfg.seed + 0x9e3779b97f4a7c15ull, cfg.mcmc);
  const Index norm_batch = cfg.norm_batch > 0 ? cfg.norm_batch
                           : cfg.strategy == NormStrategy::PeriodicLargeBatch ? 100 : cfg.n;
  NormEstimator norms(cfg.strategy, norm_batch, cfg.period);
  const EvaluationSet eval = make_evaluation_set(target, cfg.eval_points, cfg.seed);
  const Vector eval_phi = target.values(eval.points);

  TrainResult result;
  Vector theta = cfg.theta0;
  std::optional<Vector> prev_g, prev_theta;
  double runmin = std::numeric_limits<double>::infinity();
  for (Index m = 0; m < cfg.steps; ++m) {
    const double eta = cfg.schedule(m);
    SampleBatch batch = sampler.draw(cfg.n);
    batch.evaluate(psi, theta);
    const Vector phi = target.values(batch.points);
    const NormEstimate z = norms.estimate(psi, theta, batch.psi, norm_sampler, m);
    const GradientEstimate est = lemma2_estimator(batch.psi, phi, batch.grad, z.z_tilde);

    Vector eval_psi(static_cast<Index>(eval.points.size()));
    parallel_for(eval.points.size(), [&](std::size_t i) {
      eval_psi(static_cast<Index>(i)) = psi.value(theta, eval.points[i]);
    });
    const double eval_norm = std::sqrt(inner_product(eval_psi, eval_psi, eval.weights));

    TraceRow row;
    row.step = m;
    row.eta = eta;
    if (target.is_finite()) {
      row.objective = objective(psi, theta, target);
      row.exact_grad_norm = exact_grad_supervised(psi, theta, target).norm();
    } else if (eval_norm > 0) {
      row.objective = -inner_product(eval_phi, eval_psi, eval.weights) / eval_norm;
    }
    if (eval_norm > 0) {
      row.si_loss = si_loss(eval_psi, eval_phi, eval.weights);
      row.angle = wavefunction_angle(eval_psi, eval_phi, eval.weights);
    }
    const double gnorm = est.g.norm();
    row.grad_norm = gnorm;
    if (std::isfinite(gnorm)) runmin = std::min(runmin, gnorm);
    row.runmin_grad_norm = runmin;
    if (prev_g && (theta - *prev_theta).norm() > 0)
      row.lipschitz_est = lipschitz_estimate(*prev_g, est.g, *prev_theta, theta);
    row.z_tilde = z.z_tilde;
    row.norm_ratio = eval_norm / z.z_tilde;

    const bool bad = !est.g.allFinite() || theta.norm() > cfg.divergence_limit;
    result.trace.push_back(row);
    if (bad) {
      result.diverged = true;
      result.message = "diverged at step " + std::to_string(m) + ": |theta|=" + format_double(theta.norm());
      break;
    }
    prev_g = est.g;
    prev_theta = theta;
    theta -= eta * est.g;
  }
  if (!result.diverged && (!theta.allFinite() || theta.norm() > cfg.divergence_limit)) {
    result.diverged = true;
    result.message = "diverged after the final update: |theta|=" + format_double(theta.norm());
  }
  result.theta = theta;
  return result;
}

// ---------------------------------------------------------------------------
// Orbital losses

namespace {

void check_orbital_shapes(const OrbitalBatch& y, const OrbitalTargets& phi) {
  require(!y.empty() && y.size() == phi.size(), "orbital loss: batch sizes differ");
  const std::size_t dets = y.front().size();
  require(dets >= 1, "orbital loss: no determinants");
  for (std::size_t b = 0; b < y.size(); ++b) {
    require(y[b].size() == dets, "orbital loss: ragged determinant count");
    for (const Matrix& m : y[b])
      require(m.rows() == phi[b].rows() && m.cols() == phi[b].cols(), "orbital loss: shape mismatch");
  }
}

}  // namespace

LossWithGrad columnwise_si_loss_with_grad(const OrbitalBatch& y, const OrbitalTargets& phi) {
  check_orbital_shapes(y, phi);
  const std::size_t batch = y.size(), dets = y.front().size();
  const Index cols = phi.front().cols();
  LossWithGrad out;
  out.grad.assign(batch, std::vector<Matrix>(dets));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < dets; ++k) out.grad[b][k] = Matrix::Zero(y[b][k].rows(), cols);
  for (std::size_t k = 0; k < dets; ++k) {
    for (Index j = 0; j < cols; ++j) {
      double yf = 0, yy = 0, ff = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        yf += y[b][k].col(j).dot(phi[b].col(j));
        yy += y[b][k].col(j).squaredNorm();
        ff += phi[b].col(j).squaredNorm();
      }
      if (!(yy > 0)) throw NumericalError("columnwise_si_loss: all-zero network column " + std::to_string(j));
      if (!(ff > 0)) throw NumericalError("columnwise_si_loss: all-zero target column " + std::to_string(j));
      out.value += 1.0 - yf * yf / (yy * ff);
      const double scale = -2.0 * yf / (yy * yy * ff);
      for (std::size_t b = 0; b < batch; ++b)
        out.grad[b][k].col(j) = scale * (yy * phi[b].col(j) - yf * y[b][k].col(j));
    }
  }
  return out;
}

double columnwise_si_loss(const OrbitalBatch& y, const OrbitalTargets& phi) {
  return columnwise_si_loss_with_grad(y, phi).value;
}

LossWithGrad mse_orbital_loss_with_grad(const OrbitalBatch& y, const OrbitalTargets& phi) {
  check_orbital_shapes(y, phi);
  LossWithGrad out;
  out.grad.resize(y.size());
  for (std::size_t b = 0; b < y.size(); ++b) {
    for (const Matrix& m : y[b]) {
      const Matrix r = m - phi[b];
      out.value += r.squaredNorm();
      out.grad[b].push_back(2.0 * r);
    }
  }
  return out;
}

double mse_orbital_loss(const OrbitalBatch& y, const OrbitalTargets& phi) {
  return mse_orbital_loss_with_grad(y, phi).value;
}

double hermite_orbital(Index j, double x) {
  require(j >= 0, "hermite_orbital: j >= 0");
  double prev = 1.0, cur = 2.0 * x;
  if (j == 0) return std::exp(-0.5 * x * x);
  for (Index k = 1; k < j; ++k) {
    const double next = 2.0 * x * cur - 2.0 * static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur * std::exp(-0.5 * x * x);
}

Matrix slater_orbitals(const Vector& x) {
  const Index n = x.size();
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out(i, j) = hermite_orbital(j, x(i));
  return out;
}

double slater_target(const Vector& x) { return slater_orbitals(x).determinant(); }

std::string to_string(OrbitalLoss l) { return l == OrbitalLoss::ScaleInvariant ? "si" : "mse"; }

OrbitalPretrainResult orbital_pretrain(const OrbitalPretrainConfig& cfg) {
  require(cfg.batch >= 2 && cfg.steps >= 1, "orbital_pretrain: batch >= 2, steps >= 1");
  const MatrixMlpAnsatz net(cfg.electrons, cfg.determinants, cfg.hidden);
  Rng init_rng(cfg.seed, 0x1);
  Vector theta = cfg.theta0.size() > 0 ? cfg.theta0 : net.initial_parameters(init_rng);
  require(theta.size() == net.num_params(), "orbital_pretrain: theta0 has the wrong size");

  const ConfigSpace space = ConfigSpace::cube(cfg.electrons, cfg.half_width);
  const ScalarField phi_fn = [](const Vector& x) { return slater_target(x); };
  const Measure target_rho = Measure::target_induced(phi_fn);
  RhoSampler sampler(cfg.sample_from_target ? target_rho : Measure::lebesgue(), space, cfg.seed, cfg.mcmc);

  // Angle is always measured under rho = |phi|^2, on a fixed set shared by both losses.
  RhoSampler eval_sampler(target_rho, space, cfg.seed ^ 0x5eed5eedull, cfg.mcmc);
  const std::vector<ConfigPoint> eval_points = eval_sampler.draw(cfg.eval_points).points;
  Vector eval_phi(static_cast<Index>(eval_points.size()));
  for (std::size_t i = 0; i < eval_points.size(); ++i) eval_phi(static_cast<Index>(i)) = phi_fn(eval_points[i].coords());
  const Vector eval_w = Vector::Constant(eval_phi.size(), 1.0 / static_cast<double>(eval_phi.size()));

  auto angle_at = [&](const Vector& th) {
    Vector values(eval_phi.size());
    parallel_for(eval_points.size(), [&](std::size_t i) {
      values(static_cast<Index>(i)) = net.value(th, eval_points[i]);
    });
    return wavefunction_angle(values, eval_phi, eval_w);
  };

  OrbitalPretrainResult result;
  std::optional<Vector> prev_g, prev_theta;
  double runmin = std::numeric_limits<double>::infinity();
  const auto batch_size = static_cast<std::size_t>(cfg.batch);
  for (Index m = 0; m < cfg.steps; ++m) {
    const double eta = cfg.schedule(m);
    const SampleBatch batch = sampler.draw(cfg.batch);
    OrbitalBatch y(batch_size);
    OrbitalTargets phi(batch_size);
    parallel_for(batch_size, [&](std::size_t b) {
      const Vector& x = batch.points[b].coords();
      y[b] = net.orbitals(theta, x);
      phi[b] = slater_orbitals(x);
    });
    LossWithGrad loss = cfg.loss == OrbitalLoss::ScaleInvariant ? columnwise_si_loss_with_grad(y, phi)
                                                                 : mse_orbital_loss_with_grad(y, phi);
    if (cfg.loss == OrbitalLoss::Mse) {
      const double inv = 1.0 / static_cast<double>(cfg.batch);
      loss.value *= inv;
      for (auto& per : loss.grad)
        for (Matrix& g : per) g *= inv;
    }
    Matrix per_sample = Matrix::Zero(theta.size(), cfg.batch);
    parallel_for(batch_size, [&](std::size_t b) {
      net.orbital_vjp(theta, batch.points[b].coords(), loss.grad[b], per_sample.col(static_cast<Index>(b)));
    });
    const Vector g = per_sample.rowwise().sum();

    TraceRow row;
    row.step = m;
    row.eta = eta;
    row.loss = loss.value;
    row.grad_norm = g.norm();
    if (std::isfinite(*row.grad_norm)) runmin = std::min(runmin, *row.grad_norm);
    row.runmin_grad_norm = runmin;
    if (prev_g && (theta - *prev_theta).norm() > 0) row.lipschitz_est = lipschitz_estimate(*prev_g, g, *prev_theta, theta);
    row.angle = angle_at(theta);
    result.trace.push_back(row);
    if (!g.allFinite()) throw NumericalError("orbital_pretrain: non-finite gradient at step " + std::to_string(m));
    prev_g = g;
    prev_theta = theta;
    theta -= eta * g;
  }
  result.theta = theta;
  result.final_angle = angle_at(theta);
  return result;
}

}  // namespace vmckit
