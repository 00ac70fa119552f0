#include "vmckit/diagnostics.hpp"

#include "vmckit/numfmt.hpp"
#include "vmckit/parallel.hpp"
#include "vmckit/rng.hpp"
#include "vmckit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vmckit {

Vector running_min(const Vector& series) {
  require(series.size() > 0, "running_min: empty series");
  Vector out(series.size());
  double cur = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < series.size(); ++i) {
    cur = std::min(cur, series(i));
    out(i) = cur;
  }
  return out;
}

ConvergenceFit loglog_fit(const Vector& x, const Vector& y) {
  require(x.size() == y.size(), "loglog_fit: length mismatch");
  if (x.size() < 2) throw InvalidArgument("loglog_fit: need at least 2 points");
  Vector lx(x.size()), ly(y.size());
  for (Index i = 0; i < x.size(); ++i) {
    if (!(x(i) > 0) || !(y(i) > 0)) throw NumericalError("loglog_fit: values must be positive");
    lx(i) = std::log(x(i));
    ly(i) = std::log(y(i));
  }
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (!(sxx > 0)) throw NumericalError("loglog_fit: abscissae are all equal");
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  ConvergenceFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = x.size();
  return fit;
}

ConvergenceFit loglog_slope(const Vector& series, Index burn_in) {
  require(burn_in >= 0, "loglog_slope: burn_in >= 0");
  const Index count = series.size() - burn_in;
  if (count < 10) throw InvalidArgument("loglog_slope: fewer than 10 points after burn-in");
  Vector steps(count);
  for (Index i = 0; i < count; ++i) steps(i) = static_cast<double>(burn_in + i + 1);
  ConvergenceFit fit = loglog_fit(steps, series.tail(count));
  fit.burn_in_step = burn_in;
  return fit;
}

double vector_angle(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), "vector_angle: size mismatch");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0) || !(nb > 0)) throw NumericalError("vector_angle: zero vector");
  const Vector ua = a / na, ub = b / nb;
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

double lipschitz_estimate(const Vector& g_prev, const Vector& g_curr, const Vector& theta_prev,
                          const Vector& theta_curr) {
  require(g_prev.size() == g_curr.size() && theta_prev.size() == theta_curr.size(),
          "lipschitz_estimate: size mismatch");
  const double dtheta = (theta_curr - theta_prev).norm();
  if (!(dtheta > 0)) throw InvalidArgument("lipschitz_estimate: zero parameter displacement");
  return (g_curr - g_prev).norm() / dtheta;
}

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Weighted mean and the standard error of a plain mean (the latter only for equal weights).
struct Moment {
  double mean = 0.0;
  double stderr_ = 0.0;
};

Moment weighted_mean(const Vector& values, const Vector& w, bool with_stderr) {
  Moment m;
  m.mean = w.dot(values);
  if (with_stderr && values.size() > 1) {
    const double var = (values.array() - m.mean).square().sum() / static_cast<double>(values.size() - 1);
    m.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  }
  return m;
}

// ||f||_q from the weighted mean of |f|^q, with the delta-method standard error.
double root(const Moment& m, double q, double* se) {
  const double r = std::pow(m.mean, 1.0 / q);
  if (se) *se = m.mean > 0 ? m.stderr_ * r / (q * m.mean) : 0.0;
  return r;
}

struct VmcPointTerms {
  double e = 0.0;
  Vector d_h_psi;  // grad_theta (H psi)(x)
  Vector grad;
  double psi = 0.0;
  Matrix hess;  // empty without a Hessian
};

VmcMoments assemble_vmc(const std::vector<VmcPointTerms>& terms, const Vector& w, bool mc,
                        bool have_hess) {
  const Index n = static_cast<Index>(terms.size());
  Vector e4(n), de2(n), dpsi4(n), hess2(n);
  for (Index i = 0; i < n; ++i) {
    const auto& t = terms[static_cast<std::size_t>(i)];
    e4(i) = std::pow(t.e, 4);
    de2(i) = (t.d_h_psi / t.psi).squaredNorm();
    dpsi4(i) = std::pow((t.grad / t.psi).squaredNorm(), 2);
    hess2(i) = have_hess ? std::pow(spectral_norm(t.hess) / std::abs(t.psi), 2) : 0.0;
  }
  VmcMoments out;
  Vector se(4);
  out.e4 = root(weighted_mean(e4, w, mc), 4, &se(0));
  out.de2 = root(weighted_mean(de2, w, mc), 2, &se(1));
  out.dpsi4 = root(weighted_mean(dpsi4, w, mc), 4, &se(2));
  se(3) = 0.0;
  if (have_hess) out.hess2 = root(weighted_mean(hess2, w, mc), 2, &se(3));
  if (mc) out.stderr_ = se;
  return out;
}

}  // namespace

VmcMoments vmc_moments_exact(const Hamiltonian& h, const Ansatz& psi, const Vector& theta) {
  const Matrix& m = h.mat();
  const Index s = m.rows();
  Vector values(s);
  Matrix grads(psi.num_params(), s);
  for (Index x = 0; x < s; ++x) {
    Vector g;
    values(x) = psi.value_and_grad(theta, ConfigPoint(x), g);
    grads.col(x) = g;
  }
  const double z = values.squaredNorm();
  if (!(z > 0)) throw NumericalError("vmc_moments_exact: psi vanishes identically");
  const Vector h_psi = m * values;
  std::vector<VmcPointTerms> terms;
  std::vector<double> weights;
  for (Index x = 0; x < s; ++x) {
    if (values(x) == 0.0) continue;
    VmcPointTerms t;
    t.psi = values(x);
    t.e = h_psi(x) / values(x);
    t.d_h_psi = grads * m.row(x).transpose();
    t.grad = grads.col(x);
    if (psi.has_hessian()) t.hess = psi.hessian_theta(theta, ConfigPoint(x));
    terms.push_back(std::move(t));
    weights.push_back(values(x) * values(x) / z);
  }
  return assemble_vmc(terms, Eigen::Map<const Vector>(weights.data(), static_cast<Index>(weights.size())),
                      false, psi.has_hessian());
}

VmcMoments vmc_moments_batch(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                             const std::vector<ConfigPoint>& batch) {
  require(batch.size() >= 2, "vmc_moments_batch: need at least 2 samples");
  const auto n = batch.size();
  std::vector<VmcPointTerms> terms(n);
  parallel_for(n, [&](std::size_t i) {
    VmcPointTerms& t = terms[i];
    t.psi = psi.value_and_grad(theta, batch[i], t.grad);
    if (t.psi == 0.0) throw NumericalError("vmc_moments_batch: psi = 0 at a sample");
    t.e = apply_hamiltonian(h, psi, theta, batch[i]) / t.psi;
    t.d_h_psi.resize(theta.size());
    Vector tp = theta, tm = theta;
    for (Index k = 0; k < theta.size(); ++k) {
      const double step = default_fd_step(theta(k));
      tp(k) = theta(k) + step;
      tm(k) = theta(k) - step;
      t.d_h_psi(k) = (apply_hamiltonian(h, psi, tp, batch[i]) - apply_hamiltonian(h, psi, tm, batch[i])) / (2 * step);
      tp(k) = tm(k) = theta(k);
    }
    if (psi.has_hessian()) t.hess = psi.hessian_theta(theta, batch[i]);
  });
  const Vector w = Vector::Constant(static_cast<Index>(n), 1.0 / static_cast<double>(n));
  return assemble_vmc(terms, w, true, psi.has_hessian());
}

namespace {

PretrainMoments assemble_pretrain(const Vector& values, const std::vector<Vector>& grads,
                                  const std::vector<std::optional<Matrix>>& hess, const Vector& w) {
  const double z2 = w.dot(values.cwiseAbs2());
  if (!(z2 > 0)) throw NumericalError("pretrain_moments: psi has zero norm");
  const double z = std::sqrt(z2);
  const Index n = values.size();
  Vector psi4(n), g4(n), h4(n);
  bool have_hess = true;
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    psi4(i) = std::pow(values(i), 4);
    g4(i) = std::pow(grads[k].squaredNorm(), 2);
    if (hess[k]) {
      h4(i) = std::pow(spectral_norm(*hess[k]), 4);
    } else {
      have_hess = false;
    }
  }
  PretrainMoments out;
  out.v = std::pow(w.dot(psi4), 0.25) / z;
  out.g = std::pow(w.dot(g4), 0.25) / z;
  if (have_hess) out.h = std::pow(w.dot(h4), 0.25) / z;
  return out;
}

}  // namespace

PretrainMoments pretrain_moments_exact(const Ansatz& psi, const Vector& theta, const Measure& rho) {
  const Vector& w = rho.weights();
  const Index s = w.size();
  Vector values(s);
  std::vector<Vector> grads(static_cast<std::size_t>(s));
  std::vector<std::optional<Matrix>> hess(static_cast<std::size_t>(s));
  for (Index x = 0; x < s; ++x) {
    const auto k = static_cast<std::size_t>(x);
    values(x) = psi.value_and_grad(theta, ConfigPoint(x), grads[k]);
    if (psi.has_hessian()) hess[k] = psi.hessian_theta(theta, ConfigPoint(x));
  }
  return assemble_pretrain(values, grads, hess, w);
}

PretrainMoments pretrain_moments_batch(const Ansatz& psi, const Vector& theta,
                                       const std::vector<ConfigPoint>& batch) {
  require(!batch.empty(), "pretrain_moments_batch: empty batch");
  const auto n = batch.size();
  Vector values(static_cast<Index>(n));
  std::vector<Vector> grads(n);
  std::vector<std::optional<Matrix>> hess(n);
  parallel_for(n, [&](std::size_t i) {
    values(static_cast<Index>(i)) = psi.value_and_grad(theta, batch[i], grads[i]);
    if (psi.has_hessian()) hess[i] = psi.hessian_theta(theta, batch[i]);
  });
  return assemble_pretrain(values, grads, hess,
                           Vector::Constant(static_cast<Index>(n), 1.0 / static_cast<double>(n)));
}

void MomentTracker::observe(const VmcMoments& m) {
  c_psi_ = std::max({c_psi_, m.e4, m.de2, m.dpsi4, m.hess2.value_or(0.0)});
}

void MomentTracker::observe(const PretrainMoments& m) {
  c_psi_ = std::max({c_psi_, m.v, m.g, m.h.value_or(0.0)});
}

namespace {

VarianceTable summarise(const std::vector<Index>& n_list, const std::vector<Matrix>& samples) {
  VarianceTable table;
  Vector ns(static_cast<Index>(n_list.size())), vars(ns.size());
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    const Matrix& g = samples[k];
    const Vector mean = g.rowwise().mean();
    const double reps = static_cast<double>(g.cols());
    VarianceRow row;
    row.n = n_list[k];
    row.variance = (g.colwise() - mean).colwise().squaredNorm().sum() / (reps - 1.0);
    row.mean_norm = mean.norm();
    row.mean_stderr = std::sqrt(row.variance / reps);
    table.rows.push_back(row);
    ns(static_cast<Index>(k)) = static_cast<double>(row.n);
    vars(static_cast<Index>(k)) = row.variance;
  }
  if (n_list.size() >= 2) table.fit = loglog_fit(ns, vars);
  return table;
}

// Repetitions run in fixed blocks of 256, one stream per block.
template <class F>
void for_each_rep(Index reps, std::uint64_t seed, F&& body) {
  const Index block = 256;
  const Index blocks = (reps + block - 1) / block;
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    Rng rng(seed, b + 1);
    const Index lo = static_cast<Index>(b) * block;
    for (Index r = lo; r < std::min(reps, lo + block); ++r) body(r, rng);
  });
}

void check_variance_args(const std::vector<Index>& n_list, Index reps) {
  require(!n_list.empty(), "variance_vs_n: empty n list");
  for (Index n : n_list) require(n >= 2, "variance_vs_n: every n must be >= 2");
  require(reps >= 100, "variance_vs_n: reps >= 100");
}

}  // namespace

VarianceTable variance_vs_n_vmc(const Hamiltonian& h, const Ansatz& psi, const Vector& theta,
                                const std::vector<Index>& n_list, Index reps, std::uint64_t seed) {
  check_variance_args(n_list, reps);
  const Index s = h.mat().rows();
  const Vector values = psi_vector(psi, theta, s);
  const BornDensity density = BornDensity::from_values(values);
  const Vector h_psi = h.mat() * values;
  Vector energies = Vector::Zero(s);
  Matrix grad_log = Matrix::Zero(psi.num_params(), s);
  for (Index x = 0; x < s; ++x)
    if (values(x) != 0.0) {
      energies(x) = h_psi(x) / values(x);
      grad_log.col(x) = psi.grad_log_abs(theta, ConfigPoint(x));
    }
  std::vector<Matrix> samples;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    const Index n = n_list[k];
    Matrix g(psi.num_params(), reps);
    for_each_rep(reps, seed + 0x1000003ull * static_cast<std::uint64_t>(k), [&](Index r, Rng& rng) {
      g.col(r) = grad_estimator_counts(sample_counts(density.probabilities, n, rng), energies, grad_log);
    });
    samples.push_back(std::move(g));
  }
  return summarise(n_list, samples);
}

VarianceTable variance_vs_n_pretrain(const Ansatz& psi, const Vector& theta, const Target& target,
                                     NormStrategy strategy, const std::vector<Index>& n_list,
                                     Index reps, std::uint64_t seed) {
  check_variance_args(n_list, reps);
  require(target.is_finite(), "variance_vs_n_pretrain: finite targets only");
  const Vector& w = target.measure().weights();
  const Index s = w.size();
  const Vector& phi = target.finite_values();
  Vector values(s);
  Matrix grads(psi.num_params(), s);
  for (Index x = 0; x < s; ++x) {
    Vector g;
    values(x) = psi.value_and_grad(theta, ConfigPoint(x), g);
    grads.col(x) = g;
  }
  std::vector<Matrix> samples;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    const Index n = n_list[k];
    Matrix g(psi.num_params(), reps);
    for_each_rep(reps, seed + 0x1000003ull * static_cast<std::uint64_t>(k), [&](Index r, Rng& rng) {
      const Vector counts = sample_counts(w, n, rng);
      auto rms_of = [&](const Vector& c) { return std::sqrt(c.dot(values.cwiseProduct(values)) / c.sum()); };
      double z = 0.0;
      switch (strategy) {
        case NormStrategy::SameBatch: z = rms_of(counts); break;
        case NormStrategy::IndependentBatch: z = rms_of(sample_counts(w, n, rng)); break;
        case NormStrategy::PeriodicLargeBatch: z = rms_of(sample_counts(w, 100, rng)); break;
      }
      if (!(z > 0)) throw NumericalError("variance_vs_n_pretrain: psi vanishes on the norm batch");
      g.col(r) = lemma2_estimator_counts(counts, values, phi, grads, z);
    });
    samples.push_back(std::move(g));
  }
  return summarise(n_list, samples);
}

LedgerReport theorem_ledger(const Trace& trace, Index n, double loss_gap, bool use_norm_ratio) {
  require(n >= 1, "theorem_ledger: n >= 1");
  LedgerReport rep;
  const Index steps = static_cast<Index>(trace.rows.size());
  rep.steps = steps;
  rep.loss_gap = std::max(0.0, loss_gap);
  if (steps < 4) throw InvalidArgument("theorem_ledger: need at least 4 steps");
  rep.proxy = !trace.has_column_values("exact_grad_norm");
  const Vector eta = trace.column("eta");
  const Vector grad = trace.column(rep.proxy ? "grad_norm" : "exact_grad_norm");
  if (use_norm_ratio && trace.has_column_values("norm_ratio")) {
    const Vector r = trace.column("norm_ratio");
    for (Index i = 0; i < r.size(); ++i)
      if (r(i) > 0) rep.c_r = std::max({rep.c_r, r(i), 1.0 / r(i)});
  }
  const double base = 2.0 * rep.c_r * rep.c_r * rep.loss_gap;

  Vector lhs(steps), s2(steps);
  double acc_l = 0.0, acc_s = 0.0;
  for (Index m = 0; m < steps; ++m) {
    acc_l += eta(m) * grad(m) * grad(m);
    acc_s += eta(m) * eta(m) / static_cast<double>(n);
    lhs(m) = acc_l;
    s2(m) = acc_s;
  }
  rep.lhs = acc_l;
  rep.sum_eta2_over_n = acc_s;

  const Index half = steps / 2;
  for (Index m = 0; m < half; ++m) rep.c_hat = std::max(rep.c_hat, (lhs(m) - base) / s2(m));
  for (Index m = half; m < steps; ++m) {
    const double rhs = base + rep.c_hat * s2(m);
    const double ratio = rhs > 0 ? lhs(m) / rhs : (lhs(m) > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  if (lhs(half) > 0 && steps - half >= 2) {
    Vector ms(steps - half), ls(steps - half);
    for (Index m = half; m < steps; ++m) {
      ms(m - half) = static_cast<double>(m + 1);
      ls(m - half) = lhs(m);
    }
    rep.lhs_growth = loglog_fit(ms, ls).slope;
  }
  rep.passed = rep.max_ratio <= 1.0 && rep.lhs_growth < 1.0;
  rep.detail = "LHS=" + format_double(rep.lhs) + " 2C_r^2*gap=" + format_double(base) +
               " C_hat=" + format_double(rep.c_hat) + " sum_eta2/n=" + format_double(rep.sum_eta2_over_n) +
               " max_ratio=" + format_double(rep.max_ratio) + " growth=" + format_double(rep.lhs_growth) +
               (rep.proxy ? " (proxy |G|)" : "");
  return rep;
}

LipschitzReport lipschitz_ledger(const Vector& lipschitz, double c_psi) {
  require(lipschitz.size() >= 2, "lipschitz_ledger: need at least 2 estimates");
  LipschitzReport rep;
  rep.c_psi = c_psi;
  const double scale = std::pow(c_psi, 4) + 1.0;
  const Index half = lipschitz.size() / 2;
  rep.c_prime = lipschitz.head(half).maxCoeff() / scale;
  const double bound = rep.c_prime * scale;
  rep.max_ratio = bound > 0 ? lipschitz.tail(lipschitz.size() - half).maxCoeff() / bound : 0.0;
  rep.passed = rep.max_ratio <= 1.0;
  return rep;
}

}  // namespace vmckit
