#include "vmckit/experiments.hpp"

#include "vmckit/numfmt.hpp"
#include "vmckit/oracle.hpp"
#include "vmckit/parallel.hpp"
#include "vmckit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace vmckit {

Vector default_diagonal(Index size) {
  Rng rng(11, 0);
  Vector d(size);
  for (Index i = 0; i < size; ++i) d(i) = 2.0 * rng.uniform() - 1.0;
  return d;
}

Matrix cosine_feature_table(Index size, Index features) {
  require(size >= 2 && features >= 1, "cosine_feature_table: size >= 2, features >= 1");
  Matrix f(size, features);
  for (Index x = 0; x < size; ++x)
    for (Index k = 0; k < features; ++k)
      f(x, k) = std::cos(std::numbers::pi * static_cast<double>(k + 1) * (static_cast<double>(x) + 0.5) /
                         static_cast<double>(size));
  return f;
}

Vector random_unit_target(Index size, std::uint64_t seed) {
  Rng rng(seed, 0x7a);
  Vector phi(size);
  for (Index i = 0; i < size; ++i) phi(i) = rng.normal();
  return phi / std::sqrt(phi.squaredNorm() / static_cast<double>(size));
}

double median(std::vector<double> v) {
  require(!v.empty(), "median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

namespace {

Schedule make_schedule(const ExperimentConfig::Optim& o) {
  if (o.schedule == "constant") return Schedule::constant(o.eta0);
  if (o.schedule == "inverse_sqrt") return Schedule::inverse_sqrt(o.eta0, o.n);
  return Schedule::h4_style(o.eta0, o.m0);
}

std::string join_list(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string join_index(const std::vector<Index>& v) {
  std::string out;
  for (Index s : v) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out;
}

Vector theta_from(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Vector checked_theta0(const ExperimentConfig& cfg, const Ansatz& psi, const Vector& fallback) {
  if (cfg.ansatz.theta0.empty()) return fallback;
  Vector t = theta_from(cfg.ansatz.theta0);
  if (t.size() != psi.num_params())
    throw ConfigError("ansatz.theta0 has " + std::to_string(t.size()) + " entries, the ansatz needs " +
                      std::to_string(psi.num_params()));
  return t;
}

Index cosine_features(const ExperimentConfig& cfg) {
  if (cfg.ansatz.features.empty()) return 2;
  const std::string& f = cfg.ansatz.features.front();
  if (cfg.ansatz.features.size() != 1 || f.rfind("cosine:", 0) != 0)
    throw ConfigError("finite expfamily ansatz takes features = cosine:<d>");
  const long long d = parse_int(f.substr(7));
  if (d < 1) throw ConfigError("cosine:<d> needs d >= 1");
  return static_cast<Index>(d);
}

std::vector<Feature> box_features(const ExperimentConfig& cfg, const std::string& fallback) {
  std::vector<Feature> out;
  const auto names = cfg.ansatz.features.empty() ? std::vector<std::string>{fallback} : cfg.ansatz.features;
  for (const auto& n : names) {
    try {
      out.push_back(feature_by_name(n));
    } catch (const Error& e) {
      throw ConfigError(std::string("ansatz.features: ") + e.what());
    }
  }
  return out;
}

RhoSampler::McmcSettings mcmc_settings(const ExperimentConfig& cfg) {
  RhoSampler::McmcSettings m;
  m.walkers = cfg.sampler.walkers;
  m.burn_in = cfg.sampler.burn_in;
  m.thinning = cfg.sampler.thinning;
  m.step_size = cfg.sampler.step_size;
  return m;
}

std::string ansatz_line(const ExperimentConfig& cfg, const Ansatz& psi) {
  std::string s = psi.kind() + "(d=" + std::to_string(psi.num_params());
  if (!cfg.ansatz.features.empty()) s += ",features=" + join_list(cfg.ansatz.features);
  if (cfg.ansatz.kind == "mlp" || cfg.ansatz.kind == "matrix_mlp") s += ",hidden=" + join_index(cfg.ansatz.hidden);
  return s + ")";
}

void common_meta(Trace& t, const std::string& command, const ExperimentConfig& cfg, const Schedule& sched) {
  t.meta = {{"command", command},
            {"system", cfg.system.kind},
            {"schedule", sched.describe()},
            {"n", std::to_string(cfg.optim.n)},
            {"steps", std::to_string(cfg.optim.steps)},
            {"seed", std::to_string(cfg.run.seed)}};
}

void slope_summary(RunOutput& out) {
  if (!out.trace.has_column_values("runmin_grad_norm") || out.trace.rows.size() < 210) return;
  try {
    const auto fit = loglog_slope(out.trace.column("runmin_grad_norm"), 200);
    out.summary.push_back("runmin |G| log-log slope (from step 200): " + format_double(fit.slope));
  } catch (const Error& e) {
    out.summary.push_back(std::string("slope fit unavailable: ") + e.what());
  }
}

}  // namespace

RunOutput run_vmc(const ExperimentConfig& cfg) {
  validate_config(cfg);
  VmcConfig vc;
  vc.n = cfg.optim.n;
  vc.steps = cfg.optim.steps;
  vc.seed = cfg.run.seed;
  vc.schedule = make_schedule(cfg.optim);
  vc.burn_in = cfg.sampler.burn_in;
  vc.thinning = cfg.sampler.thinning;
  vc.step_size = cfg.sampler.step_size;
  std::optional<Spectrum> spectrum;
  const std::string& kind = cfg.system.kind;
  if (kind == "finite") {
    const Index s = cfg.system.size;
    const Vector diag = cfg.system.diagonal.empty() ? default_diagonal(s) : theta_from(cfg.system.diagonal);
    vc.hamiltonian = path_hamiltonian(diag);
    vc.sampler = VmcConfig::Sampler::Exact;
    if (cfg.ansatz.kind == "table") {
      vc.ansatz = std::make_shared<TableAnsatz>(s);
      vc.theta0 = checked_theta0(cfg, *vc.ansatz, Vector::Ones(s));
    } else {
      vc.ansatz = std::make_shared<ExpFamilyAnsatz>(cosine_feature_table(s, cosine_features(cfg)));
      vc.theta0 = checked_theta0(cfg, *vc.ansatz, Vector::Zero(vc.ansatz->num_params()));
    }
    spectrum = ground_truth_spectrum(vc.hamiltonian);
  } else if (kind == "ho1d" || kind == "hatom") {
    const bool ho = kind == "ho1d";
    vc.hamiltonian = ho ? harmonic_oscillator(1) : hydrogen_atom();
    vc.space = ConfigSpace::cube(ho ? 1 : 3, cfg.system.half_width);
    vc.sampler = VmcConfig::Sampler::Metropolis;
    if (cfg.ansatz.kind == "expfamily") {
      auto feats = box_features(cfg, ho ? "gaussian" : "radial");
      const Index d = static_cast<Index>(feats.size());
      vc.ansatz = std::make_shared<ExpFamilyAnsatz>(std::move(feats), ho ? 1 : 3);
      vc.theta0 = checked_theta0(cfg, *vc.ansatz, Vector::Constant(d, ho ? 0.3 : 0.5));
    } else {
      auto mlp = std::make_shared<MlpAnsatz>(ho ? 1 : 3, cfg.ansatz.hidden);
      Rng init(cfg.run.seed, 0x51);
      vc.theta0 = checked_theta0(cfg, *mlp, mlp->initial_parameters(init));
      vc.ansatz = mlp;
    }
  } else {
    throw ConfigError("vmc-run needs system.kind = finite | ho1d | hatom, got " + kind);
  }

  const TrainResult res = vmc_train(vc);
  RunOutput out;
  out.ansatz_kind = vc.ansatz->kind();
  out.theta = res.theta;
  out.diverged = res.diverged;
  out.message = res.message;
  out.trace.kind = TraceKind::Vmc;
  out.trace.rows = res.trace;
  common_meta(out.trace, "vmc-run", cfg, vc.schedule);
  out.trace.meta.emplace_back("ansatz", ansatz_line(cfg, *vc.ansatz));
  out.trace.meta.emplace_back(
      "sampling", vc.sampler == VmcConfig::Sampler::Exact
                      ? std::string("exact")
                      : "metropolis(step=" + (cfg.sampler.step_size > 0 ? format_double(cfg.sampler.step_size) : std::string("tuned")) +
                            ",burn_in=" + std::to_string(cfg.sampler.burn_in) +
                            ",thinning=" + std::to_string(cfg.sampler.thinning) + ")");
  if (spectrum) {
    const double l0 = exact_energy(vc.hamiltonian, *vc.ansatz, vc.theta0);
    out.trace.meta.emplace_back("e0", format_double(spectrum->e0));
    out.trace.meta.emplace_back("loss_gap", format_double(l0 - spectrum->e0));
  }

  if (spectrum && !res.diverged) {
    const double e = exact_energy(vc.hamiltonian, *vc.ansatz, res.theta);
    out.summary.push_back("final energy: " + format_double(e));
    out.summary.push_back("E0: " + format_double(spectrum->e0) + "  gap: " + format_double(e - spectrum->e0));
  } else if (!res.trace.empty()) {
    const auto& rows = res.trace;
    const std::size_t tail = std::max<std::size_t>(1, rows.size() / 10);
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = rows.size() - tail; i < rows.size(); ++i)
      if (rows[i].energy_est && std::isfinite(*rows[i].energy_est)) {
        acc += *rows[i].energy_est;
        ++cnt;
      }
    if (cnt) out.summary.push_back("mean energy over the last " + std::to_string(tail) + " steps: " + format_double(acc / static_cast<double>(cnt)));
  }
  std::string th;
  for (Index i = 0; i < std::min<Index>(res.theta.size(), 8); ++i) th += (i ? " " : "") + format_double(res.theta(i));
  out.summary.push_back("theta: " + th + (res.theta.size() > 8 ? " ..." : ""));
  slope_summary(out);
  if (res.diverged) out.summary.push_back("DIVERGED: " + res.message);
  return out;
}

RunOutput run_pretrain(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const std::string& kind = cfg.system.kind;
  const Schedule sched = make_schedule(cfg.optim);
  RunOutput out;
  if (kind == "pretrain_toy") {
    OrbitalPretrainConfig oc;
    oc.electrons = cfg.system.electrons;
    oc.determinants = cfg.ansatz.determinants;
    oc.hidden = cfg.ansatz.hidden;
    oc.batch = cfg.optim.n;
    oc.steps = cfg.optim.steps;
    oc.schedule = sched;
    oc.loss = cfg.pretrain.loss == "si" ? OrbitalLoss::ScaleInvariant : OrbitalLoss::Mse;
    oc.seed = cfg.run.seed;
    oc.sample_from_target = cfg.pretrain.rho == "target";
    oc.half_width = cfg.system.half_width;
    oc.eval_points = cfg.pretrain.eval_points;
    oc.mcmc = mcmc_settings(cfg);
    if (!cfg.ansatz.theta0.empty()) oc.theta0 = theta_from(cfg.ansatz.theta0);
    const OrbitalPretrainResult res = orbital_pretrain(oc);
    out.ansatz_kind = "matrix_mlp";
    out.theta = res.theta;
    out.trace.kind = TraceKind::Orbital;
    out.trace.rows = res.trace;
    common_meta(out.trace, "pretrain-run", cfg, sched);
    out.trace.meta.emplace_back("ansatz", "matrix_mlp(electrons=" + std::to_string(oc.electrons) +
                                              ",determinants=" + std::to_string(oc.determinants) +
                                              ",hidden=" + join_index(oc.hidden) + ")");
    out.trace.meta.emplace_back("loss", cfg.pretrain.loss);
    out.trace.meta.emplace_back("sampling", "rho=" + cfg.pretrain.rho);
    out.summary.push_back("final sin angle: " + format_double(res.final_angle));
    out.summary.push_back("final loss: " + format_double(*res.trace.back().loss));
    return out;
  }

  PretrainConfig pc;
  pc.n = cfg.optim.n;
  pc.steps = cfg.optim.steps;
  pc.seed = cfg.run.seed;
  pc.schedule = sched;
  pc.strategy = norm_strategy_from_string(cfg.pretrain.strategy);
  pc.norm_batch = cfg.pretrain.norm_batch;
  pc.period = cfg.pretrain.period;
  pc.eval_points = cfg.pretrain.eval_points;
  pc.mcmc = mcmc_settings(cfg);
  Rng init(cfg.run.seed, 0x7);
  std::optional<double> loss_gap;
  if (kind == "pretrain_finite") {
    const Index s = cfg.system.size;
    const Vector phi = cfg.system.target.empty() ? random_unit_target(s, cfg.system.target_seed)
                                                 : theta_from(cfg.system.target);
    pc.target = Target::finite(phi, Measure::uniform(s));
    if (cfg.ansatz.kind == "table") {
      pc.ansatz = std::make_shared<TableAnsatz>(s);
      Vector t(s);
      for (Index i = 0; i < s; ++i) t(i) = init.normal();
      if (phi.dot(t) < 0) t = -t;
      pc.theta0 = checked_theta0(cfg, *pc.ansatz, t);
    } else {
      pc.ansatz = std::make_shared<ExpFamilyAnsatz>(cosine_feature_table(s, cosine_features(cfg)));
      pc.theta0 = checked_theta0(cfg, *pc.ansatz, Vector::Zero(pc.ansatz->num_params()));
    }
    const double phi_norm = std::sqrt(inner_product(phi, phi, pc.target->measure()));
    loss_gap = objective(*pc.ansatz, pc.theta0, *pc.target) + phi_norm;
  } else if (kind == "pretrain_gauss") {
    const ConfigSpace box = ConfigSpace::cube(1, cfg.system.half_width);
    const ScalarField phi = [](const Vector& x) { return std::exp(-0.5 * x.squaredNorm()); };
    pc.target = Target::continuous(phi, cfg.pretrain.rho == "target" ? Measure::target_induced(phi) : Measure::lebesgue(), box);
    if (cfg.ansatz.kind == "mlp") {
      auto mlp = std::make_shared<MlpAnsatz>(1, cfg.ansatz.hidden);
      Vector t = mlp->initial_parameters(init);
      double overlap = 0.0;
      for (int i = 0; i <= 200; ++i) {
        const double x = -cfg.system.half_width + 2.0 * cfg.system.half_width * i / 200.0;
        const Vector xv = Vector::Constant(1, x);
        overlap += phi(xv) * mlp->value(t, ConfigPoint(xv));
      }
      if (overlap < 0) t(mlp->scale_index()) = -t(mlp->scale_index());
      pc.theta0 = checked_theta0(cfg, *mlp, t);
      pc.ansatz = mlp;
    } else {
      auto feats = box_features(cfg, "gaussian");
      const Index d = static_cast<Index>(feats.size());
      pc.ansatz = std::make_shared<ExpFamilyAnsatz>(std::move(feats), 1);
      pc.theta0 = checked_theta0(cfg, *pc.ansatz, Vector::Constant(d, 0.3));
    }
  } else {
    throw ConfigError("pretrain-run needs system.kind = pretrain_finite | pretrain_gauss | pretrain_toy, got " + kind);
  }

  const TrainResult res = pretrain_train(pc);
  out.ansatz_kind = pc.ansatz->kind();
  out.theta = res.theta;
  out.diverged = res.diverged;
  out.message = res.message;
  out.trace.kind = TraceKind::Pretrain;
  out.trace.rows = res.trace;
  common_meta(out.trace, "pretrain-run", cfg, sched);
  out.trace.meta.emplace_back("ansatz", ansatz_line(cfg, *pc.ansatz));
  out.trace.meta.emplace_back("strategy", to_string(pc.strategy) + (pc.strategy == NormStrategy::PeriodicLargeBatch ? "(K=" + std::to_string(pc.period) + ")" : ""));
  out.trace.meta.emplace_back("sampling", kind == "pretrain_finite" ? std::string("rho=finite_uniform") : "rho=" + cfg.pretrain.rho);
  if (loss_gap) out.trace.meta.emplace_back("loss_gap", format_double(*loss_gap));
  if (!res.trace.empty()) {
    const TraceRow& last = res.trace.back();
    if (last.si_loss) out.summary.push_back("final si_loss: " + format_double(*last.si_loss));
    if (last.angle) out.summary.push_back("final sin angle: " + format_double(*last.angle));
    if (last.objective) out.summary.push_back("final objective: " + format_double(*last.objective));
    double worst = 1.0;
    for (const auto& r : res.trace)
      if (r.norm_ratio && *r.norm_ratio > 0) worst = std::max({worst, *r.norm_ratio, 1.0 / *r.norm_ratio});
    out.summary.push_back("max norm ratio excursion max(r, 1/r): " + format_double(worst));
  }
  slope_summary(out);
  if (res.diverged) out.summary.push_back("DIVERGED: " + res.message);
  return out;
}

CompareOutput compare_pretrain(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.system.kind != "pretrain_toy") throw ConfigError("compare-pretrain needs system.kind = pretrain_toy");
  CompareOutput out;
  for (Index k = 0; k < cfg.pretrain.seeds; ++k) {
    ExperimentConfig c = cfg;
    c.run.seed = cfg.run.seed + static_cast<std::uint64_t>(k);
    c.pretrain.loss = "si";
    out.si.push_back(run_pretrain(c));
    c.pretrain.loss = "mse";
    out.mse.push_back(run_pretrain(c));
    const double a = *out.si.back().trace.rows.back().angle;
    const double b = *out.mse.back().trace.rows.back().angle;
    out.si_angles.push_back(a);
    out.mse_angles.push_back(b);
    out.summary.push_back("seed " + std::to_string(c.run.seed) + ": si angle " + format_double(a) +
                          "  mse angle " + format_double(b));
  }
  out.si_median = median(out.si_angles);
  out.mse_median = median(out.mse_angles);
  out.summary.push_back("median final sin angle: si " + format_double(out.si_median) + "  mse " +
                        format_double(out.mse_median));
  return out;
}

// ---------------------------------------------------------------------------
// Checks

namespace {

CheckResult finish(std::string name, double error, double tol, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.error = error;
  r.tolerance = tol;
  r.passed = std::isfinite(error) && error <= tol;
  r.detail = std::move(detail);
  return r;
}

struct FiniteCase {
  Index s;
  Index n;
  Fixture fx;
};

FiniteCase make_case(Rng& rng, Index f) {
  FiniteCase c;
  c.s = 2 + f % 4;
  c.n = 2 + (f / 4) % 2;
  c.fx = random_fixture(rng, c.s);
  return c;
}

Vector random_weights(Rng& rng, Index s) {
  Vector w(s);
  for (Index i = 0; i < s; ++i) w(i) = 0.2 + rng.uniform();
  return w / w.sum();
}

double rel_err(const Vector& a, const Vector& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

CheckResult check_vmc_estimator_unbiased(Index fixtures, std::uint64_t seed) {
  Rng rng(seed, 0xa1);
  double worst = 0.0;
  for (Index f = 0; f < fixtures; ++f) {
    const FiniteCase c = make_case(rng, f);
    const Hamiltonian h = Hamiltonian::matrix(c.fx.h);
    const TableAnsatz psi(c.s);
    const Vector& th = c.fx.theta;
    const Vector values = psi_vector(psi, th, c.s);
    const Vector h_psi = c.fx.h * values;
    const Vector p = BornDensity::from_values(values).probabilities;
    const Vector expected = enumerate_expectation(
        [&](const std::vector<Index>& t) {
          const Index n = static_cast<Index>(t.size());
          Vector e(n);
          Matrix gl(c.s, n);
          for (Index i = 0; i < n; ++i) {
            const Index x = t[static_cast<std::size_t>(i)];
            e(i) = h_psi(x) / values(x);
            gl.col(i) = psi.grad_log_abs(th, ConfigPoint(x));
          }
          return grad_estimator(e, gl).g;
        },
        p, c.n);
    worst = std::max(worst, (expected - exact_grad_energy(h, psi, th)).cwiseAbs().maxCoeff());
  }
  return finish("vmc_estimator_unbiased", worst, 1e-10, std::to_string(fixtures) + " fixtures, S in 2..5, n in {2,3}");
}

CheckResult check_zero_mean_local_energy_gradient(Index fixtures, std::uint64_t seed, bool asymmetric) {
  Rng rng(seed, 0xa1);
  double worst = 0.0;
  for (Index f = 0; f < fixtures; ++f) {
    FiniteCase c = make_case(rng, f);
    if (asymmetric) c.fx.h(0, 1) += 0.5;
    const Hamiltonian h = asymmetric ? Hamiltonian::unchecked_matrix(c.fx.h) : Hamiltonian::matrix(c.fx.h);
    const TableAnsatz psi(c.s);
    const Vector p = BornDensity::from_ansatz(psi, c.fx.theta, c.s).probabilities;
    const Vector mean = enumerate_expectation(
        [&](const std::vector<Index>& t) { return local_energy_gradient(h, psi, c.fx.theta, t[0]); }, p, 1);
    worst = std::max(worst, mean.cwiseAbs().maxCoeff());
  }
  return finish("zero_mean_local_energy_gradient", worst, 1e-10,
                asymmetric ? "asymmetric H injected" : "sum_x p(x) grad E(x) over the fixtures");
}

CheckResult check_directional_unbiasedness(Index fixtures, std::uint64_t seed, bool use_plugin) {
  Rng rng(seed, 0xb2);
  double worst = 0.0, worst_angle = 0.0;
  for (Index f = 0; f < fixtures; ++f) {
    const Index s = 2 + f % 4;
    const Index n = use_plugin ? 2 : 2 + (f / 4) % 2;
    const Vector w = random_weights(rng, s);
    Vector phi(s);
    for (Index i = 0; i < s; ++i) phi(i) = rng.normal();
    const Vector theta = random_fixture(rng, s).theta;
    const Target target = Target::finite(phi, Measure::finite_weights(w));
    const TableAnsatz psi(s);
    const double z = exact_norm(psi, theta, target.measure());
    const Vector grad = exact_grad_supervised(psi, theta, target);
    for (double zf : {0.5, 1.0, 2.0}) {
      const double zt = zf * z;
      const Vector eg = enumerate_expectation(
          [&](const std::vector<Index>& t) {
            if (use_plugin) return plugin_biased_estimator(psi, theta, target, t[0], t[1], zt).g;
            return lemma2_estimator(psi, theta, target, std::vector<ConfigPoint>(t.begin(), t.end()), zt).g;
          },
          w, n);
      const Vector expected = std::pow(z / zt, 3) * grad;
      worst = std::max(worst, (eg - expected).cwiseAbs().maxCoeff());
      if (grad.norm() > 0 && eg.norm() > 0) worst_angle = std::max(worst_angle, vector_angle(eg, grad));
    }
  }
  return finish("directional_unbiasedness", worst, 1e-10,
                std::string(use_plugin ? "plug-in estimator injected; " : "") +
                    "Z~ in {0.5Z, Z, 2Z}; max angle to grad L " + format_double(worst_angle) + " rad");
}

CheckResult check_plugin_counterexample() {
  Vector phi(2), theta(2);
  phi << 1, 0;
  theta << 1, 1;
  const Target target = Target::finite(phi, Measure::uniform(2));
  const TableAnsatz psi(2);
  const Vector grad = exact_grad_supervised(psi, theta, target);
  const Vector w = target.measure().weights();
  const Vector plug = enumerate_expectation(
      [&](const std::vector<Index>& t) { return plugin_biased_estimator(psi, theta, target, t[0], t[1], 2.0).g; }, w, 2);
  const Vector lem = enumerate_expectation(
      [&](const std::vector<Index>& t) {
        return lemma2_estimator(psi, theta, target, std::vector<ConfigPoint>(t.begin(), t.end()), 2.0).g;
      },
      w, 2);
  const double a_plug = vector_angle(plug, grad);
  const double a_lem = vector_angle(lem, grad);
  CheckResult r = finish("plugin_counterexample", a_lem, 1e-10,
                         "E[plugin]=(" + format_double(plug(0)) + "," + format_double(plug(1)) + ") angle " +
                             format_double(a_plug) + " rad (needs > 1e-3); unbiased estimator angle " + format_double(a_lem));
  r.passed = r.passed && a_plug > 1e-3;
  return r;
}

CheckResult check_energy_gradient_formula(Index fixtures, std::uint64_t seed) {
  Rng rng(seed, 0xc3);
  double worst = 0.0;
  for (Index f = 0; f < fixtures; ++f) {
    const Index s = 2 + f % 5;
    const Fixture fx = random_fixture(rng, s);
    const Hamiltonian h = Hamiltonian::matrix(fx.h);
    const TableAnsatz psi(s);
    const Vector fd = fd_gradient([&](const Vector& t) { return exact_energy(h, psi, t); }, fx.theta);
    worst = std::max(worst, rel_err(exact_grad_energy(h, psi, fx.theta), fd));
  }
  return finish("energy_gradient_formula", worst, 1e-6, "relative error against central differences");
}

CheckResult check_supervised_gradient_formula(Index fixtures, std::uint64_t seed) {
  Rng rng(seed, 0xd4);
  double worst = 0.0;
  for (Index f = 0; f < fixtures; ++f) {
    const Index s = 2 + f % 5;
    const Vector w = random_weights(rng, s);
    Vector phi(s);
    for (Index i = 0; i < s; ++i) phi(i) = rng.normal();
    const Vector theta = random_fixture(rng, s).theta;
    const Target target = Target::finite(phi, Measure::finite_weights(w));
    const TableAnsatz psi(s);
    const Vector fd = fd_gradient([&](const Vector& t) { return objective(psi, t, target); }, theta);
    worst = std::max(worst, rel_err(exact_grad_supervised(psi, theta, target), fd));
  }
  return finish("supervised_gradient_formula", worst, 1e-6, "relative error against central differences");
}

CheckResult check_scale_invariance(std::uint64_t seed) {
  Rng rng(seed, 0xe5);
  double worst = 0.0;
  for (Index f = 0; f < 10; ++f) {
    const Index s = 2 + f % 4;
    const Fixture fx = random_fixture(rng, s);
    const Hamiltonian h = Hamiltonian::matrix(fx.h);
    const TableAnsatz psi(s);
    const Vector w = random_weights(rng, s);
    Vector phi(s);
    for (Index i = 0; i < s; ++i) phi(i) = rng.normal();
    const Target target = Target::finite(phi, Measure::finite_weights(w));
    const Vector& th = fx.theta;
    for (double lambda : {-3.0, 0.01, 7.0}) {
      const Vector lt = lambda * th;
      worst = std::max(worst, rel_diff(exact_energy(h, psi, lt), exact_energy(h, psi, th)));
      worst = std::max(worst, rel_diff(si_loss(lt, phi, w), si_loss(th, phi, w)));
      worst = std::max(worst, rel_diff(wavefunction_angle(lt, phi, w), wavefunction_angle(th, phi, w)));
      const double sign = lambda > 0 ? 1.0 : -1.0;
      worst = std::max(worst, rel_diff(objective(psi, lt, target), sign * objective(psi, th, target)));
    }
  }
  return finish("scale_invariance", worst, 1e-12,
                "exact_energy, si_loss, wavefunction_angle, objective (sign-flips for lambda < 0); lambda in {-3, 0.01, 7}");
}

CheckResult check_moment_scale_invariance(std::uint64_t seed) {
  Rng rng(seed, 0xf6);
  double worst = 0.0;
  for (Index f = 0; f < 10; ++f) {
    const Index s = 2 + f % 4;
    const Fixture fx = random_fixture(rng, s);
    const Hamiltonian h = Hamiltonian::matrix(fx.h);
    const auto base = std::make_shared<TableAnsatz>(s);
    const Measure rho = Measure::finite_weights(random_weights(rng, s));
    const VmcMoments m0 = vmc_moments_exact(h, *base, fx.theta);
    const PretrainMoments p0 = pretrain_moments_exact(*base, fx.theta, rho);
    for (double lambda : {-3.0, 0.01, 7.0}) {
      const ScaledAnsatz scaled(base, lambda);
      const VmcMoments m = vmc_moments_exact(h, scaled, fx.theta);
      const PretrainMoments p = pretrain_moments_exact(scaled, fx.theta, rho);
      worst = std::max({worst, rel_diff(m.e4, m0.e4), rel_diff(m.de2, m0.de2), rel_diff(m.dpsi4, m0.dpsi4),
                        rel_diff(m.hess2.value_or(0), m0.hess2.value_or(0)), rel_diff(p.v, p0.v),
                        rel_diff(p.g, p0.g), rel_diff(p.h.value_or(0), p0.h.value_or(0))});
    }
  }
  return finish("moment_scale_invariance", worst, 1e-12, "assumption moments under psi -> lambda psi");
}

CheckResult check_orbital_losses() {
  Rng rng(5, 0x0b);
  const Index batch = 6, n = 2;
  OrbitalTargets phi(batch);
  OrbitalBatch y(batch);
  for (Index b = 0; b < batch; ++b) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = rng.normal();
    phi[static_cast<std::size_t>(b)] = slater_orbitals(x);
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) m(i, j) = rng.normal();
    y[static_cast<std::size_t>(b)] = {m};
  }
  double worst = 0.0;
  // Exact columns give zero loss.
  OrbitalBatch exact(batch);
  for (Index b = 0; b < batch; ++b) exact[static_cast<std::size_t>(b)] = {phi[static_cast<std::size_t>(b)]};
  worst = std::max(worst, std::abs(columnwise_si_loss(exact, phi)));
  worst = std::max(worst, std::abs(mse_orbital_loss(exact, phi)));
  // Per-column scaling leaves the scale-invariant loss unchanged.
  const double base = columnwise_si_loss(y, phi);
  const double lambdas[] = {-3.0, 0.01, 7.0};
  OrbitalBatch scaled = y;
  for (auto& per : scaled)
    for (Index j = 0; j < n; ++j) per[0].col(j) *= lambdas[j % 3];
  worst = std::max(worst, rel_diff(columnwise_si_loss(scaled, phi), base));
  // The MSE loss is not scale invariant: y = 2 phi gives sum phi^2.
  OrbitalBatch doubled = exact;
  double phi_sq = 0.0;
  for (Index b = 0; b < batch; ++b) {
    doubled[static_cast<std::size_t>(b)][0] *= 2.0;
    phi_sq += phi[static_cast<std::size_t>(b)].squaredNorm();
  }
  worst = std::max(worst, rel_diff(mse_orbital_loss(doubled, phi), phi_sq));
  const double mse_change = std::abs(mse_orbital_loss(scaled, phi) - mse_orbital_loss(y, phi));
  CheckResult r = finish("orbital_losses", worst, 1e-12,
                         "columnwise loss invariant to column scaling; mse changes by " + format_double(mse_change));
  r.passed = r.passed && mse_change > 1e-3;
  return r;
}

CheckResult check_best_fit_identity(std::uint64_t seed) {
  Rng rng(seed, 0x1c);
  double worst = 0.0;
  for (Index f = 0; f < 20; ++f) {
    const Index s = 2 + f % 6;
    const Measure rho = Measure::finite_weights(random_weights(rng, s));
    Vector psi(s), phi(s);
    for (Index i = 0; i < s; ++i) {
      psi(i) = rng.normal();
      phi(i) = rng.normal();
    }
    worst = std::max(worst, std::abs(best_fit_residual(psi, phi, rho) - si_loss(psi, phi, rho)));
  }
  return finish("best_fit_identity", worst, 1e-12, "min_lambda ||lambda psi - phi||^2 against the closed form");
}

CheckResult check_spectrum_residual(std::uint64_t seed) {
  Rng rng(seed, 0x2d);
  double worst = 0.0;
  for (Index f = 0; f < 20; ++f) {
    const Fixture fx = random_fixture(rng, 2 + f % 8);
    const Spectrum sp = ground_truth_spectrum(Hamiltonian::matrix(fx.h));
    worst = std::max(worst, (fx.h * sp.psi0 - sp.e0 * sp.psi0).cwiseAbs().maxCoeff());
  }
  return finish("spectrum_residual", worst, 1e-8, "||H psi0 - E0 psi0||_inf");
}

CheckResult check_ansatz_derivatives(std::uint64_t seed) {
  Rng rng(seed, 0x3e);
  double worst = 0.0;
  auto probe = [&](const Ansatz& a, const Vector& th, const ConfigPoint& x) {
    Vector g;
    const double v = a.value_and_grad(th, x, g);
    worst = std::max(worst, rel_err(g, finite_diff_gradient(a, th, x)));
    if (v != 0.0) worst = std::max(worst, rel_err(a.grad_log_abs(th, x), g / v));
  };
  const TableAnsatz table(4);
  probe(table, random_fixture(rng, 4).theta, ConfigPoint(Index{2}));
  const ExpFamilyAnsatz exp3({gaussian_feature(), radial_feature()}, 3);
  Vector th2(2);
  th2 << 0.7, 0.4;
  Vector x3(3);
  for (Index i = 0; i < 3; ++i) x3(i) = rng.normal();
  probe(exp3, th2, ConfigPoint(x3));
  const double lap = exp3.laplacian_x(th2, ConfigPoint(x3));
  worst = std::max(worst, rel_diff(laplacian_fallback(exp3, th2, x3).value, lap));
  const MlpAnsatz mlp(2);
  Rng init(seed, 0x4f);
  const Vector tm = mlp.initial_parameters(init);
  probe(mlp, tm, ConfigPoint(Vector(Vector::Constant(2, 0.3))));
  const MatrixMlpAnsatz orb(2, 2, {8});
  const Vector to = orb.initial_parameters(init);
  Vector xo(2);
  xo << 0.4, -0.9;
  probe(orb, to, ConfigPoint(xo));
  return finish("ansatz_derivatives", worst, 1e-5, "table, expfamily (with laplacian), mlp, matrix_mlp");
}

CheckResult check_born_scale_invariance(std::uint64_t seed) {
  Rng rng(seed, 0x5a);
  double worst = 0.0;
  for (Index f = 0; f < 10; ++f) {
    const Fixture fx = random_fixture(rng, 2 + f % 5);
    const TableAnsatz psi(fx.theta.size());
    const Vector p = BornDensity::from_ansatz(psi, fx.theta, fx.theta.size()).probabilities;
    for (double lambda : {-3.0, 0.01, 7.0}) {
      const Vector q = BornDensity::from_ansatz(psi, lambda * fx.theta, fx.theta.size()).probabilities;
      worst = std::max(worst, (p - q).cwiseAbs().maxCoeff());
    }
  }
  return finish("born_scale_invariance", worst, 1e-15, "p_theta under theta -> lambda theta");
}

CheckResult check_hamiltonian_symmetry(std::uint64_t seed) {
  Rng rng(seed, 0x6b);
  double worst = 0.0;
  for (Index f = 0; f < 10; ++f) {
    const Index s = 2 + f % 6;
    const Fixture fx = random_fixture(rng, s);
    Vector a(s), b(s);
    for (Index i = 0; i < s; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    const Vector w = Vector::Constant(s, 1.0 / static_cast<double>(s));
    const Vector ha = fx.h * a, hb = fx.h * b;
    worst = std::max(worst, std::abs(inner_product(a, hb, w) - inner_product(ha, b, w)));
  }
  return finish("hamiltonian_symmetry", worst, 1e-12, "<a, H b> = <H a, b>");
}

std::vector<CheckResult> run_verify(Injection injection) {
  const std::uint64_t seed = 2024;
  return {
      check_vmc_estimator_unbiased(50, seed),
      check_zero_mean_local_energy_gradient(50, seed, injection == Injection::AsymmetricH),
      check_directional_unbiasedness(24, seed, injection == Injection::Plugin),
      check_plugin_counterexample(),
      check_energy_gradient_formula(20, seed),
      check_supervised_gradient_formula(20, seed),
      check_scale_invariance(seed),
      check_moment_scale_invariance(seed),
      check_orbital_losses(),
      check_best_fit_identity(seed),
      check_spectrum_residual(seed),
      check_ansatz_derivatives(seed),
      check_born_scale_invariance(seed),
      check_hamiltonian_symmetry(seed),
  };
}

// ---------------------------------------------------------------------------
// Report

namespace {

using Field = std::optional<double> TraceRow::*;

// (step + 1, value) pairs for the rows where the field is present.
std::pair<Vector, Vector> present(const Trace& t, Field f) {
  std::vector<double> xs, ys;
  for (const auto& r : t.rows)
    if (r.*f) {
      xs.push_back(static_cast<double>(r.step + 1));
      ys.push_back(*(r.*f));
    }
  return {Eigen::Map<Vector>(xs.data(), static_cast<Index>(xs.size())),
          Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()))};
}

std::optional<ConvergenceFit> try_slope(const Vector& runmin, Index burn_in, std::string* note) {
  const Index b = std::min<Index>(burn_in, std::max<Index>(0, runmin.size() - 10));
  try {
    ConvergenceFit fit = loglog_slope(runmin, b);
    *note = "slope " + format_double(fit.slope) + " (fit from step " + std::to_string(b) + ")";
    return fit;
  } catch (const Error& e) {
    *note = std::string("no slope: ") + e.what();
    return std::nullopt;
  }
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string("-"); }

}  // namespace

ReportOutput build_report(const std::vector<Trace>& traces, const std::vector<std::string>& names,
                          Index burn_in) {
  require(traces.size() == names.size(), "build_report: one name per trace");
  require(!traces.empty(), "build_report: no traces");
  ReportOutput out;
  std::ostringstream text;
  Plot overlay_runmin{"running minimum of |G|", "step", "min |G|", true, true, {}, {}};
  Plot overlay_angle{"sin angle to the target", "step", "sin angle", false, true, {}, {}};
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const Trace& t = traces[k];
    const std::string& name = names[k];
    if (t.rows.empty()) throw ConfigError(name + ": trace has no rows");
    text << "== " << name << " (" << to_string(t.kind) << ", " << t.rows.size() << " steps)\n";
    for (const auto& [key, v] : t.meta) text << "  " << key << ": " << v << "\n";
    const TraceRow& last = t.rows.back();
    text << "  final: eta=" << format_double(last.eta) << " energy_est=" << fmt_opt(last.energy_est)
         << " energy_exact=" << fmt_opt(last.energy_exact) << " objective=" << fmt_opt(last.objective)
         << " loss=" << fmt_opt(last.loss) << " angle=" << fmt_opt(last.angle) << "\n";

    auto [gx, gy] = present(t, &TraceRow::grad_norm);
    if (gy.size() > 0) {
      const Vector rm = running_min(gy);
      std::string note;
      const auto fit = try_slope(rm, burn_in, &note);
      text << "  runmin |G|: " << note << "\n";
      Plot p{name + ": running minimum of |G|", "step", "min |G|", true, true, {{"min |G|", gx, rm}}, {note}};
      if (fit) {
        Vector fx(2), fy(2);
        fx << static_cast<double>(fit->burn_in_step + 1), gx(gx.size() - 1);
        fy << std::exp(fit->intercept) * std::pow(fx(0), fit->slope), std::exp(fit->intercept) * std::pow(fx(1), fit->slope);
        p.series.push_back({"fit", fx, fy});
      }
      out.files.push_back({name + "_runmin.svg", render_svg(p)});
      overlay_runmin.series.push_back({name, gx, rm});
    }
    auto [lx, ly] = present(t, &TraceRow::lipschitz_est);
    if (ly.size() > 0) {
      text << "  lipschitz estimate: median " << format_double(median(std::vector<double>(ly.data(), ly.data() + ly.size())))
           << " max " << format_double(ly.maxCoeff()) << "\n";
      Plot p{name + ": Lipschitz estimate |dG|/|dtheta|", "step", "estimate", false, true, {{"L est", lx, ly}}, {}};
      out.files.push_back({name + "_lipschitz.svg", render_svg(p)});
    }
    auto [ax, ay] = present(t, &TraceRow::angle);
    if (ay.size() > 0) {
      Plot p{name + ": sin angle to the target", "step", "sin angle", false, true, {{"sin angle", ax, ay}}, {}};
      out.files.push_back({name + "_angle.svg", render_svg(p)});
      overlay_angle.series.push_back({name, ax, ay});
    }
    const auto gap = t.meta_value("loss_gap");
    const auto n = t.meta_value("n");
    if (gap && n && t.has_column_values("exact_grad_norm")) {
      try {
        const LedgerReport lr = theorem_ledger(t, static_cast<Index>(parse_int(*n)), parse_double(*gap),
                                               t.kind == TraceKind::Pretrain);
        text << "  ledger: " << (lr.passed ? "holds" : "VIOLATED") << " " << lr.detail << "\n";
      } catch (const Error& e) {
        text << "  ledger unavailable: " << e.what() << "\n";
      }
    }
  }
  if (traces.size() >= 2) {
    if (overlay_runmin.series.size() >= 2) out.files.push_back({"compare_runmin.svg", render_svg(overlay_runmin)});
    if (overlay_angle.series.size() >= 2) out.files.push_back({"compare_angle.svg", render_svg(overlay_angle)});
  }
  text << "files:";
  for (const auto& f : out.files) text << " " << f.name;
  text << "\n";
  out.text = text.str();
  return out;
}

}  // namespace vmckit
