#include "vmckit/experiments.hpp"
#include "vmckit/oracle.hpp"
#include "vmckit/pretrain.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace vmckit;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Target toy_target() { return Target::finite(vec({1, 0}), Measure::uniform(2)); }

std::vector<ConfigPoint> points(const std::vector<Index>& t) { return {t.begin(), t.end()}; }

OrbitalTargets random_targets(Rng& rng, Index batch, Index n) {
  OrbitalTargets phi(static_cast<std::size_t>(batch));
  for (auto& m : phi) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = rng.normal();
    m = slater_orbitals(x);
  }
  return phi;
}

OrbitalBatch random_outputs(Rng& rng, Index batch, Index n, Index dets) {
  OrbitalBatch y(static_cast<std::size_t>(batch));
  for (auto& per : y) {
    per.resize(static_cast<std::size_t>(dets));
    for (auto& m : per) {
      m.resize(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) m(i, j) = rng.normal();
    }
  }
  return y;
}

}  // namespace

TEST(SiLoss, HandValues) {
  const Vector w = vec({0.5, 0.5});
  EXPECT_NEAR(si_loss(vec({1, 0}), vec({1, 0}), w), 0.0, 1e-15);
  EXPECT_NEAR(si_loss(vec({1, 1}), vec({1, 0}), w), 0.25, 1e-15);
  EXPECT_NEAR(si_loss(vec({0, 3}), vec({1, 0}), w), 0.5, 1e-15);
  EXPECT_THROW(si_loss(vec({0, 0}), vec({1, 0}), w), NumericalError);
}

TEST(SiLoss, EqualsBestFitResidual) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Index s = 2 + t % 6;
    Vector w(s), psi(s), phi(s);
    for (Index i = 0; i < s; ++i) {
      w(i) = rng.uniform() + 0.1;
      psi(i) = rng.normal();
      phi(i) = rng.normal();
    }
    const Measure rho = Measure::finite_weights(w);
    EXPECT_NEAR(best_fit_residual(psi, phi, rho), si_loss(psi, phi, rho), 1e-12);
  }
}

TEST(Angle, HandValues) {
  const Vector w = vec({0.5, 0.5});
  EXPECT_NEAR(wavefunction_angle(vec({3, 0}), vec({1, 0}), w), 0.0, 1e-15);
  EXPECT_NEAR(wavefunction_angle(vec({0, 1}), vec({1, 0}), w), 1.0, 1e-15);
  EXPECT_NEAR(wavefunction_angle(vec({1, 1}), vec({1, 0}), w), std::sqrt(0.5), 1e-15);
}

TEST(Objective, HandValues) {
  const TableAnsatz psi(2);
  EXPECT_NEAR(objective(psi, vec({1, 1}), toy_target()), -0.5, 1e-15);
  const Target unit = Target::finite(vec({1, 1}), Measure::uniform(2));
  EXPECT_NEAR(objective(psi, vec({4, 4}), unit), -1.0, 1e-15);
  // Literal sign convention: the flipped optimum sits at +||phi||.
  EXPECT_NEAR(objective(psi, vec({-4, -4}), unit), 1.0, 1e-15);
}

TEST(Objective, PositiveScaleInvariance) {
  Rng rng(2);
  const Target t = Target::finite(vec({0.3, -1.0, 0.8}), Measure::finite_weights(vec({1, 2, 3})));
  const TableAnsatz psi(3);
  const Vector th = vec({rng.normal(), rng.normal(), rng.normal()});
  const double l = objective(psi, th, t);
  for (double lambda : {0.01, 7.0}) EXPECT_NEAR(objective(psi, lambda * th, t), l, 1e-12);
  EXPECT_NEAR(objective(psi, -3.0 * th, t), -l, 1e-12);
}

TEST(ExactGradSupervised, HandValueAndFiniteDifferences) {
  const TableAnsatz psi(2);
  const Vector g = exact_grad_supervised(psi, vec({1, 1}), toy_target());
  EXPECT_NEAR(g(0), -0.25, 1e-15);
  EXPECT_NEAR(g(1), 0.25, 1e-15);
  EXPECT_LE(exact_grad_supervised(psi, vec({2, 0}), toy_target()).norm(), 1e-15);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Index s = 2 + t % 5;
    Vector w(s), phi(s), th(s);
    for (Index i = 0; i < s; ++i) {
      w(i) = rng.uniform() + 0.1;
      phi(i) = rng.normal();
      th(i) = rng.normal();
    }
    const Target tg = Target::finite(phi, Measure::finite_weights(w));
    const TableAnsatz p(s);
    const Vector fd = fd_gradient([&](const Vector& x) { return objective(p, x, tg); }, th);
    EXPECT_LE((exact_grad_supervised(p, th, tg) - fd).norm() / fd.norm(), 1e-6);
  }
}

TEST(PretrainEstimator, HandValue) {
  const TableAnsatz psi(2);
  EXPECT_TRUE(pretrain_coefficients(vec({1, 1}), vec({1, 0})).isApprox(vec({-0.5, 0.5})));
  const Vector g = lemma2_estimator(psi, vec({1, 1}), toy_target(), points({0, 1}), 1.0).g;
  EXPECT_NEAR(g(0), -0.5, 1e-15);
  EXPECT_NEAR(g(1), 0.5, 1e-15);
}

TEST(PretrainEstimator, ProportionalBatchGivesZero) {
  const Vector g = lemma2_estimator(vec({2, 4, -6}), vec({1, 2, -3}), Matrix::Identity(3, 3), 1.3).g;
  EXPECT_LE(g.norm(), 1e-15);
}

TEST(PretrainEstimator, EnumeratedHandCase) {
  const TableAnsatz psi(2);
  const Vector e = enumerate_expectation(
      [&](const std::vector<Index>& t) { return lemma2_estimator(psi, vec({1, 1}), toy_target(), points(t), 1.0).g; },
      vec({0.5, 0.5}), 2);
  EXPECT_NEAR(e(0), -0.25, 1e-15);
  EXPECT_NEAR(e(1), 0.25, 1e-15);
}

TEST(PretrainEstimator, DirectionalUnbiasednessOnFixtures) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const Index s = 2 + t % 4;
    const Index n = 2 + (t / 4) % 2;
    Vector w(s), phi(s), th(s);
    for (Index i = 0; i < s; ++i) {
      w(i) = rng.uniform() + 0.1;
      phi(i) = rng.normal();
      th(i) = (rng.uniform() < 0.5 ? -1 : 1) * (0.2 + rng.uniform());
    }
    const Target tg = Target::finite(phi, Measure::finite_weights(w));
    const TableAnsatz psi(s);
    const double z = exact_norm(psi, th, tg.measure());
    const Vector grad = exact_grad_supervised(psi, th, tg);
    for (double f : {0.5, 1.0, 2.0}) {
      const Vector e = enumerate_expectation(
          [&](const std::vector<Index>& tp) { return lemma2_estimator(psi, th, tg, points(tp), f * z).g; },
          tg.measure().weights(), n);
      EXPECT_LE((e - grad / (f * f * f)).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Plugin, UnbiasedOnlyAtExactNorm) {
  const TableAnsatz psi(2);
  const Target tg = toy_target();
  const Vector th = vec({1, 1});
  const auto expect = [&](double z) {
    return enumerate_expectation(
        [&](const std::vector<Index>& t) { return plugin_biased_estimator(psi, th, tg, t[0], t[1], z).g; },
        vec({0.5, 0.5}), 2);
  };
  const Vector grad = exact_grad_supervised(psi, th, tg);
  EXPECT_LE((expect(1.0) - grad).norm(), 1e-15);
  const Vector biased = expect(2.0);
  EXPECT_NEAR(biased(0), -0.21875, 1e-15);
  EXPECT_NEAR(biased(1), 0.03125, 1e-15);
  EXPECT_GT(vector_angle(biased, grad), 1e-3);
}

TEST(NormEstimator, ExhaustiveBatchIsExact) {
  const TableAnsatz psi(3);
  const Vector th = vec({2, -1, 0.5});
  const Target tg = Target::finite(vec({1, 1, 1}), Measure::uniform(3));
  RhoSampler sampler(tg.measure(), ConfigSpace::finite(3), 1);
  NormEstimator same(NormStrategy::SameBatch, 0);
  const NormEstimate z = same.estimate(psi, th, psi_vector(psi, th, 3), sampler, 0);
  EXPECT_NEAR(z.z_tilde, exact_norm(psi, th, tg.measure()), 1e-15);
}

TEST(NormEstimator, SquaredEstimateIsUnbiased) {
  const Vector psi = vec({2, 1});
  const Vector e = enumerate_expectation(
      [&](const std::vector<Index>& t) {
        double s = 0;
        for (Index x : t) s += psi(x) * psi(x);
        return Vector::Constant(1, s / static_cast<double>(t.size()));
      },
      vec({0.5, 0.5}), 3);
  EXPECT_NEAR(e(0), 2.5, 1e-15);
  const Vector ones = enumerate_expectation(
      [&](const std::vector<Index>&) { return Vector::Constant(1, 1.0); }, vec({0.5, 0.5}), 3);
  EXPECT_NEAR(ones(0), 1.0, 1e-15);
}

TEST(NormEstimator, PeriodicRefreshesOnSchedule) {
  const TableAnsatz psi(2);
  RhoSampler sampler(Measure::uniform(2), ConfigSpace::finite(2), 2);
  NormEstimator per(NormStrategy::PeriodicLargeBatch, 50, 4);
  std::vector<bool> refreshed;
  for (Index m = 0; m < 9; ++m) refreshed.push_back(per.estimate(psi, vec({1, 1}), vec({1, 1}), sampler, m).refreshed);
  EXPECT_EQ(refreshed, (std::vector<bool>{true, false, false, false, true, false, false, false, true}));
  EXPECT_EQ(norm_strategy_from_string("periodic"), NormStrategy::PeriodicLargeBatch);
  EXPECT_EQ(to_string(NormStrategy::IndependentBatch), "independent_batch");
  EXPECT_THROW(norm_strategy_from_string("bogus"), ConfigError);
}

TEST(NormEstimator, TwiceTheNormScalesExpectationByOneEighth) {
  const TableAnsatz psi(2);
  const Vector th = vec({1, 1});
  const Vector e = enumerate_expectation(
      [&](const std::vector<Index>& t) { return lemma2_estimator(psi, th, toy_target(), points(t), 2.0).g; },
      vec({0.5, 0.5}), 2);
  EXPECT_LE((e - exact_grad_supervised(psi, th, toy_target()) / 8.0).norm(), 1e-15);
}

TEST(ColumnwiseSi, PerfectOrthogonalAndScaled) {
  Rng rng(5);
  const OrbitalTargets phi = random_targets(rng, 8, 2);
  OrbitalBatch y(8);
  for (std::size_t b = 0; b < 8; ++b) y[b] = {phi[b]};
  EXPECT_NEAR(columnwise_si_loss(y, phi), 0.0, 1e-14);
  for (std::size_t b = 0; b < 8; ++b) {
    y[b][0].col(0) *= -3.0;
    y[b][0].col(1) *= 0.01;
  }
  EXPECT_NEAR(columnwise_si_loss(y, phi), 0.0, 1e-14);

  OrbitalTargets one(2);
  one[0] = Matrix::Constant(1, 1, 1.0);
  one[1] = Matrix::Constant(1, 1, 0.0);
  OrbitalBatch ortho(2);
  ortho[0] = {Matrix::Constant(1, 1, 0.0)};
  ortho[1] = {Matrix::Constant(1, 1, 5.0)};
  EXPECT_NEAR(columnwise_si_loss(ortho, one), 1.0, 1e-15);
}

TEST(ColumnwiseSi, ZeroColumnIsAnError) {
  Rng rng(6);
  const OrbitalTargets phi = random_targets(rng, 4, 2);
  OrbitalBatch y = random_outputs(rng, 4, 2, 1);
  for (auto& per : y) per[0].col(1).setZero();
  EXPECT_THROW(columnwise_si_loss(y, phi), NumericalError);
}

TEST(ColumnwiseSi, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const OrbitalTargets phi = random_targets(rng, 5, 2);
  OrbitalBatch y = random_outputs(rng, 5, 2, 2);
  const LossWithGrad lg = columnwise_si_loss_with_grad(y, phi);
  EXPECT_NEAR(lg.value, columnwise_si_loss(y, phi), 1e-14);
  for (std::size_t b = 0; b < 5; b += 2)
    for (std::size_t k = 0; k < 2; ++k)
      for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
          OrbitalBatch p = y, m = y;
          const double h = 1e-6;
          p[b][k](i, j) += h;
          m[b][k](i, j) -= h;
          const double fd = (columnwise_si_loss(p, phi) - columnwise_si_loss(m, phi)) / (2 * h);
          EXPECT_NEAR(lg.grad[b][k](i, j), fd, 1e-7);
        }
}

TEST(Mse, ValuesAndGradient) {
  Rng rng(8);
  const OrbitalTargets phi = random_targets(rng, 4, 2);
  double phi2 = 0;
  OrbitalBatch exact(4), zero(4), twice(4);
  for (std::size_t b = 0; b < 4; ++b) {
    exact[b] = {phi[b]};
    zero[b] = {Matrix::Zero(2, 2)};
    twice[b] = {2.0 * phi[b]};
    phi2 += phi[b].squaredNorm();
  }
  EXPECT_NEAR(mse_orbital_loss(exact, phi), 0.0, 1e-15);
  EXPECT_NEAR(mse_orbital_loss(zero, phi), phi2, 1e-12);
  EXPECT_NEAR(mse_orbital_loss(twice, phi), phi2, 1e-12);
  EXPECT_GT(mse_orbital_loss(twice, phi), 1e-3);
  EXPECT_NEAR(columnwise_si_loss(twice, phi), 0.0, 1e-14);

  OrbitalBatch y = random_outputs(rng, 4, 2, 1);
  const LossWithGrad lg = mse_orbital_loss_with_grad(y, phi);
  for (std::size_t b = 0; b < 4; ++b) EXPECT_TRUE(lg.grad[b][0].isApprox(2.0 * (y[b][0] - phi[b])));
}

TEST(Orbitals, HermiteAndSlater) {
  const double x = 0.7, g = std::exp(-0.5 * x * x);
  EXPECT_NEAR(hermite_orbital(0, x), g, 1e-15);
  EXPECT_NEAR(hermite_orbital(1, x), 2 * x * g, 1e-15);
  EXPECT_NEAR(hermite_orbital(2, x), (4 * x * x - 2) * g, 1e-15);
  EXPECT_NEAR(hermite_orbital(3, x), (8 * x * x * x - 12 * x) * g, 1e-14);
  const Vector a = vec({0.3, -1.1}), b = vec({-1.1, 0.3});
  EXPECT_NEAR(slater_target(a), -slater_target(b), 1e-15);
  EXPECT_NEAR(slater_target(vec({0.4, 0.4})), 0.0, 1e-15);
}

TEST(PretrainTrain, FiniteTargetReachesZeroLoss) {
  const Index s = 8;
  const Vector phi = random_unit_target(s, 3);
  PretrainConfig c;
  c.target = Target::finite(phi, Measure::uniform(s));
  c.ansatz = std::make_shared<TableAnsatz>(s);
  Rng rng(9);
  Vector th(s);
  for (Index i = 0; i < s; ++i) th(i) = rng.normal();
  if (phi.dot(th) < 0) th = -th;
  c.theta0 = th;
  c.n = 8;
  c.steps = 5000;
  c.schedule = Schedule::inverse_sqrt(0.5, 8);
  const TrainResult r = pretrain_train(c);
  ASSERT_FALSE(r.diverged);
  EXPECT_LE(si_loss(psi_vector(*c.ansatz, r.theta, s), phi, Measure::uniform(s)), 1e-4);
  EXPECT_LE(*r.trace.back().si_loss, 1e-4);
}

TEST(PretrainTrain, StartAtOptimumStaysThere) {
  const Vector phi = vec({0.5, -1.0, 2.0});
  PretrainConfig c;
  c.target = Target::finite(phi, Measure::uniform(3));
  c.ansatz = std::make_shared<TableAnsatz>(3);
  c.theta0 = 3.0 * phi;
  c.steps = 100;
  c.schedule = Schedule::constant(0.1);
  for (const auto& row : pretrain_train(c).trace) EXPECT_LE(*row.si_loss, 1e-12);
}

TEST(PretrainTrain, MlpFitsGaussianUnderLebesgue) {
  ExperimentConfig cfg;
  cfg.system.kind = "pretrain_gauss";
  cfg.system.half_width = 5.0;
  cfg.ansatz.kind = "mlp";
  cfg.optim.n = 256;
  cfg.optim.steps = 2000;
  cfg.optim.schedule = "h4";
  cfg.optim.eta0 = 0.05;
  cfg.optim.m0 = 1000;
  cfg.pretrain.rho = "lebesgue";
  const RunOutput out = run_pretrain(cfg);
  ASSERT_FALSE(out.diverged);
  EXPECT_LE(*out.trace.rows.back().angle, 0.1);
  EXPECT_LT(*out.trace.rows.back().angle, 0.75 * *out.trace.rows[200].angle);
}

TEST(PretrainTrain, StrategiesAreTracedAndRatioMonitored) {
  for (const char* s : {"same_batch", "independent_batch", "periodic"}) {
    ExperimentConfig cfg;
    cfg.system.kind = "pretrain_finite";
    cfg.system.size = 5;
    cfg.optim.steps = 300;
    cfg.optim.eta0 = 0.2;
    cfg.pretrain.strategy = s;
    cfg.pretrain.period = 10;
    const RunOutput out = run_pretrain(cfg);
    ASSERT_FALSE(out.diverged) << s;
    for (const auto& row : out.trace.rows) {
      ASSERT_TRUE(row.z_tilde && row.norm_ratio);
      EXPECT_GT(*row.z_tilde, 0.0);
    }
  }
}

TEST(OrbitalPretrain, RunsAndTracesAngle) {
  OrbitalPretrainConfig c;
  c.batch = 64;
  c.steps = 30;
  c.eval_points = 256;
  c.hidden = {8};
  const OrbitalPretrainResult r = orbital_pretrain(c);
  ASSERT_EQ(r.trace.size(), 30u);
  for (const auto& row : r.trace) {
    ASSERT_TRUE(row.angle && row.loss);
    EXPECT_GE(*row.angle, 0.0);
    EXPECT_LE(*row.angle, 1.0);
  }
  EXPECT_GE(r.final_angle, 0.0);
  EXPECT_NEAR(r.final_angle, *r.trace.back().angle, 0.05);
}

TEST(PretrainEstimator, CountFormMatchesExpandedBatch) {
  const Vector psi = vec({1.0, -0.5, 2.0});
  const Vector phi = vec({0.3, 1.0, -0.7});
  Matrix grad(2, 3);
  grad << 1, 2, 0, -1, 0.5, 4;
  const Vector counts = vec({1, 3, 2});
  const std::vector<Index> idx = {0, 1, 1, 1, 2, 2};
  Vector p(6), f(6);
  Matrix g(2, 6);
  for (Index i = 0; i < 6; ++i) {
    const Index x = idx[static_cast<std::size_t>(i)];
    p(i) = psi(x);
    f(i) = phi(x);
    g.col(i) = grad.col(x);
  }
  EXPECT_LE((lemma2_estimator_counts(counts, psi, phi, grad, 1.3) - lemma2_estimator(p, f, g, 1.3).g).norm(), 1e-14);
}
