#include "vmckit/oracle.hpp"
#include "vmckit/vmc.hpp"

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

Hamiltonian h2() {
  Matrix h(2, 2);
  h << 2, -1, -1, 2;
  return Hamiltonian::matrix(h);
}

// VMC estimator on an ordered tuple of finite-space points.
Vector estimator_on_tuple(const Hamiltonian& h, const Ansatz& psi, const Vector& th, const std::vector<Index>& t) {
  const Index n = static_cast<Index>(t.size());
  Vector e(n);
  Matrix gl(th.size(), n);
  for (Index i = 0; i < n; ++i) {
    e(i) = local_energy(h, psi, th, t[static_cast<std::size_t>(i)]);
    gl.col(i) = psi.grad_log_abs(th, t[static_cast<std::size_t>(i)]);
  }
  return grad_estimator(e, gl).g;
}

}  // namespace

TEST(LocalEnergy, TwoStateByHand) {
  const TableAnsatz psi(2);
  EXPECT_DOUBLE_EQ(local_energy(h2(), psi, vec({1, 1}), 0), 1.0);
  EXPECT_DOUBLE_EQ(local_energy(h2(), psi, vec({1, 1}), 1), 1.0);
  EXPECT_DOUBLE_EQ(local_energy(h2(), psi, vec({2, 1}), 0), 1.5);
  EXPECT_DOUBLE_EQ(local_energy(h2(), psi, vec({2, 1}), 1), 0.0);
  EXPECT_THROW(local_energy(h2(), psi, vec({0, 1}), 0), NumericalError);
}

TEST(LocalEnergy, HydrogenExactAndGeneralAlpha) {
  const Hamiltonian h = hydrogen_atom();
  const ExpFamilyAnsatz psi({radial_feature()}, 3);
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const Vector x = vec({rng.normal(), rng.normal(), rng.normal()});
    EXPECT_NEAR(local_energy(h, psi, vec({1.0}), x), -0.5, 1e-10);
    const double a = 0.6, r = x.norm();
    EXPECT_NEAR(local_energy(h, psi, vec({a}), x), -a * a / 2 + (a - 1) / r, 1e-10);
  }
}

TEST(ExactEnergy, RayleighQuotients) {
  const TableAnsatz psi(2);
  EXPECT_NEAR(exact_energy(h2(), psi, vec({1, 1})), 1.0, 1e-15);
  EXPECT_NEAR(exact_energy(h2(), psi, vec({2, 1})), 1.2, 1e-15);
  EXPECT_NEAR(exact_energy(h2(), psi, vec({1, -1})), 3.0, 1e-15);
}

TEST(ExactEnergy, ScaleInvariant) {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const Fixture fx = random_fixture(rng, 2 + t % 4);
    const Hamiltonian h = Hamiltonian::matrix(fx.h);
    const TableAnsatz psi(fx.theta.size());
    const double e = exact_energy(h, psi, fx.theta);
    for (double lambda : {-3.0, 0.01, 7.0})
      EXPECT_NEAR(exact_energy(h, psi, lambda * fx.theta), e, 1e-12 * std::max(1.0, std::abs(e)));
  }
}

TEST(ExactGradEnergy, HandValueAndStationaryPoint) {
  const TableAnsatz psi(2);
  const Vector g = exact_grad_energy(h2(), psi, vec({2, 1}));
  EXPECT_NEAR(g(0), 0.24, 1e-15);
  EXPECT_NEAR(g(1), -0.48, 1e-15);
  const Spectrum sp = ground_truth_spectrum(h2());
  EXPECT_LE(exact_grad_energy(h2(), psi, sp.psi0).norm(), 1e-15);
}

TEST(ExactGradEnergy, MatchesFiniteDifferences) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Fixture fx = random_fixture(rng, 2 + t % 5);
    const Hamiltonian h = Hamiltonian::matrix(fx.h);
    const TableAnsatz psi(fx.theta.size());
    const Vector fd = fd_gradient([&](const Vector& th) { return exact_energy(h, psi, th); }, fx.theta);
    const Vector g = exact_grad_energy(h, psi, fx.theta);
    EXPECT_LE((g - fd).norm() / std::max(fd.norm(), 1e-300), 1e-6);
  }
}

TEST(GradEstimator, HandValue) {
  const TableAnsatz psi(2);
  const Vector g = estimator_on_tuple(h2(), psi, vec({2, 1}), {0, 1});
  EXPECT_NEAR(g(0), 0.75, 1e-15);
  EXPECT_NEAR(g(1), -1.5, 1e-15);
}

TEST(GradEstimator, EqualSamplesGiveZero) {
  const TableAnsatz psi(2);
  EXPECT_EQ(estimator_on_tuple(h2(), psi, vec({2, 1}), {0, 0, 0}).norm(), 0.0);
  EXPECT_THROW(grad_estimator(vec({1.0}), Matrix::Ones(2, 1)), InvalidArgument);
}

TEST(GradEstimator, EnumeratedExpectationHandCase) {
  const TableAnsatz psi(2);
  const Vector th = vec({2, 1});
  const Vector p = BornDensity::from_ansatz(psi, th, 2).probabilities;
  const Vector e = enumerate_expectation([&](const std::vector<Index>& t) { return estimator_on_tuple(h2(), psi, th, t); }, p, 2);
  EXPECT_NEAR(e(0), 0.24, 1e-15);
  EXPECT_NEAR(e(1), -0.48, 1e-15);
}

TEST(GradEstimator, UnbiasedOnRandomFixtures) {
  Rng rng(4);
  for (int t = 0; t < 60; ++t) {
    const Index s = 2 + t % 5;
    const Index n = 2 + (t / 5) % 2;
    const Fixture fx = random_fixture(rng, s);
    const Hamiltonian h = Hamiltonian::matrix(fx.h);
    const TableAnsatz psi(s);
    const Vector p = BornDensity::from_ansatz(psi, fx.theta, s).probabilities;
    const Vector e = enumerate_expectation(
        [&](const std::vector<Index>& tp) { return estimator_on_tuple(h, psi, fx.theta, tp); }, p, n);
    EXPECT_LE((e - exact_grad_energy(h, psi, fx.theta)).cwiseAbs().maxCoeff(), 1e-10) << "S=" << s << " n=" << n;
  }
}

TEST(LocalEnergyGradient, ZeroMeanForSymmetricH) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Index s = 2 + t % 5;
    const Fixture fx = random_fixture(rng, s);
    const Hamiltonian h = Hamiltonian::matrix(fx.h);
    const TableAnsatz psi(s);
    const Vector p = BornDensity::from_ansatz(psi, fx.theta, s).probabilities;
    Vector mean = Vector::Zero(s);
    for (Index x = 0; x < s; ++x) mean += p(x) * local_energy_gradient(h, psi, fx.theta, x);
    EXPECT_LE(mean.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LocalEnergyGradient, NonzeroMeanForAsymmetricH) {
  Matrix m(2, 2);
  m << 2, -0.5, -1, 2;
  const Hamiltonian h = Hamiltonian::unchecked_matrix(m);
  const TableAnsatz psi(2);
  const Vector th = vec({2, 1});
  const Vector p = BornDensity::from_ansatz(psi, th, 2).probabilities;
  Vector mean = p(0) * local_energy_gradient(h, psi, th, 0) + p(1) * local_energy_gradient(h, psi, th, 1);
  EXPECT_GT(mean.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(LocalEnergyGradient, MatchesFiniteDifferences) {
  Rng rng(6);
  const Fixture fx = random_fixture(rng, 4);
  const Hamiltonian h = Hamiltonian::matrix(fx.h);
  const TableAnsatz psi(4);
  for (Index x = 0; x < 4; ++x) {
    const Vector fd = fd_gradient([&](const Vector& th) { return local_energy(h, psi, th, x); }, fx.theta);
    EXPECT_LE((local_energy_gradient(h, psi, fx.theta, x) - fd).norm(), 1e-6 * std::max(1.0, fd.norm()));
  }
}

TEST(Schedule, Values) {
  EXPECT_DOUBLE_EQ(Schedule::constant(0.1)(1000), 0.1);
  EXPECT_DOUBLE_EQ(Schedule::inverse_sqrt(0.1, 16)(3), 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(Schedule::h4_style(0.1, 100)(300), 0.05);
  EXPECT_THROW(Schedule::constant(-1.0), InvalidArgument);
  EXPECT_EQ(Schedule::inverse_sqrt(0.05, 16).describe(), "inverse_sqrt(eta0=0.05,n=16)");
}

TEST(VmcTrain, FiniteFourStateReachesGroundState) {
  VmcConfig c;
  Vector d(4);
  d << 0.3, -0.2, 0.5, -0.7;
  c.hamiltonian = path_hamiltonian(d);
  c.ansatz = std::make_shared<TableAnsatz>(4);
  c.theta0 = Vector::Ones(4);
  c.n = 16;
  c.steps = 20000;
  c.schedule = Schedule::inverse_sqrt(0.05, 16);
  c.seed = 3;
  const TrainResult r = vmc_train(c);
  ASSERT_FALSE(r.diverged);
  EXPECT_EQ(static_cast<Index>(r.trace.size()), c.steps);
  const double e0 = ground_truth_spectrum(c.hamiltonian).e0;
  EXPECT_LE(std::abs(exact_energy(c.hamiltonian, *c.ansatz, r.theta) - e0), 1e-3);
}

TEST(VmcTrain, GroundStateInitialisationIsStationary) {
  VmcConfig c;
  Vector d(3);
  d << 0.1, 0.4, -0.3;
  c.hamiltonian = path_hamiltonian(d);
  const Spectrum sp = ground_truth_spectrum(c.hamiltonian);
  c.ansatz = std::make_shared<TableAnsatz>(3);
  c.theta0 = sp.psi0;
  c.steps = 50;
  const TrainResult r = vmc_train(c);
  for (const auto& row : r.trace) {
    EXPECT_NEAR(*row.energy_exact, sp.e0, 1e-12);
    EXPECT_LE(*row.grad_norm, 1e-10);
  }
}

TEST(VmcTrain, HarmonicOscillatorGaussian) {
  VmcConfig c;
  c.hamiltonian = harmonic_oscillator(1);
  c.space = ConfigSpace::cube(1, 8.0);
  c.sampler = VmcConfig::Sampler::Metropolis;
  c.ansatz = std::make_shared<ExpFamilyAnsatz>(std::vector<Feature>{gaussian_feature()}, 1);
  c.theta0 = vec({0.3});
  c.n = 256;
  c.steps = 2000;
  c.schedule = Schedule::inverse_sqrt(0.02, 256);
  c.seed = 1;
  const TrainResult r = vmc_train(c);
  ASSERT_FALSE(r.diverged);
  const double a = r.theta(0);
  EXPECT_NEAR(a, 1.0, 0.02);
  EXPECT_NEAR(a / 4 + 1 / (4 * a), 0.5, 0.005);
  double tail = 0.0;
  for (std::size_t i = r.trace.size() - 200; i < r.trace.size(); ++i) tail += *r.trace[i].energy_est;
  EXPECT_NEAR(tail / 200, 0.5, 0.005);
}

TEST(VmcTrain, SingleStep) {
  VmcConfig c;
  c.hamiltonian = h2();
  c.ansatz = std::make_shared<TableAnsatz>(2);
  c.theta0 = vec({2, 1});
  c.steps = 1;
  EXPECT_EQ(vmc_train(c).trace.size(), 1u);
}

TEST(VmcTrain, DivergenceGuard) {
  VmcConfig c;
  c.hamiltonian = h2();
  c.ansatz = std::make_shared<TableAnsatz>(2);
  c.theta0 = vec({2, 1});
  c.divergence_limit = 1.0;
  const TrainResult r = vmc_train(c);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.trace.size(), 1u);
  EXPECT_NE(r.message.find("diverged"), std::string::npos);
}

TEST(VmcTrain, SeedDeterminism) {
  VmcConfig c;
  c.hamiltonian = path_hamiltonian(vec({0.2, -0.1, 0.4}));
  c.ansatz = std::make_shared<TableAnsatz>(3);
  c.theta0 = Vector::Ones(3);
  c.steps = 200;
  c.seed = 77;
  const TrainResult a = vmc_train(c), b = vmc_train(c);
  EXPECT_TRUE(a.theta == b.theta);
}

TEST(GradEstimator, CountFormMatchesExpandedBatch) {
  Vector e(3);
  e << 0.5, -1.0, 2.0;
  Matrix gl(2, 3);
  gl << 1, 0, -2, 0.5, 3, 1;
  Vector counts(3);
  counts << 2, 0, 3;
  const std::vector<Index> idx = {0, 0, 2, 2, 2};
  Vector ee(5);
  Matrix gg(2, 5);
  for (Index i = 0; i < 5; ++i) {
    ee(i) = e(idx[static_cast<std::size_t>(i)]);
    gg.col(i) = gl.col(idx[static_cast<std::size_t>(i)]);
  }
  EXPECT_LE((grad_estimator_counts(counts, e, gl) - grad_estimator(ee, gg).g).norm(), 1e-14);
  Vector one(3);
  one << 1, 0, 0;
  EXPECT_THROW(grad_estimator_counts(one, e, gl), InvalidArgument);
}
