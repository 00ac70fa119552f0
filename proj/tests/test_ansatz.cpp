#include "vmckit/ansatz.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace vmckit;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST(FiniteDiff, TableIsLinear) {
  const TableAnsatz psi(2);
  for (double h : {1e-2, 1e-5, 0.0}) {
    const Vector g = finite_diff_gradient(psi, vec({2, 1}), Index{0}, h);
    EXPECT_NEAR(g(0), 1.0, 1e-9);
    EXPECT_NEAR(g(1), 0.0, 1e-12);
  }
}

TEST(FiniteDiff, ExpFamilyGaussian) {
  const ExpFamilyAnsatz psi({gaussian_feature()}, 1);
  const Vector g = finite_diff_gradient(psi, vec({1.0}), vec({1.0}), 1e-5);
  const double exact = -0.5 * std::exp(-0.5);
  EXPECT_LE(std::abs(g(0) - exact) / std::abs(exact), 1e-6);
}

TEST(FiniteDiff, MlpMatchesBackprop) {
  const MlpAnsatz psi(2, {8, 8});
  Rng rng(0);
  const Vector theta = psi.initial_parameters(rng);
  for (int t = 0; t < 5; ++t) {
    const Vector x = vec({rng.normal(), rng.normal()});
    EXPECT_LE(rel(finite_diff_gradient(psi, theta, x), psi.grad_theta(theta, x)), 1e-5);
  }
}

TEST(FiniteDiff, MatrixMlpMatchesBackprop) {
  const MatrixMlpAnsatz psi(3, 2, {6});
  Rng rng(4);
  const Vector theta = psi.initial_parameters(rng);
  const Vector x = vec({0.3, -0.8, 1.1});
  EXPECT_LE(rel(finite_diff_gradient(psi, theta, x), psi.grad_theta(theta, x)), 1e-5);
}

TEST(Laplacian, GaussianAtOrigin) {
  const ExpFamilyAnsatz psi({gaussian_feature()}, 1);
  const FdLaplacian l = laplacian_fallback(psi, vec({1.0}), vec({0.0}), 1e-3);
  EXPECT_NEAR(l.value, -1.0, 1e-5);
  EXPECT_NEAR(psi.laplacian_x(vec({1.0}), vec({0.0})), -1.0, 1e-12);
}

TEST(Laplacian, ConstantIsZero) {
  const ExpFamilyAnsatz psi({gaussian_feature()}, 2);
  EXPECT_NEAR(laplacian_fallback(psi, vec({0.0}), vec({0.4, -0.2})).value, 0.0, 1e-8);
}

TEST(Laplacian, RadialVanishesAtTwo) {
  const ExpFamilyAnsatz psi({radial_feature()}, 3);
  const Vector x = vec({2.0, 0.0, 0.0});
  EXPECT_NEAR(laplacian_fallback(psi, vec({1.0}), x).value, 0.0, 1e-6);
  EXPECT_NEAR(psi.laplacian_x(vec({1.0}), x), 0.0, 1e-12);
  const Vector y = vec({0.3, 0.5, -0.4});
  const double r = y.norm();
  EXPECT_NEAR(psi.laplacian_x(vec({1.0}), y), (1 - 2 / r) * std::exp(-r), 1e-12);
}

TEST(Laplacian, AnalyticMatchesFallback) {
  const ExpFamilyAnsatz psi({gaussian_feature(), radial_feature()}, 3);
  const Vector th = vec({0.7, 0.4});
  const Vector x = vec({0.5, -0.3, 0.9});
  const double a = psi.laplacian_x(th, x);
  EXPECT_NEAR(laplacian_fallback(psi, th, x).value, a, 1e-5 * std::abs(a));
}

TEST(Scale, TableValueIsLinearInTheta) {
  const TableAnsatz psi(3);
  const Vector th = vec({0.5, -1.2, 2.0});
  for (double lambda : {-3.0, 0.01, 7.0})
    for (Index x = 0; x < 3; ++x) EXPECT_NEAR(psi.value(lambda * th, x), lambda * psi.value(th, x), 1e-15);
}

TEST(Scale, MlpOutputScaleParameter) {
  const MlpAnsatz psi(1, {4});
  Rng rng(2);
  Vector th = psi.initial_parameters(rng);
  const Vector x = vec({0.3});
  const double v = psi.value(th, x);
  th(psi.scale_index()) *= -3.0;
  EXPECT_NEAR(psi.value(th, x), -3.0 * v, 1e-14);
}

TEST(Scale, ScaledAnsatzWrapsValuesAndGradients) {
  const auto base = std::make_shared<TableAnsatz>(3);
  const ScaledAnsatz s(base, 7.0);
  const Vector th = vec({1, 2, 3});
  EXPECT_DOUBLE_EQ(s.value(th, Index{1}), 14.0);
  EXPECT_DOUBLE_EQ(s.grad_theta(th, Index{1})(1), 7.0);
  EXPECT_NEAR(s.grad_log_abs(th, Index{1})(1), 0.5, 1e-15);
  EXPECT_THROW(ScaledAnsatz(base, 0.0), InvalidArgument);
}

TEST(Hessian, SymmetricWhereProvided) {
  const ExpFamilyAnsatz psi({gaussian_feature(), radial_feature()}, 2);
  const Matrix h = psi.hessian_theta(vec({0.3, 0.8}), vec({0.2, 0.4}));
  EXPECT_LE((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  const TableAnsatz t(3);
  EXPECT_EQ(t.hessian_theta(vec({1, 2, 3}), Index{0}).norm(), 0.0);
  const MlpAnsatz m(1);
  EXPECT_FALSE(m.has_hessian());
}

TEST(GradLog, ThrowsWhereZero) {
  const TableAnsatz psi(2);
  EXPECT_THROW(psi.grad_log_abs(vec({0.0, 1.0}), Index{0}), NumericalError);
}

TEST(GradLog, ExpFamilyIsFeatureVector) {
  const ExpFamilyAnsatz psi({gaussian_feature(), radial_feature()}, 2);
  const Vector x = vec({0.6, 0.8});
  const Vector g = psi.grad_log_abs(vec({0.4, 0.2}), x);
  EXPECT_NEAR(g(0), -0.5, 1e-15);
  EXPECT_NEAR(g(1), -1.0, 1e-15);
}

TEST(ExpFamily, FiniteFeatureTable) {
  Matrix f(3, 2);
  f << 1, 0, 0, 1, 1, 1;
  const ExpFamilyAnsatz psi(f);
  EXPECT_NEAR(psi.value(vec({0.5, -1}), Index{2}), std::exp(-0.5), 1e-15);
  EXPECT_EQ(psi.num_params(), 2);
}

TEST(Features, ByName) {
  EXPECT_EQ(feature_by_name("gaussian").name, "gaussian");
  EXPECT_EQ(feature_by_name("radial").name, "radial");
  EXPECT_THROW(feature_by_name("bogus"), InvalidArgument);
}

TEST(MatrixMlp, ValueIsSumOfDeterminants) {
  const MatrixMlpAnsatz psi(2, 2, {5});
  Rng rng(8);
  const Vector th = psi.initial_parameters(rng);
  const Vector x = vec({0.1, -0.7});
  const auto ys = psi.orbitals(th, x);
  ASSERT_EQ(ys.size(), 2u);
  EXPECT_NEAR(psi.value(th, x), ys[0].determinant() + ys[1].determinant(), 1e-14);
  // Swapping two electrons swaps two rows of every orbital matrix.
  EXPECT_NEAR(psi.value(th, vec({-0.7, 0.1})), -psi.value(th, x), 1e-14);
}

TEST(Checkpoint, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "vmckit_ck_test.txt";
  Checkpoint ck{"mlp", 42, vec({0.1, -1e-300, 3.0e10, 1.0 / 3.0})};
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.kind, "mlp");
  EXPECT_EQ(back.seed, 42u);
  ASSERT_EQ(back.theta.size(), 4);
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(back.theta(i), ck.theta(i));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "vmckit_ck_bad.txt";
  {
    std::ofstream f(path);
    f << "not a checkpoint\n1\n";
  }
  EXPECT_THROW(load_checkpoint(path), ConfigError);
  std::filesystem::remove(path);
}
