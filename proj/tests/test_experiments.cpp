#include "vmckit/experiments.hpp"
#include "vmckit/parallel.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace vmckit;

namespace {

ExperimentConfig finite4(Index steps) {
  ExperimentConfig c;
  c.system.kind = "finite";
  c.system.size = 4;
  c.ansatz.kind = "table";
  c.optim.n = 16;
  c.optim.steps = steps;
  c.optim.eta0 = 0.05;
  return c;
}

ExperimentConfig toy(Index steps) {
  ExperimentConfig c;
  c.system.kind = "pretrain_toy";
  c.ansatz.kind = "matrix_mlp";
  c.ansatz.hidden = {8};
  c.optim.n = 32;
  c.optim.steps = steps;
  c.optim.schedule = "constant";
  c.optim.eta0 = 0.05;
  c.pretrain.eval_points = 256;
  c.sampler.walkers = 32;
  return c;
}

std::string csv(const Trace& t) {
  std::ostringstream s;
  write_trace(s, t);
  return s.str();
}

std::vector<std::pair<std::string, std::string>> without(const Trace& t, const std::string& key) {
  std::vector<std::pair<std::string, std::string>> m;
  for (const auto& kv : t.meta)
    if (kv.first != key) m.push_back(kv);
  return m;
}

}  // namespace

TEST(Fixtures, Shapes) {
  const Vector d = default_diagonal(6);
  EXPECT_EQ(d.size(), 6);
  EXPECT_LE(d.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_TRUE(d == default_diagonal(6));
  const Matrix f = cosine_feature_table(8, 3);
  EXPECT_EQ(f.rows(), 8);
  EXPECT_EQ(f.cols(), 3);
  const Vector phi = random_unit_target(5, 9);
  EXPECT_NEAR(phi.squaredNorm() / 5.0, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
}

TEST(Verify, AllChecksPass) {
  const auto r = run_verify();
  EXPECT_GE(r.size(), 12u);
  for (const auto& c : r) EXPECT_TRUE(c.passed) << c.name << " " << c.detail;
}

TEST(Verify, InjectionsFail) {
  for (Injection inj : {Injection::AsymmetricH, Injection::Plugin}) {
    const auto r = run_verify(inj);
    int failed = 0;
    for (const auto& c : r) failed += c.passed ? 0 : 1;
    EXPECT_GE(failed, 1);
  }
}

TEST(RunVmc, SingleStep) {
  const RunOutput r = run_vmc(finite4(1));
  EXPECT_EQ(r.trace.rows.size(), 1u);
  EXPECT_FALSE(r.diverged);
  EXPECT_TRUE(r.trace.meta_value("loss_gap").has_value());
}

TEST(RunVmc, Finite4Converges) {
  const RunOutput r = run_vmc(finite4(20000));
  ASSERT_FALSE(r.diverged);
  const double e0 = std::stod(*r.trace.meta_value("e0"));
  EXPECT_LE(std::abs(*r.trace.rows.back().energy_exact - e0), 1e-3);
}

TEST(RunVmc, WrongSystem) {
  ExperimentConfig c = finite4(10);
  c.system.kind = "pretrain_finite";
  EXPECT_THROW(run_vmc(c), ConfigError);
  EXPECT_THROW(compare_pretrain(c), ConfigError);
}

TEST(RunPretrain, TargetEqualsInitialAnsatz) {
  ExperimentConfig c;
  c.system.kind = "pretrain_finite";
  c.system.size = 4;
  c.system.target = {0.5, -1.0, 2.0, 0.25};
  c.ansatz.theta0 = c.system.target;
  c.optim.steps = 5;
  const RunOutput r = run_pretrain(c);
  EXPECT_LE(*r.trace.rows.front().angle, 1e-12);
  EXPECT_LE(*r.trace.rows.back().angle, 1e-12);
}

TEST(RunPretrain, RhoSwitchOnlyChangesSamplingMeta) {
  for (const char* kind : {"pretrain_gauss", "pretrain_toy"}) {
    ExperimentConfig c = std::string(kind) == "pretrain_toy" ? toy(3) : ExperimentConfig{};
    if (std::string(kind) == "pretrain_gauss") {
      c.system.kind = kind;
      c.system.half_width = 5;
      c.ansatz.kind = "mlp";
      c.ansatz.hidden = {4};
      c.optim.steps = 3;
      c.optim.n = 16;
      c.sampler.walkers = 16;
      c.pretrain.eval_points = 128;
    }
    c.pretrain.rho = "target";
    const RunOutput a = run_pretrain(c);
    c.pretrain.rho = "lebesgue";
    const RunOutput b = run_pretrain(c);
    EXPECT_EQ(a.trace.meta_value("sampling"), std::optional<std::string>("rho=target")) << kind;
    EXPECT_EQ(b.trace.meta_value("sampling"), std::optional<std::string>("rho=lebesgue")) << kind;
    EXPECT_EQ(without(a.trace, "sampling"), without(b.trace, "sampling")) << kind;
    EXPECT_EQ(a.trace.rows.size(), b.trace.rows.size());
  }
}

TEST(RunPretrain, ThreadCountDoesNotChangeTrace) {
  set_num_threads(1);
  const std::string a = csv(run_pretrain(toy(5)).trace);
  set_num_threads(4);
  const std::string b = csv(run_pretrain(toy(5)).trace);
  set_num_threads(1);
  EXPECT_EQ(a, b);
}

TEST(Compare, SameSeedsSameInit) {
  ExperimentConfig c = toy(3);
  c.pretrain.seeds = 2;
  const CompareOutput out = compare_pretrain(c);
  ASSERT_EQ(out.si.size(), 2u);
  ASSERT_EQ(out.mse.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k)
    EXPECT_EQ(*out.si[k].trace.rows.front().angle, *out.mse[k].trace.rows.front().angle);
  EXPECT_EQ(out.summary.size(), 3u);
}

TEST(Report, EmptyTraceRejected) {
  Trace t;
  EXPECT_THROW(build_report({t}, {"x"}), ConfigError);
  EXPECT_THROW(build_report({}, {}), InvalidArgument);
}

TEST(Report, OverlayAndDeterminism) {
  const RunOutput a = run_vmc(finite4(400));
  ExperimentConfig c = finite4(400);
  c.run.seed = 1;
  const RunOutput b = run_vmc(c);
  const ReportOutput r1 = build_report({a.trace, b.trace}, {"a", "b"});
  const ReportOutput r2 = build_report({a.trace, b.trace}, {"a", "b"});
  EXPECT_EQ(r1.text, r2.text);
  bool overlay = false;
  for (const auto& f : r1.files) overlay = overlay || f.name == "compare_runmin.svg";
  EXPECT_TRUE(overlay);
  EXPECT_NE(r1.text.find("ledger"), std::string::npos);
  ASSERT_EQ(r1.files.size(), r2.files.size());
  for (std::size_t i = 0; i < r1.files.size(); ++i) EXPECT_EQ(r1.files[i].content, r2.files[i].content);
}
