#include "vmckit/config.hpp"
#include "vmckit/svg.hpp"
#include "vmckit/trace.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace vmckit;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig a;
  EXPECT_EQ(parse_config(serialize_config(a)), a);
}

TEST(Config, ParseSerializeParse) {
  const std::string text =
      "[system]\nkind = ho1d\nhalf_width = 5.5\n"
      "[ansatz]\nkind = mlp\nhidden = 8, 4\n"
      "[sampler]\nkind = metropolis\nstep_size = 0.7\n"
      "[optim]\nn = 64\nsteps = 10\nschedule = h4\neta0 = 0.01\nm0 = 100\n"
      "[run]\nseed = 42\nthreads = 3\n";
  const ExperimentConfig a = parse_config(text);
  EXPECT_EQ(a.system.kind, "ho1d");
  EXPECT_EQ(a.ansatz.hidden, (std::vector<Index>{8, 4}));
  EXPECT_DOUBLE_EQ(a.sampler.step_size, 0.7);
  EXPECT_EQ(a.run.seed, 42u);
  const ExperimentConfig b = parse_config(serialize_config(a));
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize_config(a), serialize_config(b));
}

TEST(Config, DoublesSurviveRoundTrip) {
  ExperimentConfig a;
  a.system.size = 3;
  a.system.diagonal = {0.1, -1.0 / 3.0, 1e-300};
  a.optim.eta0 = 0.1 + 0.2;
  EXPECT_EQ(parse_config(serialize_config(a)), a);
}

TEST(Config, UnknownSectionAndKey) {
  const std::string s = error_of([] { parse_config("[bogus]\nx = 1\n", "f.ini"); });
  EXPECT_NE(s.find("f.ini"), std::string::npos);
  EXPECT_NE(s.find("bogus"), std::string::npos);
  const std::string k = error_of([] { parse_config("[optim]\nstepz = 1\n", "f.ini"); });
  EXPECT_NE(k.find("optim.stepz"), std::string::npos);
}

TEST(Config, BadValues) {
  EXPECT_FALSE(error_of([] { parse_config("[optim]\nsteps = -3\n"); }).empty());
  EXPECT_FALSE(error_of([] { parse_config("[optim]\neta0 = fast\n"); }).empty());
  EXPECT_FALSE(error_of([] { validate_config(parse_config("[optim]\nschedule = cosine\n")); }).empty());
  const std::string syntax = error_of([] { parse_config("[optim\nsteps = 3\n", "g.ini"); });
  EXPECT_NE(syntax.find("g.ini:1"), std::string::npos);
}

TEST(Config, Validate) {
  ExperimentConfig c;
  EXPECT_NO_THROW(validate_config(c));
  c.optim.n = 0;
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/x.ini"), ConfigError); }

namespace {

Trace sample_trace() {
  Trace t;
  t.kind = TraceKind::Vmc;
  t.meta = {{"seed", "7"}};
  for (Index m = 0; m < 3; ++m) {
    TraceRow r;
    r.step = m;
    r.eta = 0.1 / (m + 1);
    r.energy_est = -0.5 + 1.0 / 3.0 * m;
    r.grad_norm = 1e-17 * (m + 1);
    if (m > 0) r.lipschitz_est = 2.5;
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace

TEST(Trace, RoundTripIsExact) {
  const Trace t = sample_trace();
  std::stringstream ss;
  write_trace(ss, t);
  const std::string first = ss.str();
  EXPECT_EQ(first.rfind(kTraceMagic, 0), 0u);
  const Trace u = read_trace(ss);
  ASSERT_EQ(u.rows.size(), 3u);
  EXPECT_EQ(u.meta_value("seed"), std::optional<std::string>("7"));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(u.rows[i].eta, t.rows[i].eta);
    EXPECT_EQ(u.rows[i].energy_est, t.rows[i].energy_est);
    EXPECT_EQ(u.rows[i].grad_norm, t.rows[i].grad_norm);
    EXPECT_EQ(u.rows[i].lipschitz_est, t.rows[i].lipschitz_est);
  }
  std::stringstream again;
  write_trace(again, u);
  EXPECT_EQ(again.str(), first);
}

TEST(Trace, Columns) {
  const Trace t = sample_trace();
  EXPECT_EQ(t.column("eta").size(), 3);
  EXPECT_FALSE(t.has_column_values("lipschitz_est"));
  EXPECT_THROW(t.column("lipschitz_est"), InvalidArgument);
  EXPECT_THROW(t.column("nonsense"), InvalidArgument);
}

TEST(Trace, Rejections) {
  std::stringstream empty;
  EXPECT_THROW(read_trace(empty, "e.csv"), ConfigError);
  std::stringstream v2("# vmckit-trace v2\n# kind=vmc\n");
  try {
    read_trace(v2, "t.csv");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("t.csv:1"), std::string::npos);
  }
  std::stringstream ss;
  write_trace(ss, sample_trace());
  std::string text = ss.str();
  text.replace(text.find("energy_est"), 10, "energy_xyz");
  std::stringstream bad(text);
  EXPECT_THROW(read_trace(bad), ConfigError);
}

TEST(Trace, KindNames) {
  for (TraceKind k : {TraceKind::Vmc, TraceKind::Pretrain, TraceKind::Orbital})
    EXPECT_EQ(trace_kind_from_string(to_string(k)), k);
  EXPECT_THROW(trace_kind_from_string("x"), ConfigError);
}

TEST(Svg, DeterministicAndLogAxes) {
  Plot p;
  p.title = "t";
  p.logx = p.logy = true;
  Vector x(4), y(4);
  x << 1, 2, 3, 4;
  y << 1, 0.5, 0, 0.25;
  p.series.push_back({"a & b", x, y});
  const std::string s = render_svg(p);
  EXPECT_EQ(s, render_svg(p));
  EXPECT_EQ(s.rfind("<svg", 0) == 0 || s.rfind("<?xml", 0) == 0, true);
  EXPECT_NE(s.find("a &amp; b"), std::string::npos);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
}

TEST(Svg, EmptySeries) {
  Plot p;
  p.title = "empty";
  EXPECT_NO_THROW(render_svg(p));
}
