#include "vmckit/ansatz.hpp"
#include "vmckit/config.hpp"
#include "vmckit/experiments.hpp"
#include "vmckit/numfmt.hpp"
#include "vmckit/parallel.hpp"
#include "vmckit/trace.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vmckit;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfigError = 2, kDiverged = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = load_config(path);
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.out) cfg.run.out = *o.out;
  if (o.threads) cfg.run.threads = *o.threads;
  validate_config(cfg);
  set_num_threads(cfg.run.threads);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::string joined(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

int emit_run(const RunOutput& run, const ExperimentConfig& cfg, const std::string& stem) {
  const fs::path dir(cfg.run.out);
  fs::create_directories(dir);
  write_trace(dir / (stem + ".csv"), run.trace);
  save_checkpoint(dir / (stem + "_checkpoint.txt"), {run.ansatz_kind, cfg.run.seed, run.theta});
  write_text(dir / (stem + "_config.ini"), serialize_config(cfg));
  const std::string summary = joined(run.summary);
  write_text(dir / (stem + "_summary.txt"), summary);
  std::cout << summary << "trace: " << (dir / (stem + ".csv")).string() << "\n";
  if (run.diverged) {
    std::cerr << "error: run diverged: " << run.message << "\n";
    return kDiverged;
  }
  return kOk;
}

int cmd_verify(const std::string& inject) {
  Injection inj = Injection::None;
  if (inject == "asymmetric-h") inj = Injection::AsymmetricH;
  else if (inject == "plugin") inj = Injection::Plugin;
  else if (!inject.empty()) throw ConfigError("--inject: unknown fixture '" + inject + "'");
  const auto results = run_verify(inj);
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%-34s %s  error %-12s tol %-8s %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                format_double(r.error).c_str(), format_double(r.tolerance).c_str(), r.detail.c_str());
    failed += r.passed ? 0 : 1;
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  return failed ? kCheckFailed : kOk;
}

int cmd_compare(const ExperimentConfig& cfg) {
  const CompareOutput cmp = compare_pretrain(cfg);
  const fs::path dir(cfg.run.out);
  fs::create_directories(dir);
  for (std::size_t k = 0; k < cmp.si.size(); ++k) {
    const std::string seed = std::to_string(cfg.run.seed + k);
    write_trace(dir / ("si_seed" + seed + ".csv"), cmp.si[k].trace);
    write_trace(dir / ("mse_seed" + seed + ".csv"), cmp.mse[k].trace);
  }
  const std::string summary = joined(cmp.summary);
  write_text(dir / "compare_summary.txt", summary);
  std::cout << summary;
  return kOk;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& out, Index burn_in) {
  std::vector<Trace> traces;
  std::vector<std::string> names;
  for (const auto& p : paths) {
    traces.push_back(read_trace(fs::path(p)));
    std::string stem = fs::path(p).stem().string();
    while (std::find(names.begin(), names.end(), stem) != names.end()) stem += "_";
    names.push_back(stem);
  }
  const ReportOutput rep = build_report(traces, names, burn_in);
  const fs::path dir(out);
  fs::create_directories(dir);
  for (const auto& f : rep.files) write_text(dir / f.name, f.content);
  write_text(dir / "report.txt", rep.text);
  std::cout << rep.text;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vmckit: variational Monte Carlo and supervised pre-training experiments"};
  app.require_subcommand(1);

  Overrides ov;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "override run.seed");
    sub->add_option("--out", ov.out, "override run.out (output directory)");
    sub->add_option("--threads", ov.threads, "override run.threads (0 = all cores)");
  };

  std::string inject;
  auto* verify = app.add_subcommand("verify", "run the oracle and invariant checks");
  verify->add_option("--inject", inject, "negative-control fixture: asymmetric-h | plugin")->group("");

  std::string config_path;
  auto* vmc = app.add_subcommand("vmc-run", "VMC training run");
  vmc->add_option("config", config_path, "INI config")->required()->check(CLI::ExistingFile);
  add_overrides(vmc);

  auto* pre = app.add_subcommand("pretrain-run", "supervised pre-training run");
  pre->add_option("config", config_path, "INI config")->required()->check(CLI::ExistingFile);
  add_overrides(pre);

  auto* cmp = app.add_subcommand("compare-pretrain", "scale-invariant vs MSE orbital loss over seeds");
  cmp->add_option("config", config_path, "INI config")->required()->check(CLI::ExistingFile);
  add_overrides(cmp);

  std::vector<std::string> traces;
  std::string report_out = "report";
  Index burn_in = 200;
  auto* rep = app.add_subcommand("report", "plots and text report from trace CSVs");
  rep->add_option("traces", traces, "trace files")->required();
  rep->add_option("--out", report_out, "output directory");
  rep->add_option("--burn-in", burn_in, "first step of the slope fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*verify) return cmd_verify(inject);
    if (*rep) return cmd_report(traces, report_out, burn_in);
    const ExperimentConfig cfg = load_with_overrides(config_path, ov);
    if (*vmc) return emit_run(run_vmc(cfg), cfg, "vmc");
    if (*pre) return emit_run(run_pretrain(cfg), cfg, "pretrain");
    return cmd_compare(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
}
