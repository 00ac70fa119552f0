#pragma once

#include "vmckit/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vmckit {

/// Per-step diagnostic record. Which columns are written depends on the trace kind.
struct TraceRow {
  Index step = 0;
  double eta = 0.0;
  std::optional<double> energy_est;
  std::optional<double> energy_exact;
  std::optional<double> objective;
  std::optional<double> loss;
  std::optional<double> grad_norm;
  std::optional<double> exact_grad_norm;
  std::optional<double> runmin_grad_norm;
  std::optional<double> lipschitz_est;
  std::optional<double> acceptance_rate;
  std::optional<double> si_loss;
  std::optional<double> angle;
  std::optional<double> z_tilde;
  std::optional<double> norm_ratio;
};

enum class TraceKind { Vmc, Pretrain, Orbital };

std::string to_string(TraceKind kind);
TraceKind trace_kind_from_string(const std::string& s);
/// Column names, in file order, for a trace kind.
const std::vector<std::string>& trace_columns(TraceKind kind);

/// A trace file: "# vmckit-trace v1", then "# key=value" metadata lines
/// (the first is always kind=...), then a header row and one CSV row per step.
/// Missing optional values are written as empty cells.
struct Trace {
  TraceKind kind = TraceKind::Vmc;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<TraceRow> rows;

  std::optional<std::string> meta_value(const std::string& key) const;
  /// Column as a dense vector; throws if any row lacks the value.
  Vector column(const std::string& name) const;
  bool has_column_values(const std::string& name) const;
};

inline constexpr const char* kTraceMagic = "# vmckit-trace v1";

void write_trace(std::ostream& out, const Trace& trace);
void write_trace(const std::filesystem::path& path, const Trace& trace);
/// Parses a trace; ConfigError messages carry "<file>:<line>:" prefixes.
Trace read_trace(std::istream& in, const std::string& name = "<stream>");
Trace read_trace(const std::filesystem::path& path);

}  // namespace vmckit
