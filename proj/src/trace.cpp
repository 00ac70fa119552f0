#include "vmckit/trace.hpp"

#include "vmckit/numfmt.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace vmckit {

namespace {

using Field = std::optional<double> TraceRow::*;

const std::map<std::string, Field>& optional_fields() {
  static const std::map<std::string, Field> fields = {
      {"energy_est", &TraceRow::energy_est},
      {"energy_exact", &TraceRow::energy_exact},
      {"objective", &TraceRow::objective},
      {"loss", &TraceRow::loss},
      {"grad_norm", &TraceRow::grad_norm},
      {"exact_grad_norm", &TraceRow::exact_grad_norm},
      {"runmin_grad_norm", &TraceRow::runmin_grad_norm},
      {"lipschitz_est", &TraceRow::lipschitz_est},
      {"acceptance_rate", &TraceRow::acceptance_rate},
      {"si_loss", &TraceRow::si_loss},
      {"angle", &TraceRow::angle},
      {"z_tilde", &TraceRow::z_tilde},
      {"norm_ratio", &TraceRow::norm_ratio},
  };
  return fields;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::Vmc: return "vmc";
    case TraceKind::Pretrain: return "pretrain";
    case TraceKind::Orbital: return "orbital";
  }
  return "?";
}

TraceKind trace_kind_from_string(const std::string& s) {
  if (s == "vmc") return TraceKind::Vmc;
  if (s == "pretrain") return TraceKind::Pretrain;
  if (s == "orbital") return TraceKind::Orbital;
  throw ConfigError("unknown trace kind '" + s + "'");
}

const std::vector<std::string>& trace_columns(TraceKind kind) {
  static const std::vector<std::string> vmc = {
      "step",           "eta",          "energy_est",       "energy_exact",  "grad_norm",
      "exact_grad_norm", "runmin_grad_norm", "lipschitz_est", "acceptance_rate"};
  static const std::vector<std::string> pretrain = {
      "step",          "eta",     "objective", "grad_norm", "exact_grad_norm", "runmin_grad_norm",
      "lipschitz_est", "si_loss", "angle",     "z_tilde",   "norm_ratio"};
  static const std::vector<std::string> orbital = {
      "step", "eta", "loss", "grad_norm", "runmin_grad_norm", "lipschitz_est", "angle"};
  switch (kind) {
    case TraceKind::Vmc: return vmc;
    case TraceKind::Pretrain: return pretrain;
    case TraceKind::Orbital: return orbital;
  }
  return vmc;
}

std::optional<std::string> Trace::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return std::nullopt;
}

bool Trace::has_column_values(const std::string& name) const {
  if (rows.empty()) return false;
  if (name == "step" || name == "eta") return true;
  auto it = optional_fields().find(name);
  if (it == optional_fields().end()) return false;
  for (const auto& r : rows)
    if (!(r.*(it->second))) return false;
  return true;
}

Vector Trace::column(const std::string& name) const {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (name == "step") {
      out(static_cast<Index>(i)) = static_cast<double>(r.step);
    } else if (name == "eta") {
      out(static_cast<Index>(i)) = r.eta;
    } else {
      auto it = optional_fields().find(name);
      if (it == optional_fields().end()) throw InvalidArgument("unknown trace column '" + name + "'");
      const auto& v = r.*(it->second);
      if (!v) throw InvalidArgument("trace column '" + name + "' has missing values");
      out(static_cast<Index>(i)) = *v;
    }
  }
  return out;
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << kTraceMagic << "\n";
  out << "# kind=" << to_string(trace.kind) << "\n";
  for (const auto& [k, v] : trace.meta) out << "# " << k << "=" << v << "\n";
  const auto& cols = trace_columns(trace.kind);
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
  for (const auto& r : trace.rows) {
    out << r.step << "," << format_double(r.eta);
    for (std::size_t c = 2; c < cols.size(); ++c) {
      out << ",";
      const auto& v = r.*(optional_fields().at(cols[c]));
      if (v) out << format_double(*v);
    }
    out << "\n";
  }
}

void write_trace(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace " + path.string());
  write_trace(out, trace);
}

Trace read_trace(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> ConfigError {
    return ConfigError(name + ":" + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line)) {
    lineno = 1;
    throw fail("empty trace");
  }
  ++lineno;
  if (trim(line) != kTraceMagic) {
    if (line.rfind("# vmckit-trace", 0) == 0) throw fail("unsupported trace version '" + line + "'");
    throw fail("missing '# vmckit-trace v1' header");
  }
  Trace trace;
  bool have_kind = false;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw fail("metadata line without '='");
      std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (key == "kind") {
        trace.kind = trace_kind_from_string(value);
        have_kind = true;
      } else {
        trace.meta.emplace_back(std::move(key), std::move(value));
      }
      continue;
    }
    header = split_csv(line);
    break;
  }
  if (!have_kind) throw fail("missing kind metadata");
  if (header != trace_columns(trace.kind)) throw fail("column header does not match kind " + to_string(trace.kind));
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw fail("expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    TraceRow r;
    try {
      r.step = static_cast<Index>(parse_int(cells[0]));
      r.eta = parse_double(cells[1]);
      for (std::size_t c = 2; c < cells.size(); ++c)
        if (!trim(cells[c]).empty()) r.*(optional_fields().at(header[c])) = parse_double(cells[c]);
    } catch (const ConfigError& e) {
      throw fail(e.what());
    }
    trace.rows.push_back(r);
  }
  if (trace.rows.empty()) throw fail("trace has no rows");
  return trace;
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open trace");
  return read_trace(in, path.string());
}

}  // namespace vmckit
