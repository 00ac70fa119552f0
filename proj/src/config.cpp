#include "vmckit/config.hpp"

#include "vmckit/numfmt.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace vmckit {

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

std::string fmt_index(const Index& i) { return std::to_string(i); }
std::string fmt_real(const double& d) { return format_double(d); }
std::string fmt_str(const std::string& s) { return s; }

// One binding per key: how to parse a string into the config and print it back.
struct Binding {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Section, typename T>
Binding field(Section ExperimentConfig::*sec, T Section::*f) {
  return {[sec, f](ExperimentConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, std::string>) {
              (c.*sec).*f = std::string(trim(v));
            } else if constexpr (std::is_same_v<T, double>) {
              (c.*sec).*f = parse_double(v);
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
              const long long x = parse_int(v);
              if (x < 0) throw ConfigError("expected a nonnegative integer, got '" + v + "'");
              (c.*sec).*f = static_cast<std::uint64_t>(x);
            } else if constexpr (std::is_same_v<T, int>) {
              (c.*sec).*f = static_cast<int>(parse_int(v));
            } else if constexpr (std::is_same_v<T, Index>) {
              (c.*sec).*f = static_cast<Index>(parse_int(v));
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
              std::vector<double> out;
              for (const auto& s : split_list(v)) out.push_back(parse_double(s));
              (c.*sec).*f = out;
            } else if constexpr (std::is_same_v<T, std::vector<Index>>) {
              std::vector<Index> out;
              for (const auto& s : split_list(v)) out.push_back(static_cast<Index>(parse_int(s)));
              (c.*sec).*f = out;
            } else {
              (c.*sec).*f = split_list(v);
            }
          },
          [sec, f](const ExperimentConfig& c) -> std::string {
            const T& x = (c.*sec).*f;
            if constexpr (std::is_same_v<T, std::string>) {
              return x;
            } else if constexpr (std::is_same_v<T, double>) {
              return format_double(x);
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
              return join<double>(x, fmt_real);
            } else if constexpr (std::is_same_v<T, std::vector<Index>>) {
              return join<Index>(x, fmt_index);
            } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
              return join<std::string>(x, fmt_str);
            } else {
              return std::to_string(x);
            }
          }};
}

using Table = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Binding>>>>;

const Table& bindings() {
  using C = ExperimentConfig;
  static const Table table = {
      {"system",
       {{"kind", field(&C::system, &C::System::kind)},
        {"size", field(&C::system, &C::System::size)},
        {"diagonal", field(&C::system, &C::System::diagonal)},
        {"target", field(&C::system, &C::System::target)},
        {"target_seed", field(&C::system, &C::System::target_seed)},
        {"half_width", field(&C::system, &C::System::half_width)},
        {"electrons", field(&C::system, &C::System::electrons)}}},
      {"ansatz",
       {{"kind", field(&C::ansatz, &C::Ansatz::kind)},
        {"features", field(&C::ansatz, &C::Ansatz::features)},
        {"hidden", field(&C::ansatz, &C::Ansatz::hidden)},
        {"determinants", field(&C::ansatz, &C::Ansatz::determinants)},
        {"theta0", field(&C::ansatz, &C::Ansatz::theta0)}}},
      {"sampler",
       {{"kind", field(&C::sampler, &C::Sampler::kind)},
        {"step_size", field(&C::sampler, &C::Sampler::step_size)},
        {"burn_in", field(&C::sampler, &C::Sampler::burn_in)},
        {"thinning", field(&C::sampler, &C::Sampler::thinning)},
        {"walkers", field(&C::sampler, &C::Sampler::walkers)}}},
      {"optim",
       {{"n", field(&C::optim, &C::Optim::n)},
        {"steps", field(&C::optim, &C::Optim::steps)},
        {"schedule", field(&C::optim, &C::Optim::schedule)},
        {"eta0", field(&C::optim, &C::Optim::eta0)},
        {"m0", field(&C::optim, &C::Optim::m0)}}},
      {"pretrain",
       {{"strategy", field(&C::pretrain, &C::Pretrain::strategy)},
        {"period", field(&C::pretrain, &C::Pretrain::period)},
        {"norm_batch", field(&C::pretrain, &C::Pretrain::norm_batch)},
        {"rho", field(&C::pretrain, &C::Pretrain::rho)},
        {"loss", field(&C::pretrain, &C::Pretrain::loss)},
        {"eval_points", field(&C::pretrain, &C::Pretrain::eval_points)},
        {"seeds", field(&C::pretrain, &C::Pretrain::seeds)}}},
      {"run",
       {{"seed", field(&C::run, &C::Run::seed)},
        {"out", field(&C::run, &C::Run::out)},
        {"threads", field(&C::run, &C::Run::threads)}}},
  };
  return table;
}

void check_one_of(const std::string& key, const std::string& v, const std::set<std::string>& allowed) {
  if (!allowed.count(v)) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
    throw ConfigError(key + ": unknown value '" + v + "' (expected " + list + ")");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& name) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(name + ": key '" + section + "' outside a section");
    const auto sec = std::find_if(bindings().begin(), bindings().end(),
                                  [&](const auto& s) { return s.first == section; });
    if (sec == bindings().end()) throw ConfigError(name + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto b = std::find_if(sec->second.begin(), sec->second.end(),
                                  [&](const auto& kv) { return kv.first == key; });
      if (b == sec->second.end()) throw ConfigError(name + ": unknown key " + section + "." + key);
      try {
        b->second.set(cfg, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + section + "." + key + ": " + e.what());
      }
    }
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : bindings()) {
    out << (first ? "" : "\n") << "[" << section << "]\n";
    first = false;
    for (const auto& [key, b] : keys) out << key << " = " << b.get(cfg) << "\n";
  }
  return out.str();
}

void validate_config(const ExperimentConfig& c) {
  check_one_of("system.kind", c.system.kind,
               {"finite", "ho1d", "hatom", "pretrain_finite", "pretrain_gauss", "pretrain_toy"});
  check_one_of("ansatz.kind", c.ansatz.kind, {"table", "expfamily", "mlp", "matrix_mlp"});
  check_one_of("sampler.kind", c.sampler.kind, {"exact", "metropolis"});
  check_one_of("optim.schedule", c.optim.schedule, {"constant", "inverse_sqrt", "h4"});
  check_one_of("pretrain.strategy", c.pretrain.strategy, {"same_batch", "independent_batch", "periodic"});
  check_one_of("pretrain.rho", c.pretrain.rho, {"target", "lebesgue"});
  check_one_of("pretrain.loss", c.pretrain.loss, {"si", "mse"});
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.optim.n >= 2, "optim.n must be >= 2");
  need(c.optim.steps >= 1, "optim.steps must be >= 1");
  need(c.optim.eta0 > 0, "optim.eta0 must be positive");
  need(c.optim.m0 > 0, "optim.m0 must be positive");
  need(c.system.size >= 2, "system.size must be >= 2");
  need(c.system.half_width > 0, "system.half_width must be positive");
  need(c.system.electrons >= 1, "system.electrons must be >= 1");
  need(c.sampler.burn_in >= 0 && c.sampler.thinning >= 1, "sampler.burn_in >= 0 and sampler.thinning >= 1");
  need(c.sampler.walkers >= 2, "sampler.walkers must be >= 2");
  need(c.pretrain.period >= 1, "pretrain.period must be >= 1");
  need(c.pretrain.norm_batch >= 0, "pretrain.norm_batch must be >= 0");
  need(c.pretrain.eval_points >= 2, "pretrain.eval_points must be >= 2");
  need(c.pretrain.seeds >= 1, "pretrain.seeds must be >= 1");
  need(c.ansatz.determinants >= 1, "ansatz.determinants must be >= 1");
  for (Index h : c.ansatz.hidden) need(h >= 1, "ansatz.hidden widths must be >= 1");
  need(c.run.threads >= 0, "run.threads must be >= 0 (0 = all cores)");

  const std::string& k = c.system.kind;
  if (k == "finite" || k == "pretrain_finite") {
    need(c.ansatz.kind == "table" || c.ansatz.kind == "expfamily",
         "finite systems take a table or expfamily ansatz");
    need(c.sampler.kind == "exact", "finite systems use exact sampling");
    if (!c.system.diagonal.empty())
      need(static_cast<Index>(c.system.diagonal.size()) == c.system.size, "system.diagonal must have system.size entries");
    if (!c.system.target.empty())
      need(static_cast<Index>(c.system.target.size()) == c.system.size, "system.target must have system.size entries");
  } else if (k == "ho1d" || k == "hatom") {
    need(c.ansatz.kind == "expfamily" || c.ansatz.kind == "mlp", "continuous VMC takes an expfamily or mlp ansatz");
    need(c.sampler.kind == "metropolis", "continuous systems use the metropolis sampler");
  } else if (k == "pretrain_gauss") {
    need(c.ansatz.kind == "mlp" || c.ansatz.kind == "expfamily", "pretrain_gauss takes an mlp or expfamily ansatz");
  } else if (k == "pretrain_toy") {
    need(c.ansatz.kind == "matrix_mlp", "pretrain_toy takes the matrix_mlp ansatz");
  }
}

}  // namespace vmckit
