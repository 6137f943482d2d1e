#include "divker/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <optional>
#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "divker/errors.hpp"

namespace divker {

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> to_int(const std::string& s) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

struct Field {
  const char* key;
  std::function<bool(RunConfig&, const std::string&)> set;  // false on a bad value
  std::function<std::string(const RunConfig&)> get;
};

Field double_field(const char* key, double RunConfig::*m) {
  return {key,
          [m](RunConfig& c, const std::string& v) {
            auto d = to_double(v);
            if (!d || !std::isfinite(*d)) return false;
            c.*m = *d;
            return true;
          },
          [m](const RunConfig& c) { return fmt_double(c.*m); }};
}

template <typename Int>
Field int_field(const char* key, Int RunConfig::*m) {
  return {key,
          [m](RunConfig& c, const std::string& v) {
            auto d = to_int<Int>(v);
            if (!d) return false;
            c.*m = *d;
            return true;
          },
          [m](const RunConfig& c) { return fmt::format("{}", c.*m); }};
}

Field string_field(const char* key, std::string RunConfig::*m,
                   std::vector<std::string> allowed = {}) {
  return {key,
          [m, allowed](RunConfig& c, const std::string& v) {
            if (v.empty()) return false;
            if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
              return false;
            }
            c.*m = v;
            return true;
          },
          [m](const RunConfig& c) { return c.*m; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      string_field("experiment", &RunConfig::experiment),
      string_field("model", &RunConfig::model, {"ou", "cubic", "lorenz96"}),
      double_field("model.a", &RunConfig::model_a),
      double_field("model.sigma", &RunConfig::model_sigma),
      int_field("model.dim", &RunConfig::model_dim),
      string_field("model.noise", &RunConfig::model_noise, {"unit", "bump"}),
      double_field("model.damping", &RunConfig::model_damping),
      double_field("model.base_diffusion", &RunConfig::model_base_diffusion),
      double_field("model.forcing", &RunConfig::model_forcing),
      string_field("init", &RunConfig::init, {"normal", "point"}),
      double_field("init.mean", &RunConfig::init_mean),
      double_field("init.std", &RunConfig::init_std),
      double_field("init.value", &RunConfig::init_value),
      double_field("T", &RunConfig::total_time),
      double_field("dt", &RunConfig::dt),
      int_field("paths", &RunConfig::paths),
      int_field("seed", &RunConfig::seed),
      string_field("estimator", &RunConfig::estimator,
                   {"sde-kernel", "sde-div", "sde-divker", "sde-divker-noh0", "nstep-kernel",
                    "nstep-div", "nstep-divker", "nstep-divker-noh0"}),
      string_field("alpha", &RunConfig::alpha),
      string_field("beta", &RunConfig::beta, {"linear", "const:1"}),
      string_field("analysis", &RunConfig::analysis, {"bins", "linear-response"}),
      double_field("bins.lo", &RunConfig::bins_lo),
      double_field("bins.hi", &RunConfig::bins_hi),
      int_field("bins.n", &RunConfig::bins_n),
      int_field("bins.coordinate", &RunConfig::bins_coordinate),
      int_field("bins.min_count", &RunConfig::bins_min_count),
      int_field("bins.paths_per_bin", &RunConfig::bins_paths_per_bin),
      double_field("hist.lo", &RunConfig::hist_lo),
      double_field("hist.hi", &RunConfig::hist_hi),
      int_field("hist.n", &RunConfig::hist_n),
      double_field("cap", &RunConfig::cap),
      int_field("dump_paths", &RunConfig::dump_paths),
  };
  return table;
}

bool valid_alpha(const std::string& a) {
  if (a == "reciprocal") return true;
  if (a.rfind("const:", 0) == 0) {
    auto v = to_double(a.substr(6));
    return v && std::isfinite(*v) && *v >= 0.0;
  }
  if (a.rfind("auto:", 0) == 0) {
    auto v = to_int<int>(a.substr(5));
    return v && *v >= 1;
  }
  return false;
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   std::vector<std::string>& problems) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      if (!f.set(cfg, value)) problems.push_back(fmt::format("{}: bad value '{}'", key, value));
      return;
    }
  }
  problems.push_back(fmt::format("unknown key '{}'", key));
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(fmt::format("line {}: expected 'key = value'", lineno));
      continue;
    }
    std::vector<std::string> local;
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), local);
    for (auto& p : local) problems.push_back(fmt::format("line {}: {}", lineno, p));
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return base;
}

void validate_config(const RunConfig& c) {
  std::vector<std::string> p;
  if (!(c.total_time > 0.0)) p.push_back("T must be positive");
  if (!(c.dt > 0.0)) {
    p.push_back("dt must be positive");
  } else if (c.total_time > 0.0) {
    const double steps = c.total_time / c.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps) || steps < 0.5) {
      p.push_back(fmt::format("dt = {} does not divide T = {}", c.dt, c.total_time));
    }
  }
  if (c.paths < 1) p.push_back("paths must be at least 1");
  if (c.model == "ou" && !(c.model_sigma > 0.0)) p.push_back("model.sigma must be positive");
  if (c.model_dim < 1) p.push_back("model.dim must be at least 1");
  if (c.model == "lorenz96" && c.model_dim < 4) p.push_back("lorenz96 needs model.dim >= 4");
  if (c.init == "normal" && !(c.init_std > 0.0)) p.push_back("init.std must be positive");
  if (!valid_alpha(c.alpha)) {
    p.push_back(fmt::format("alpha: expected const:A (A >= 0), auto:P or reciprocal, got '{}'",
                            c.alpha));
  } else if (c.estimator == "nstep-divker" && c.alpha.rfind("const:", 0) == 0 &&
             std::stod(c.alpha.substr(6)) > 1.0) {
    // the N-step weight mixes two covectors; above 1 it flips the divergence part
    p.push_back(fmt::format("alpha: nstep-divker takes a per-step weight in [0, 1], got '{}'",
                            c.alpha));
  }
  const bool needs_h0 = c.estimator == "sde-div" || c.estimator == "sde-divker" ||
                        c.estimator == "nstep-div" || c.estimator == "nstep-divker";
  if (needs_h0 && c.init == "point") {
    p.push_back(fmt::format("estimator {} needs the initial score; a point mass has none", c.estimator));
  }
  if ((c.estimator == "sde-kernel" || c.estimator == "nstep-kernel") && c.beta != "linear" &&
      c.init == "point") {
    p.push_back("beta = const:1 uses the initial score; a point mass has none");
  }
  if (!(c.bins_lo < c.bins_hi)) p.push_back("bins.lo must be below bins.hi");
  if (c.bins_n < 1) p.push_back("bins.n must be at least 1");
  const int dim = c.model == "cubic" ? 1 : c.model_dim;
  if (c.bins_coordinate < 0 || c.bins_coordinate >= dim) {
    p.push_back(fmt::format("bins.coordinate must lie in [0, {})", dim));
  }
  if (!(c.hist_lo < c.hist_hi) || c.hist_n < 1) p.push_back("hist needs lo < hi and n >= 1");
  if (!(c.cap > 0.0)) p.push_back("cap must be positive");
  if (!p.empty()) throw ConfigError(std::move(p));
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  return out;
}

RunConfig preset(const std::string& experiment) {
  RunConfig c;
  c.experiment = experiment;
  if (experiment == "ou-kernel") {
    c.model_noise = "unit";
    c.estimator = "sde-kernel";
  } else if (experiment == "ou-div") {
    c.estimator = "sde-div";
    c.total_time = 0.1;
  } else if (experiment == "ou-divker") {
    c.estimator = "sde-divker";
  } else if (experiment == "ou-divker-noh0") {
    c.estimator = "sde-divker-noh0";
  } else if (experiment == "lorenz96") {
    c.model = "lorenz96";
    c.model_dim = 40;
    c.init = "point";
    c.init_value = 1.0;
    c.total_time = 0.3;
    c.paths = 10000;
    c.estimator = "sde-divker-noh0";
    c.analysis = "linear-response";
  } else if (experiment != "custom") {
    throw ConfigError({fmt::format("unknown experiment '{}'", experiment)});
  }
  return c;
}

std::vector<std::string> preset_names() {
  return {"ou-kernel", "ou-div", "ou-divker", "ou-divker-noh0", "lorenz96"};
}

}  // namespace divker
