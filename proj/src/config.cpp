#include "afem/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace afem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_as(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t pos = 0;
    try {
      out = std::stod(value, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != value.size()) throw ConfigError("invalid number for '" + key + "': " + value);
  } else {
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || p != value.data() + value.size())
      throw ConfigError("invalid integer for '" + key + "': " + value);
  }
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "problem") problem = value;
  else if (key == "theta") adapt.theta = parse_as<double>(key, value);
  else if (key == "n_bisect" || key == "n") adapt.n = parse_as<int>(key, value);
  else if (key == "max_iters") adapt.max_iters = parse_as<int>(key, value);
  else if (key == "max_elements") adapt.max_elements = parse_as<std::size_t>(key, value);
  else if (key == "eta_tol") adapt.eta_tol = parse_as<double>(key, value);
  else if (key == "seed") adapt.seed = parse_as<std::uint64_t>(key, value);
  else if (key == "out") out = value;
  else if (key == "newton_tol") adapt.solver.newton_tol = parse_as<double>(key, value);
  else if (key == "max_newton") adapt.solver.max_newton = parse_as<int>(key, value);
  else if (key == "cg_tol_factor") adapt.solver.cg_tol_factor = parse_as<double>(key, value);
  else if (key == "cg_max") adapt.solver.cg_max = parse_as<int>(key, value);
  else if (key == "mode") {
    try {
      adapt.mode = parse_mode(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "exec") {
    if (value == "serial") adapt.exec = Exec::serial;
    else if (value == "parallel") adapt.exec = Exec::parallel;
    else throw ConfigError("exec must be serial or parallel");
  } else if (key == "fault") {
    if (value == "none") adapt.estimator.flip_jump_sign = false;
    else if (value == "jump-sign") adapt.estimator.flip_jump_sign = true;
    else throw ConfigError("unknown fault '" + value + "'");
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

void RunConfig::validate() const {
  if (problem.empty()) throw ConfigError("problem must be set");
  if (out.empty()) throw ConfigError("output directory must be set");
  try {
    adapt.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void read_config(std::istream& is, RunConfig& config) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      config.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void read_config_file(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  read_config(in, config);
}

std::string describe(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "problem = " << c.problem << '\n'
     << "mode = " << mode_name(c.adapt.mode) << '\n'
     << "theta = " << c.adapt.theta << '\n'
     << "n_bisect = " << c.adapt.n << '\n'
     << "max_iters = " << c.adapt.max_iters << '\n'
     << "max_elements = " << c.adapt.max_elements << '\n'
     << "eta_tol = " << c.adapt.eta_tol << '\n'
     << "seed = " << c.adapt.seed << '\n'
     << "newton_tol = " << c.adapt.solver.newton_tol << '\n'
     << "max_newton = " << c.adapt.solver.max_newton << '\n'
     << "cg_tol_factor = " << c.adapt.solver.cg_tol_factor << '\n'
     << "cg_max = " << c.adapt.solver.cg_max << '\n'
     << "fault = " << (c.adapt.estimator.flip_jump_sign ? "jump-sign" : "none") << '\n';
  return os.str();
}

}  // namespace afem
