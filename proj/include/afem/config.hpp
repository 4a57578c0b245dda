#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "afem/adapt.hpp"

namespace afem {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string problem = "poisson-square";
  AdaptConfig adapt;
  std::string out = "afem-out";

  void set(const std::string& key, const std::string& value);
  void validate() const;
};

/// `key = value` lines, `#` comments. Unknown keys and malformed values
/// raise ConfigError naming the line.
void read_config(std::istream& is, RunConfig& config);
void read_config_file(const std::string& path, RunConfig& config);

/// Canonical key = value dump (readable by read_config).
std::string describe(const RunConfig& config);

}  // namespace afem
