#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilewall/cluster/job.hpp"

namespace tw::config {

/// Every problem found in a config, reported together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

using Env = std::map<std::string, std::string>;

/// TW_* variables of the current process.
Env process_env();

/// Applies the keys of `j` onto `cfg`, appending one message per problem.
void apply_json(const nlohmann::json& j, cluster::JobConfig& cfg, std::vector<std::string>& problems);

/// Appends problems with a fully merged config (cross-key rules).
void validate(const cluster::JobConfig& cfg, std::vector<std::string>& problems);

/// Parses a JobConfig document, then applies TW_<KEY> overrides from `env`
/// (values parsed as JSON when possible, else taken as strings).
/// Throws ConfigError listing every problem.
cluster::JobConfig parse_config_text(const std::string& text, const Env& env = {});
cluster::JobConfig parse_config(const std::filesystem::path& path);

nlohmann::json to_json(const cluster::JobConfig& cfg);

}  // namespace tw::config
