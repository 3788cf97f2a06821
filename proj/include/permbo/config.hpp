#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "permbo/bo_engine.hpp"

namespace permbo {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "permbo/1";

/// A config problem tied to a dotted field path.
struct ConfigError : std::runtime_error {
  ConfigError(std::string field, std::string message)
      : std::runtime_error(field + ": " + message), field(std::move(field)), message(std::move(message)) {}
  std::string field;
  std::string message;
};

/// Every key with its default value. A config file may set any subset.
Json default_config();

/// Merges user keys into the defaults. Unknown keys and type mismatches raise ConfigError.
Json resolve_config(const Json& user);

/// "a.b.c=value"; the value is read as JSON when it parses, otherwise as a string.
void apply_override(Json& config, const std::string& assignment);

/// One RunConfig per (benchmark, surrogate) pair, in config order.
std::vector<RunConfig> run_configs(const Json& resolved);

BenchmarkSpec benchmark_from_json(BenchmarkId id, const Json& params);
Json benchmark_to_json(const BenchmarkSpec& spec);

}  // namespace permbo
