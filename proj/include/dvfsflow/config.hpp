#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvfsflow/orchestrator.hpp"

namespace dvfsflow {

struct ExperimentConfig {
  ExperimentSetup setup;
  std::vector<Method> methods = {Method::dfm, Method::pure_fm, Method::model_based,
                                 Method::model_free};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir = "runs";

  bool operator==(const ExperimentConfig&) const = default;
};

// JSON is the only accepted format. Missing keys take defaults, unknown keys
// are rejected, and the result is validated before it is returned.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentSetup& setup);
nlohmann::json to_json(const ExperimentConfig& config);

// Effective config with every default spelled out.
std::string print_config(const ExperimentConfig& config);

// "0..4" (inclusive range) or "0,3,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& spec);
std::vector<Method> parse_method_list(const std::string& spec);

}  // namespace dvfsflow
