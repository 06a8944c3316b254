#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "revel/core.hpp"

namespace revel {

/// Flat key/value pairs as read from a config file or CLI overrides, values unparsed.
using RawConfig = std::map<std::string, std::string>;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LlmBackend { mock, remote };

struct RunConfig {
    // Evolution loop
    int max_turns = 6;
    int num_candidates_to_initialize = 10;
    int epochs = 20;
    int top_k = 10;
    double reminder_probability = 0.3;
    // Clustering and cross-over
    int num_clusters = 3;
    int num_elements = 4;
    double alpha = 0.5;
    double beta = 0.5;
    int groups_per_crossover = 1;
    double delta = 0.3;
    // Evaluator
    double timeout_seconds = 70.0;
    std::string guest_runner = "revel-guest-runner";

    // Instances
    Problem problem = Problem::bpp;
    int instance_count = 5;
    int instance_seed = 0;
    int bpp_items = 1000;
    int bpp_capacity = 100;
    double bpp_max_item_fraction = 0.6;
    int tsp_nodes = 50;
    std::string instances_file;
    std::string tsplib_file;
    std::optional<double> tsplib_reference_cost;

    // Engine
    std::uint64_t seed = 0;
    LlmBackend llm_backend = LlmBackend::mock;
    std::string mock_script;
    std::string llm_base_url = "https://api.openai.com/v1";
    std::string llm_model = "gpt-4o-mini";
    std::string llm_api_key_env = "OPENAI_API_KEY";
    double llm_temperature = 0.0;

    // Output
    std::string log_path = "revel_run.jsonl";
    bool log_timestamps = false;
    std::string checkpoint_path;
};

struct ConfigResult {
    std::optional<RunConfig> config;
    std::vector<std::string> errors;

    bool ok() const { return config.has_value(); }
};

/// Parses `key = value` lines; `#` starts a comment, values may be double-quoted.
/// Throws ConfigError naming the line on syntax errors or duplicate keys.
RawConfig parse_config_text(std::string_view text);

RawConfig load_config_file(const std::string& path);

/// Fills defaults, parses and range-checks every field. One error per violated field.
ConfigResult validate_config(const RawConfig& raw);

/// Every key validate_config understands.
const std::vector<std::string>& known_config_keys();

}  // namespace revel
