#include "revel/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

namespace revel {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_real(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(std::string_view s) {
    if (s == "true") return true;
    if (s == "false") return false;
    return std::nullopt;
}

// Returns an error message, or empty on success.
using FieldParser = std::function<std::string(RunConfig&, const std::string&)>;

FieldParser count_field(int RunConfig::*member, long long min = 1) {
    return [member, min](RunConfig& c, const std::string& v) -> std::string {
        auto x = parse_int(v);
        if (!x) return fmt::format("expected an integer, got '{}'", v);
        if (*x < min || *x > 1'000'000'000) return fmt::format("must be >= {}, got {}", min, *x);
        c.*member = static_cast<int>(*x);
        return {};
    };
}

FieldParser real_field(double RunConfig::*member, double lo, double hi, bool lo_open = false) {
    return [=](RunConfig& c, const std::string& v) -> std::string {
        auto x = parse_real(v);
        if (!x) return fmt::format("expected a finite number, got '{}'", v);
        if ((lo_open ? *x <= lo : *x < lo) || *x > hi)
            return fmt::format("must be in {}{}, {}], got {}", lo_open ? "(" : "[", lo, hi, *x);
        c.*member = *x;
        return {};
    };
}

FieldParser string_field(std::string RunConfig::*member) {
    return [member](RunConfig& c, const std::string& v) -> std::string {
        c.*member = v;
        return {};
    };
}

const std::map<std::string, FieldParser>& field_table() {
    static const std::map<std::string, FieldParser> table = {
        {"max_turns", count_field(&RunConfig::max_turns)},
        {"num_candidates_to_initialize", count_field(&RunConfig::num_candidates_to_initialize)},
        {"epochs", count_field(&RunConfig::epochs)},
        {"top_k", count_field(&RunConfig::top_k)},
        {"reminder_probability", real_field(&RunConfig::reminder_probability, 0.0, 1.0)},
        {"num_clusters", count_field(&RunConfig::num_clusters)},
        {"num_elements", count_field(&RunConfig::num_elements)},
        {"alpha", real_field(&RunConfig::alpha, 0.0, 1e9)},
        {"beta", real_field(&RunConfig::beta, 0.0, 1e9)},
        {"groups_per_crossover", count_field(&RunConfig::groups_per_crossover)},
        {"delta", real_field(&RunConfig::delta, 0.0, 1.0, true)},
        {"timeout_seconds", real_field(&RunConfig::timeout_seconds, 0.0, 1e6, true)},
        {"guest_runner", string_field(&RunConfig::guest_runner)},
        {"problem",
         [](RunConfig& c, const std::string& v) -> std::string {
             if (v == "tsp") c.problem = Problem::tsp;
             else if (v == "bpp") c.problem = Problem::bpp;
             else return fmt::format("expected tsp or bpp, got '{}'", v);
             return {};
         }},
        {"instance_count", count_field(&RunConfig::instance_count)},
        {"instance_seed", count_field(&RunConfig::instance_seed, 0)},
        {"bpp_items", count_field(&RunConfig::bpp_items)},
        {"bpp_capacity", count_field(&RunConfig::bpp_capacity, 2)},
        {"bpp_max_item_fraction", real_field(&RunConfig::bpp_max_item_fraction, 0.0, 1.0, true)},
        {"tsp_nodes", count_field(&RunConfig::tsp_nodes, 3)},
        {"instances_file", string_field(&RunConfig::instances_file)},
        {"tsplib_file", string_field(&RunConfig::tsplib_file)},
        {"tsplib_reference_cost",
         [](RunConfig& c, const std::string& v) -> std::string {
             auto x = parse_real(v);
             if (!x || *x <= 0) return fmt::format("expected a positive number, got '{}'", v);
             c.tsplib_reference_cost = *x;
             return {};
         }},
        {"seed",
         [](RunConfig& c, const std::string& v) -> std::string {
             auto x = parse_int(v);
             if (!x || *x < 0) return fmt::format("expected a non-negative integer, got '{}'", v);
             c.seed = static_cast<std::uint64_t>(*x);
             return {};
         }},
        {"llm_backend",
         [](RunConfig& c, const std::string& v) -> std::string {
             if (v == "mock") c.llm_backend = LlmBackend::mock;
             else if (v == "remote") c.llm_backend = LlmBackend::remote;
             else return fmt::format("expected mock or remote, got '{}'", v);
             return {};
         }},
        {"mock_script", string_field(&RunConfig::mock_script)},
        {"llm_base_url", string_field(&RunConfig::llm_base_url)},
        {"llm_model", string_field(&RunConfig::llm_model)},
        {"llm_api_key_env", string_field(&RunConfig::llm_api_key_env)},
        {"llm_temperature", real_field(&RunConfig::llm_temperature, 0.0, 2.0)},
        {"log_path", string_field(&RunConfig::log_path)},
        {"log_timestamps",
         [](RunConfig& c, const std::string& v) -> std::string {
             auto b = parse_bool(v);
             if (!b) return fmt::format("expected true or false, got '{}'", v);
             c.log_timestamps = *b;
             return {};
         }},
        {"checkpoint_path", string_field(&RunConfig::checkpoint_path)},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : field_table()) k.push_back(name);
        return k;
    }();
    return keys;
}

RawConfig parse_config_text(std::string_view text) {
    RawConfig raw;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        // Strip comments outside quotes.
        bool in_quotes = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quotes = !in_quotes;
            if (line[i] == '#' && !in_quotes) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') throw ConfigError(fmt::format("line {}: tables are not supported (flat keys only)", line_no));

        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
        std::string key(trim(line.substr(0, eq)));
        std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        else if (!value.empty() && value.front() == '"')
            throw ConfigError(fmt::format("line {}: unterminated string", line_no));
        if (!raw.emplace(key, std::string(value)).second)
            throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
    }
    return raw;
}

RawConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

ConfigResult validate_config(const RawConfig& raw) {
    ConfigResult result;
    RunConfig cfg;
    const auto& table = field_table();
    for (const auto& [key, value] : raw) {
        auto it = table.find(key);
        if (it == table.end()) {
            result.errors.push_back(fmt::format("{}: unknown key", key));
            continue;
        }
        if (auto err = it->second(cfg, value); !err.empty()) result.errors.push_back(fmt::format("{}: {}", key, err));
    }
    if (!raw.contains("beta")) cfg.beta = std::max(0.0, 1.0 - cfg.alpha);
    if (cfg.alpha + cfg.beta <= 0.0) result.errors.push_back("beta: alpha and beta must not both be 0");
    if (cfg.top_k > cfg.num_candidates_to_initialize + 1)
        result.errors.push_back(fmt::format("top_k: must be <= num_candidates_to_initialize + 1 ({}), got {}",
                                            cfg.num_candidates_to_initialize + 1, cfg.top_k));
    if (cfg.bpp_items >= 1 && static_cast<int>(cfg.bpp_max_item_fraction * cfg.bpp_capacity) < 1)
        result.errors.push_back("bpp_max_item_fraction: largest item size floor(fraction * capacity) must be >= 1");
    if (result.errors.empty()) result.config = cfg;
    return result;
}

}  // namespace revel
