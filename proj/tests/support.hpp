#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "revel/core.hpp"
#include "revel/evaluators.hpp"
#include "revel/executor.hpp"

namespace revel::testing {

inline ExecutorOptions guest_options(double timeout = 5.0) { return {timeout, {FAKE_GUEST_PATH}}; }

inline std::string guest_source(const std::string& mode, const std::string& fn = "score(item, bins)") {
    return fmt::format("# mode: {}\ndef {}:\n    return 0\n", mode, fn);
}

inline std::string explore_block(const std::string& code, const std::string& note = "idea") {
    return fmt::format("<explore>\n<algorithm>\n{}\n</algorithm>\n<code>\n{}\n</code>\n</explore>", note, code);
}

inline std::string exploit_block(const std::string& code, const std::string& note = "refinement") {
    return fmt::format("<exploit>\n<algorithm>\n{}\n</algorithm>\n<code>\n{}\n</code>\n</exploit>", note, code);
}

inline HeuristicCandidate builtin_candidate(const std::string& name, std::map<std::string, double> params = {}) {
    return make_candidate(CandidateBody::builtin(name, std::move(params)), Origin::init);
}

inline std::vector<Instance> small_bpp(int count = 3, int items = 200, std::uint64_t seed = 11) {
    std::vector<Instance> out;
    for (auto& b : generate_bpp_instances(items, 100, count, seed)) out.emplace_back(std::move(b));
    return out;
}

inline std::vector<Instance> small_tsp(int count = 3, int n = 20, std::uint64_t seed = 5) {
    std::vector<Instance> out;
    for (auto& t : generate_tsp_instances(n, count, seed)) out.emplace_back(std::move(t));
    return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / fmt::format("revel-test-{:x}", (static_cast<unsigned long long>(rd()) << 32) | rd());
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace revel::testing
