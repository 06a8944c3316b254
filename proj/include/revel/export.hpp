#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "revel/runlog.hpp"

namespace revel {

enum class ExportKind { trajectory, turns, groups };

ExportKind export_kind_from_string(std::string_view s);

class LogReadError : public std::runtime_error {
public:
    LogReadError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Reads a whole run log. Throws LogReadError naming the 1-based line of the first
/// malformed line or sequence-number regression. Blank lines are skipped.
std::vector<LogLine> read_run_log(std::istream& in);

/// trajectory: generation,best_fitness,cumulative_tokens
/// turns:      turn,decision,count
/// groups:     generation,cluster,provenance,size,members (members joined by ';')
std::string export_csv(const std::vector<LogLine>& events, ExportKind kind);

}  // namespace revel
