#include "revel/export.hpp"

#include <map>
#include <utility>

#include <fmt/format.h>

namespace revel {

ExportKind export_kind_from_string(std::string_view s) {
    if (s == "trajectory") return ExportKind::trajectory;
    if (s == "turns") return ExportKind::turns;
    if (s == "groups") return ExportKind::groups;
    throw std::invalid_argument(fmt::format("unknown export '{}' (trajectory, turns, groups)", s));
}

std::vector<LogLine> read_run_log(std::istream& in) {
    std::vector<LogLine> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto event = parse_log_line(line);
            if (!out.empty() && event.seq <= out.back().seq)
                throw std::invalid_argument(fmt::format("sequence number {} does not increase", event.seq));
            out.push_back(std::move(event));
        } catch (const std::invalid_argument& e) {
            throw LogReadError(fmt::format("line {}: {}", number, e.what()), number);
        }
    }
    return out;
}

namespace {

std::string number(const nlohmann::json& v) {
    if (v.is_number_integer()) return fmt::format("{}", v.get<long long>());
    return fmt::format("{}", v.get<double>());
}

}  // namespace

std::string export_csv(const std::vector<LogLine>& events, ExportKind kind) {
    std::string out;
    switch (kind) {
        case ExportKind::trajectory: {
            out = "generation,best_fitness,cumulative_tokens\n";
            for (const auto& e : events)
                if (e.kind == EventKind::generation_summary)
                    out += fmt::format("{},{},{}\n", number(e.payload.at("generation")),
                                       number(e.payload.at("best_fitness")),
                                       number(e.payload.value("cumulative_tokens", nlohmann::json(0))));
            break;
        }
        case ExportKind::turns: {
            std::map<std::pair<int, std::string>, int> counts;
            for (const auto& e : events)
                if (e.kind == EventKind::turn)
                    ++counts[{e.payload.at("turn").get<int>(), e.payload.at("decision").get<std::string>()}];
            out = "turn,decision,count\n";
            for (const auto& [key, n] : counts) out += fmt::format("{},{},{}\n", key.first, key.second, n);
            break;
        }
        case ExportKind::groups: {
            out = "generation,cluster,provenance,size,members\n";
            for (const auto& e : events) {
                if (e.kind != EventKind::partition) continue;
                const auto& clusters = e.payload.at("clusters");
                for (std::size_t c = 0; c < clusters.size(); ++c) {
                    std::string members;
                    for (const auto& id : clusters[c]) members += (members.empty() ? "" : ";") + id.get<std::string>();
                    out += fmt::format("{},{},{},{},{}\n", number(e.payload.at("generation")), c,
                                       e.payload.at("provenance").get<std::string>(), clusters[c].size(), members);
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace revel
