#include "revel/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "revel/prompt_templates.hpp"

namespace revel {

using json = nlohmann::json;

std::string_view to_string(PartitionProvenance p) {
    switch (p) {
        case PartitionProvenance::over_partition: return "over_partition";
        case PartitionProvenance::llm_refined: return "llm_refined";
        case PartitionProvenance::fallback: return "fallback";
    }
    return "?";
}

std::string_view to_string(GroupKind k) { return k == GroupKind::homogeneous ? "homogeneous" : "heterogeneous"; }

bool satisfies_partition_constraints(const Partition& partition, std::span<const CandidateId> ids, std::string* why) {
    auto fail = [&](std::string msg) {
        if (why) *why = std::move(msg);
        return false;
    };
    const std::set<CandidateId> expected(ids.begin(), ids.end());
    std::set<CandidateId> seen;
    for (const auto& cluster : partition.clusters) {
        if (cluster.empty()) return fail("empty cluster");
        for (const auto& id : cluster) {
            if (!expected.contains(id)) return fail(fmt::format("unknown member '{}'", id));
            if (!seen.insert(id).second) return fail(fmt::format("member '{}' appears twice", id));
        }
    }
    if (seen.size() != expected.size()) {
        for (const auto& id : expected)
            if (!seen.contains(id)) return fail(fmt::format("member '{}' is missing", id));
    }
    return true;
}

double cluster_diameter(const SquareMatrix& d, std::span<const std::size_t> members) {
    double diam = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) diam = std::max(diam, d(members[a], members[b]));
    return diam;
}

Partition over_partition(const SquareMatrix& d, std::span<const CandidateId> ids, double delta, int m_target) {
    const auto n = d.size();
    if (ids.size() != n) throw std::invalid_argument("ids and dissimilarity matrix disagree in size");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must be in (0, 1]");
    const auto target = static_cast<std::size_t>(std::max(1, m_target));

    std::vector<std::vector<std::size_t>> clusters(n);
    std::vector<double> diam(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};

    while (clusters.size() > target) {
        std::size_t best_a = 0, best_b = 0;
        double best_link = std::numeric_limits<double>::infinity();
        double best_diam = 0.0;
        for (std::size_t a = 0; a < clusters.size(); ++a) {
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                double sum = 0.0, cross_max = 0.0;
                for (auto i : clusters[a])
                    for (auto j : clusters[b]) {
                        sum += d(i, j);
                        cross_max = std::max(cross_max, d(i, j));
                    }
                const double merged = std::max({diam[a], diam[b], cross_max});
                if (merged > delta) continue;
                const double link = sum / static_cast<double>(clusters[a].size() * clusters[b].size());
                if (link < best_link) {
                    best_link = link;
                    best_a = a;
                    best_b = b;
                    best_diam = merged;
                }
            }
        }
        if (!std::isfinite(best_link)) break;
        auto& into = clusters[best_a];
        into.insert(into.end(), clusters[best_b].begin(), clusters[best_b].end());
        std::sort(into.begin(), into.end());
        diam[best_a] = best_diam;
        clusters.erase(clusters.begin() + static_cast<long>(best_b));
        diam.erase(diam.begin() + static_cast<long>(best_b));
    }

    Partition p;
    p.provenance = PartitionProvenance::over_partition;
    for (const auto& c : clusters) {
        std::vector<CandidateId> members;
        for (auto i : c) members.push_back(ids[i]);
        p.clusters.push_back(std::move(members));
    }
    return p;
}

std::string render_clustering_prompt(std::span<const ClusterCandidate> candidates, const Partition& initial) {
    std::unordered_map<CandidateId, std::string> label;
    json list = json::array();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        label[candidates[k].id] = std::to_string(k + 1);
        list.push_back({{"id", std::to_string(k + 1)}, {"code", candidates[k].code}, {"score", candidates[k].score}});
    }
    json clusters = json::array();
    for (const auto& c : initial.clusters) {
        json members = json::array();
        for (const auto& id : c) members.push_back(label.contains(id) ? label.at(id) : id);
        clusters.push_back(std::move(members));
    }
    std::string prompt(prompts::kClusteringPrompt);
    prompt += "\n";
    prompt += list.dump(2);
    prompt += "\n\nINITIAL PARTITION (groups of ids):\n";
    prompt += clusters.dump();
    prompt += "\n";
    return prompt;
}

namespace {

// Returns the partition described by the reply, or sets `violation`.
std::optional<Partition> parse_groups_reply(const std::string& reply, std::span<const ClusterCandidate> candidates,
                                            std::string& violation) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        violation = "reply contains no JSON object";
        return std::nullopt;
    }
    json doc = json::parse(reply.substr(open, close - open + 1), nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("groups") || !doc["groups"].is_array()) {
        violation = "reply is not a JSON object with a 'groups' array";
        return std::nullopt;
    }
    Partition p;
    p.provenance = PartitionProvenance::llm_refined;
    for (const auto& g : doc["groups"]) {
        if (!g.is_object() || !g.contains("members") || !g["members"].is_array()) {
            violation = "group without a 'members' array";
            return std::nullopt;
        }
        std::vector<CandidateId> members;
        for (const auto& m : g["members"]) {
            std::string lbl;
            if (m.is_string()) lbl = m.get<std::string>();
            else if (m.is_number_integer()) lbl = std::to_string(m.get<long long>());
            else {
                violation = "member is neither a string nor an integer";
                return std::nullopt;
            }
            std::size_t idx = 0;
            try {
                std::size_t used = 0;
                idx = std::stoul(lbl, &used);
                if (used != lbl.size()) throw std::invalid_argument(lbl);
            } catch (const std::exception&) {
                violation = fmt::format("unknown member '{}'", lbl);
                return std::nullopt;
            }
            if (idx < 1 || idx > candidates.size()) {
                violation = fmt::format("unknown member '{}'", lbl);
                return std::nullopt;
            }
            members.push_back(candidates[idx - 1].id);
        }
        p.clusters.push_back(std::move(members));
    }
    return p;
}

}  // namespace

RefinementResult llm_refine_partition(const Partition& partition, std::span<const ClusterCandidate> candidates,
                                      LlmClient& llm, int generation) {
    RefinementResult out;
    out.prompt = render_clustering_prompt(candidates, partition);
    std::vector<CandidateId> ids;
    for (const auto& c : candidates) ids.push_back(c.id);

    try {
        auto reply = llm.complete({{Role::user, out.prompt}}, CallContext{"cluster", generation, -1, -1, 0});
        out.reply = std::move(reply.text);
        out.prompt_tokens = reply.prompt_tokens;
        out.completion_tokens = reply.completion_tokens;
    } catch (const LlmError& e) {
        out.violation = fmt::format("LLM call failed: {}", e.what());
    }

    if (out.violation.empty()) {
        if (auto parsed = parse_groups_reply(out.reply, candidates, out.violation)) {
            std::string why;
            if (satisfies_partition_constraints(*parsed, ids, &why)) {
                out.partition = std::move(*parsed);
                return out;
            }
            out.violation = why;
        }
    }
    out.partition = partition;
    out.partition.provenance = PartitionProvenance::fallback;
    return out;
}

double cluster_entropy(std::span<const double> pair_similarities) {
    double total = 0.0;
    for (double s : pair_similarities) total += s;
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double s : pair_similarities) {
        if (s <= 0.0) continue;
        const double p = s / total;
        h -= p * std::log(p);
    }
    return h;
}

double cluster_entropy(const SquareMatrix& similarity, std::span<const std::size_t> members) {
    std::vector<double> pairs;
    for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) pairs.push_back(similarity(members[a], members[b]));
    return cluster_entropy(pairs);
}

std::vector<double> entropy_weights(std::span<const double> entropies) {
    std::vector<double> w(entropies.size(), 0.0);
    double sum = 0.0;
    for (double h : entropies) sum += std::max(0.0, h);
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = sum > 0.0 ? std::max(0.0, entropies[i]) / sum : 1.0 / static_cast<double>(w.size());
    return w;
}

std::vector<int> entropy_allocation(std::span<const double> entropies, std::span<const int> cluster_sizes, int target) {
    const auto k = entropies.size();
    if (cluster_sizes.size() != k) throw std::invalid_argument("entropies and cluster sizes differ in length");
    std::vector<int> alloc(k, 0);
    long total = 0;
    for (int s : cluster_sizes) total += std::max(0, s);
    const long goal = std::min<long>(std::max(0, target), total);
    long remaining = goal;

    while (remaining > 0) {
        std::vector<std::size_t> open;
        std::vector<double> open_entropies;
        for (std::size_t i = 0; i < k; ++i) {
            if (alloc[i] < cluster_sizes[i]) {
                open.push_back(i);
                open_entropies.push_back(entropies[i]);
            }
        }
        const auto weights = entropy_weights(open_entropies);
        std::vector<long> grant(k, 0);
        std::vector<double> frac(k, 0.0);
        long floors = 0;
        for (std::size_t o = 0; o < open.size(); ++o) {
            const auto i = open[o];
            const double quota = weights[o] * static_cast<double>(remaining);
            grant[i] = static_cast<long>(std::floor(quota));
            frac[i] = quota - std::floor(quota);
            floors += grant[i];
        }
        auto order = open;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
        for (long left = remaining - floors, r = 0; left > 0; --left, ++r) ++grant[order[r % order.size()]];
        for (auto i : open) {
            const long give = std::min<long>(grant[i], cluster_sizes[i] - alloc[i]);
            alloc[i] += static_cast<int>(give);
        }
        remaining = goal - std::accumulate(alloc.begin(), alloc.end(), 0L);
    }
    return alloc;
}

ReflectionGroup heterogeneous_group(const std::vector<std::vector<CandidateId>>& clusters,
                                    std::span<const double> entropies, int target, std::uint64_t seed) {
    std::vector<int> sizes;
    for (const auto& c : clusters) sizes.push_back(static_cast<int>(c.size()));
    const auto alloc = entropy_allocation(entropies, sizes, target);
    std::mt19937_64 rng(seed);
    ReflectionGroup g;
    g.kind = GroupKind::heterogeneous;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (alloc[i] == 0) continue;
        auto pool = clusters[i];
        std::shuffle(pool.begin(), pool.end(), rng);
        g.members.insert(g.members.end(), pool.begin(), pool.begin() + alloc[i]);
        g.source_clusters.push_back(static_cast<int>(i));
    }
    return g;
}

std::vector<double> partition_entropies(const Partition& partition, const SimilarityMatrix& similarity) {
    std::unordered_map<CandidateId, std::size_t> row;
    for (std::size_t i = 0; i < similarity.ids.size(); ++i) row[similarity.ids[i]] = i;
    std::vector<double> out;
    for (const auto& c : partition.clusters) {
        std::vector<std::size_t> members;
        for (const auto& id : c) members.push_back(row.at(id));
        out.push_back(cluster_entropy(similarity.similarity, members));
    }
    return out;
}

std::vector<ReflectionGroup> build_reflection_groups(const Partition& partition, std::span<const double> entropies,
                                                     const std::map<CandidateId, double>& fitness,
                                                     const GroupingOptions& options, std::uint64_t seed) {
    if (entropies.size() != partition.clusters.size())
        throw std::invalid_argument("one entropy per cluster is required");
    std::vector<ReflectionGroup> groups;
    std::size_t total = 0;
    for (std::size_t c = 0; c < partition.clusters.size(); ++c) {
        auto members = partition.clusters[c];
        total += members.size();
        std::stable_sort(members.begin(), members.end(), [&](const CandidateId& a, const CandidateId& b) {
            const double fa = fitness.at(a), fb = fitness.at(b);
            return fa != fb ? fa < fb : a < b;
        });
        if (members.size() > static_cast<std::size_t>(options.num_elements)) members.resize(options.num_elements);
        groups.push_back({std::move(members), GroupKind::homogeneous, {static_cast<int>(c)}});
    }
    if (total >= 2) {
        for (int j = 0; j < options.groups_per_crossover; ++j) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(j)};
            std::uint32_t derived[2];
            seq.generate(derived, derived + 2);
            const std::uint64_t s = (static_cast<std::uint64_t>(derived[0]) << 32) | derived[1];
            groups.push_back(heterogeneous_group(partition.clusters, entropies, options.num_elements, s));
        }
    }
    return groups;
}

}  // namespace revel
