#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "revel/core.hpp"
#include "revel/llm.hpp"
#include "revel/matrix.hpp"
#include "revel/similarity.hpp"

namespace revel {

enum class PartitionProvenance { over_partition, llm_refined, fallback };

std::string_view to_string(PartitionProvenance p);

struct Partition {
    std::vector<std::vector<CandidateId>> clusters;
    PartitionProvenance provenance = PartitionProvenance::over_partition;
};

/// Coverage of exactly `ids`, pairwise disjoint, no empty cluster. On failure writes the reason.
bool satisfies_partition_constraints(const Partition& partition, std::span<const CandidateId> ids,
                                     std::string* why = nullptr);

/// Max pairwise dissimilarity among the given row indices (0 for fewer than two).
double cluster_diameter(const SquareMatrix& dissimilarity, std::span<const std::size_t> members);

/// Average-linkage agglomeration over D: merges the closest pair whose merged
/// diameter stays <= delta, until m_target clusters remain or no pair qualifies.
/// Clusters are ordered by their first row index; members keep row order.
Partition over_partition(const SquareMatrix& dissimilarity, std::span<const CandidateId> ids, double delta,
                         int m_target);

/// What the clustering prompt shows for one candidate.
struct ClusterCandidate {
    CandidateId id;
    std::string code;
    double score = 0.0;
};

struct RefinementResult {
    Partition partition;
    std::string prompt;
    std::string reply;
    std::string violation;  // empty when the model's partition was accepted
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

/// Candidates are shown to the model under labels "1".."n" in the given order.
std::string render_clustering_prompt(std::span<const ClusterCandidate> candidates, const Partition& initial);

/// Asks the model to restructure the over-partition. Any reply that does not
/// describe a valid partition of the same ids yields the input with provenance fallback.
RefinementResult llm_refine_partition(const Partition& partition, std::span<const ClusterCandidate> candidates,
                                      LlmClient& llm, int generation = -1);

/// Entropy (natural log) of the normalized pairwise similarities; 0 if the total is 0.
double cluster_entropy(std::span<const double> pair_similarities);

/// Entropy of a cluster given as row indices into W; singletons give 0.
double cluster_entropy(const SquareMatrix& similarity, std::span<const std::size_t> members);

/// w_i = H_i / sum H (negatives count as 0); uniform when every entropy is 0.
std::vector<double> entropy_weights(std::span<const double> entropies);

/// Per-cluster counts for a heterogeneous group: entropy-proportional floors,
/// leftover by largest fractional remainder (ties to the lowest index), capped at
/// cluster size with overflow redistributed by the same rule. All-zero
/// entropies fall back to uniform weights. Sums to min(L, total size).
std::vector<int> entropy_allocation(std::span<const double> entropies, std::span<const int> cluster_sizes, int target);

enum class GroupKind { homogeneous, heterogeneous };

std::string_view to_string(GroupKind k);

struct ReflectionGroup {
    std::vector<CandidateId> members;
    GroupKind kind = GroupKind::homogeneous;
    std::vector<int> source_clusters;
};

/// Samples entropy_allocation(entropies, sizes, L) members uniformly without replacement per cluster.
ReflectionGroup heterogeneous_group(const std::vector<std::vector<CandidateId>>& clusters,
                                    std::span<const double> entropies, int target, std::uint64_t seed);

/// Entropies from W for each cluster, looking rows up through ids.
std::vector<double> partition_entropies(const Partition& partition, const SimilarityMatrix& similarity);

struct GroupingOptions {
    int num_elements = 4;
    int groups_per_crossover = 1;
};

/// One homogeneous group per cluster (its num_elements best by fitness, ties by id)
/// plus groups_per_crossover heterogeneous groups of size num_elements when at least
/// two candidates exist.
std::vector<ReflectionGroup> build_reflection_groups(const Partition& partition, std::span<const double> entropies,
                                                     const std::map<CandidateId, double>& fitness,
                                                     const GroupingOptions& options, std::uint64_t seed);

}  // namespace revel
