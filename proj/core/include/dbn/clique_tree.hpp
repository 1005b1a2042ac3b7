#pragma once

#include <memory>
#include <span>
#include <vector>

#include "dbn/model.hpp"
#include "dbn/potential.hpp"

namespace dbn {

/// Disjoint clusters of variable ids covering all state variables. Messages
/// are approximated as products of independent marginals over these
/// clusters; singletons give the coarsest factorization, one cluster of
/// everything recovers exact inference.
struct ClusterPartition {
    std::vector<std::vector<int>> clusters; // each sorted ascending

    static ClusterPartition singletons(int num_vars);
    static ClusterPartition single(int num_vars);
    int num_clusters() const { return static_cast<int>(clusters.size()); }
    /// Throws DataError unless clusters are nonempty, disjoint and cover
    /// 0..num_vars-1.
    void validate(int num_vars) const;
};

/// Structure of the clique tree over one transition window (slices t and
/// t+1): built once per (model, partition) and reused for every transition.
/// Guarantees: every transition family lies in some clique, and for every
/// cluster k some clique contains Z_k at slice t and some clique contains
/// Z_k at slice t+1.
struct CliqueTreeTemplate {
    SliceNodes slices;
    std::vector<int> node_cards; // per node id

    std::vector<std::vector<int>> cliques; // sorted node lists
    struct Edge {
        int a = 0, b = 0;
        std::vector<int> sepset; // sorted
    };
    std::vector<Edge> edges; // tree edges, size cliques-1
    // Per clique: (edge index, neighbor clique).
    std::vector<std::vector<std::pair<int, int>>> adjacency;
    // Messages in dependency order: collect toward the root, then
    // distribute back. (edge index, true when directed a->b).
    std::vector<std::pair<int, bool>> schedule;
    int root = 0;

    std::vector<int> family_clique;     // per child id
    std::vector<int> cluster_t_clique;  // per cluster
    std::vector<int> cluster_t1_clique; // per cluster

    std::vector<int> clique_cards(int c) const;
    /// Smallest clique containing all the nodes, or -1.
    int smallest_containing(std::span<const int> nodes) const;
};

/// Moralizes the two-slice graph augmented with cluster-completeness
/// constraints, triangulates with min-fill (lexicographic tie-break),
/// extracts maximal cliques and joins them by a maximum-sepset spanning
/// tree. Requires a Markovian model (window 2).
CliqueTreeTemplate build_clique_tree(const Dbn& dbn,
                                     const ClusterPartition& partition);

/// Calibrated posterior over one transition: clique potentials hold the
/// (approximate) joint posterior over their scopes.
struct CalibratedSliceTree {
    std::shared_ptr<const CliqueTreeTemplate> tpl;
    std::vector<Potential> beliefs;          // normalized, one per clique
    std::vector<Potential> sepset_marginals; // one per edge
    bool calibrated = false;
    /// Forward log-normalizer contributed by this transition.
    double log_mass = 0.0;

    /// Normalized marginal over the queried nodes, laid out row-major in
    /// the order requested. Throws NotInAnyClique when no single clique
    /// contains them all.
    std::vector<double> marginal_query(std::span<const int> nodes) const;
};

} // namespace dbn
