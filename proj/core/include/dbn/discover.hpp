#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbn/em.hpp"
#include "dbn/model.hpp"
#include "dbn/search.hpp"

namespace dbn {

/// A learned dependence on a slice older than t: the footprint of an
/// unmodeled hidden process.
struct NonMarkovArc {
    int source = 0; // variable id in the searched structure
    int lag = 0;    // >= 2
    int child = 0;
    double gain = 0.0; // score gain recorded when the arc was added
};

/// k-slice-window structure learning. Statistics come from complete counts
/// when everything is observed, otherwise from product-of-marginals
/// expected counts under the current (Markovian) model -- inference only
/// ever runs on the two-slice model.
struct KtbnResult {
    Dbn model; // window max(2, max lag + 1), parameters fitted
    SearchResult search;
};
KtbnResult learn_ktbn(const Dbn& current, const Dataset& data,
                      const ClusterPartition& partition, int k,
                      const SearchConfig& config);

/// Arcs with lag >= 2 in a search result, sorted by descending gain.
std::vector<NonMarkovArc> find_non_markov_arcs(const SearchResult& result);

/// Total depth a memory-variable name encodes ("Y@-2@-1" is 3); 0 for
/// ordinary variables.
int memory_depth(const std::string& name);

/// Repairs non-Markovian arcs with chains of hidden memory variables:
/// X@-1..X@-d with X@-i carrying the value X had i slices back, each arc
/// X(lag d+1) -> Y' replaced by X@-d(lag 1) -> Y' (the target CPT is kept,
/// axes permuted). Memory CPDs are noisy copies biased toward persistence:
///   P(h | copy=y, self=p) = (1-eps)*[h=y] + eps*(rho*[h=p] + (1-rho)/m).
/// Arcs from the same source share one chain. Any lag >= 2 arc left
/// unrepaired is dropped (its CPT axis averaged out) so the result is
/// always Markovian. Throws DataError when a chain would exceed depth_cap.
Dbn introduce_memory_variables(const Dbn& dbn,
                               std::span<const NonMarkovArc> arcs,
                               double epsilon, double rho, int depth_cap = 3);

/// Keeps every factor-th slice of each sequence; sequences left shorter
/// than 2 slices are dropped.
Dataset subsample_dataset(const Dataset& data, int factor);

struct DiscoveryConfig {
    SearchConfig search; // max_lag = k-1 of the violation window
    EmConfig em;
    ClusterPartition base_partition; // over the observable columns;
                                     // defaults to singletons when empty
    double epsilon = 0.3;
    double rho = 0.5;
    int depth_cap = 3;
    int max_iterations = 2;  // structural iterations after iteration 0
    double sem_tolerance = 1e-6;
    double pseudocount = 1.0; // parameter smoothing for fitted models
};

struct DiscoveryRecord {
    std::string label;
    Dbn model;
    int num_hidden = 0;
    std::vector<NonMarkovArc> arcs_found;
    double train_loglik = 0.0;
    double test_bits = 0.0;
};

/// Full hidden-variable discovery loop: Markovian observable baseline,
/// k-window search for Markov violations, memory-variable introduction,
/// parametric EM, then repeated structural iterations under the augmented
/// model. Stops at max_iterations or when nothing new is found.
std::vector<DiscoveryRecord> discovery_pipeline(const Dataset& train,
                                                const Dataset& test,
                                                const DiscoveryConfig& config);

} // namespace dbn
