#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dbn/model.hpp"
#include "dbn/search.hpp"
#include "dbn/statistics.hpp"

namespace dbn {

struct EmConfig {
    enum class EStep { Bk, Exact };
    enum class Ess { Family, Factored };
    EStep e_step = EStep::Bk;
    Ess ess = Ess::Family; // Factored uses the product-of-marginals counts
    double tolerance = 1e-4; // relative log-likelihood improvement
    int max_iters = 30;
    // With the approximate E-step the likelihood may dip; a drop bigger
    // than this (bits per slice) stops the run with the best model so far.
    double decrease_guard_bits = 1e-3;
    double pseudocount = 0.0;
    std::size_t state_bound = std::size_t{1} << 20;
};

struct EmResult {
    Dbn model; // the best-likelihood parameters observed
    std::vector<double> loglik_trace;
    int best_iteration = 0;
};

/// EM over the transition parameters with a fixed structure. The prior
/// marginals are left untouched (estimated once, empirically). Trace entry
/// i is the log-likelihood of the parameters entering iteration i.
EmResult parametric_em(const Dbn& init,
                       const std::vector<std::vector<std::vector<int>>>& aligned,
                       const ClusterPartition& partition, const EmConfig& cfg);
EmResult parametric_em(const Dbn& init, const Dataset& data,
                       const ClusterPartition& partition, const EmConfig& cfg);

/// Seeded multiplicative perturbation of all CPT rows (exp(U(-s, s)) per
/// cell, renormalized).
void randomize_parameters(Dbn& dbn, std::uint64_t seed, double strength = 1.0);

/// Runs EM from `restarts` perturbed starts and keeps the best training
/// likelihood.
EmResult parametric_em_restarts(const Dbn& init, const Dataset& data,
                                const ClusterPartition& partition,
                                const EmConfig& cfg, int restarts,
                                std::uint64_t seed);

/// Held-out negative log2-likelihood per transition, conditioned on the
/// first slice; hidden variables are marginalized by the factored smoother.
/// Zero-mass evidence contributes +inf and a diagnostic line.
double holdout_bits_per_slice(const Dbn& dbn, const Dataset& test,
                              const ClusterPartition& partition,
                              std::vector<std::string>* diagnostics = nullptr);

/// Training-data bits per transition from a source's accumulated
/// log-likelihood.
double bits_per_slice(double loglik, double slice0_loglik,
                      double transitions);

/// Complete or expected statistics, depending on whether the model/data
/// pair actually needs inference.
std::unique_ptr<StatsSource> make_stats_source(
    const Dbn& model, const std::vector<std::vector<std::vector<int>>>& aligned,
    const ClusterPartition& partition);

bool has_missing(const std::vector<std::vector<std::vector<int>>>& aligned);

/// Replaces the CPTs of families whose parent sets differ from `reference`
/// (or all families when reference is null) with estimates from the source.
void refit_parameters(Dbn& model, StatsSource& stats, double pseudocount,
                      const TransitionStructure* reference = nullptr);

struct SemRecord {
    std::string phase;
    int iteration = 0;
    double score = 0.0;
    double bits_per_slice = 0.0;
};

struct SemConfig {
    SearchConfig search;
    EmConfig em;
    double tolerance = 1e-6; // minimum expected-score gain to continue
    int max_outer = 10;
};

struct SemResult {
    Dbn model;
    std::vector<SemRecord> records;
    std::vector<SearchResult> searches; // one inner-loop trace per E-step
};

/// Structural EM: complete the data under the current model, run a full
/// greedy structure search on the expected statistics, re-estimate, repeat
/// until the expected score stops improving. Markovian models only
/// (search.max_lag must be 1).
SemResult structural_em(const Dbn& init, const Dataset& data,
                        const ClusterPartition& partition,
                        const SemConfig& cfg);

} // namespace dbn
