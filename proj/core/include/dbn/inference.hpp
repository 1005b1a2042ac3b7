#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dbn/clique_tree.hpp"
#include "dbn/model.hpp"

namespace dbn {

/// Product-of-marginals approximation of a forward or backward message:
/// one table per cluster (row-major over the cluster's ascending variable
/// ids) plus the log of the mass absorbed so far.
struct FactoredMessage {
    std::vector<std::vector<double>> clusters;
    double log_scale = 0.0;
};

/// Smoothing output for one sequence.
struct SmoothResult {
    std::vector<CalibratedSliceTree> trees; // one per transition
    double loglik = 0.0;                    // includes slice-0 evidence mass
    double slice0_loglik = 0.0;             // prior mass of slice-0 evidence
};

/// Factored forward-backward over per-transition clique trees. The tree
/// structure, CPT products and all cell index maps are precomputed once;
/// each step only fills small flat tables. Immutable and shareable after
/// construction.
class SliceTreeEngine {
  public:
    SliceTreeEngine(const Dbn& dbn, const ClusterPartition& partition);

    const CliqueTreeTemplate& tpl() const { return *tpl_; }
    std::shared_ptr<const CliqueTreeTemplate> tpl_ptr() const { return tpl_; }
    const ClusterPartition& partition() const { return partition_; }

    /// Message at slice 0: prior marginals conditioned on the slice-0
    /// evidence (a full assignment row with kMissing for unobserved);
    /// log_scale holds the evidence mass. Throws ZeroMassEvidence.
    FactoredMessage initial_alpha(std::span<const int> evidence0) const;

    /// alpha at t + evidence at t+1 -> alpha at t+1. Multiplies the message
    /// into the tree, conditions, calibrates, projects onto each cluster at
    /// t+1; log_scale grows by the log evidence mass.
    FactoredMessage forward_step(const FactoredMessage& alpha,
                                 std::span<const int> evidence_t1,
                                 int slice_t1) const;

    /// beta at t+1 + evidence at t+1 -> beta at t, projected onto clusters
    /// at slice t and renormalized (only ratios matter for posteriors).
    FactoredMessage backward_step(const FactoredMessage& beta_t1,
                                  std::span<const int> evidence_t1,
                                  int slice_t1) const;

    /// Uniform message, the backward initialization at the final slice.
    FactoredMessage uniform_message() const;

    /// Calibrated posterior for one transition: alpha at t, beta at t+1 and
    /// the evidence at t+1 multiplied into the tree. Reuses out's buffers.
    void posterior_tree(const FactoredMessage& alpha_t,
                        const FactoredMessage& beta_t1,
                        std::span<const int> evidence_t1, int slice_t1,
                        CalibratedSliceTree* out) const;

    /// Full forward then backward sweep over an aligned sequence. visit is
    /// called once per transition, in decreasing t order, with a calibrated
    /// tree whose buffers are reused between calls. Returns the approximate
    /// log-likelihood (and its slice-0 component).
    std::pair<double, double> smooth(
        const std::vector<std::vector<int>>& sequence,
        const std::function<void(int, const CalibratedSliceTree&)>& visit)
        const;

  private:
    struct Scratch;
    void prepare_work(Scratch& s) const;
    void apply_evidence(Scratch& s, std::span<const int> evidence) const;
    double calibrate(Scratch& s) const;
    const std::vector<double>& belief(Scratch& s, int clique) const;

    std::shared_ptr<const CliqueTreeTemplate> tpl_;
    ClusterPartition partition_;
    std::vector<Potential> base_; // per clique: product of assigned CPTs

    struct ClusterSide {
        int clique = -1;
        std::vector<std::int32_t> map; // clique cell -> cluster table cell
        std::size_t size = 0;
    };
    std::vector<ClusterSide> side_t_;  // per cluster, slice-t scope
    std::vector<ClusterSide> side_t1_; // per cluster, slice-t+1 scope

    struct EvEntry {
        int clique = -1;
        std::vector<std::int32_t> vals; // per clique cell: value of the node
    };
    std::vector<std::vector<EvEntry>> evidence_entries_; // per variable

    struct EdgeMaps {
        std::vector<std::int32_t> from_a, from_b; // clique cell -> sepset cell
        std::size_t sep_size = 0;
    };
    std::vector<EdgeMaps> edge_maps_;

    // Prior tables per cluster plus per-variable value maps for slice-0
    // conditioning.
    std::vector<std::vector<double>> prior_cluster_;
    std::vector<std::vector<std::vector<std::int32_t>>> cluster_value_maps_;
};

/// Runs a full smoothing pass and materializes every per-transition
/// posterior tree. The sequence is model-aligned (width num_vars, kMissing
/// for unobserved cells). Throws ZeroMassEvidence with the offending slice.
SmoothResult calibrate_slice_trees(const Dbn& dbn,
                                   const std::vector<std::vector<int>>& seq,
                                   const ClusterPartition& partition);

} // namespace dbn
