#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "dbn/inference.hpp"
#include "dbn/model.hpp"

namespace dbn {

/// Ordered list of (variable, lag) terms; lag is relative to the child
/// slice t+1, like ParentRef, and may exceed 1 for multi-slice events.
struct Event {
    std::vector<ParentRef> terms;

    friend auto operator<=>(const Event&, const Event&) = default;
};

/// Family event of a child in a structure: parents in stored order, the
/// child (lag 0) last, so the count table is laid out exactly like the
/// child's CPT.
Event family_event(const TransitionStructure& structure, int child);

/// Fractional (or integer, for complete data) counts over an event's joint
/// value space, row-major over the event terms with the last term fastest.
struct EssTable {
    Event event;
    std::vector<int> cards; // per term
    std::vector<double> table;
    double total = 0.0; // number of transitions that contributed

    std::size_t index(std::span<const int> values) const;
    static EssTable zeros(Event event, std::span<const int> var_cards);
};

/// Tallies events over fully observed transitions. Event variable ids index
/// the sequences' columns. A transition is skipped for an event when any
/// referenced slice is out of range or the referenced cell is kMissing;
/// skipped transitions do not count toward the table total.
std::vector<EssTable> complete_counts(
    const std::vector<std::vector<std::vector<int>>>& sequences,
    std::span<const int> cards, std::span<const Event> events);

/// Dataset convenience overload (ids are dataset columns).
std::vector<EssTable> complete_counts(const Dataset& data,
                                      std::span<const Event> events);

/// Expected counts for family-shaped events read directly off the calibrated
/// clique potentials (no product approximation). Every event must fit in a
/// clique of every tree. trees[t] covers slices (t, t+1).
std::vector<EssTable> expected_family_counts(
    std::span<const CalibratedSliceTree> trees,
    std::span<const Event> family_events, std::span<const int> var_cards);

/// Product-of-marginals expected counts: each transition contributes the
/// outer product of per-variable singleton posteriors. A variable at
/// absolute slice s is read from tree s (its slice-t side) when s < T, else
/// from tree T-1 (its slice-t+1 side). Works for any event, including
/// multi-slice ones.
std::vector<EssTable> expected_event_counts_factored(
    std::span<const CalibratedSliceTree> trees, std::span<const Event> events,
    std::span<const int> var_cards);

/// Deduplicating cache keyed by the canonical event signature. Valid for
/// one model version; callers clear it when parameters or structure change.
class StatsCache {
  public:
    const EssTable* lookup(const Event& event) const;
    void store(EssTable table);
    void clear();
    std::size_t size() const { return tables_.size(); }
    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

  private:
    std::map<Event, EssTable> tables_;
    mutable std::size_t hits_ = 0;
    mutable std::size_t misses_ = 0;
};

/// Batched supplier of count tables for a structure search: either complete
/// tallies or expected statistics under a fixed model. collect() serves any
/// request set without re-running inference.
class StatsSource {
  public:
    virtual ~StatsSource() = default;
    virtual std::vector<EssTable> collect(std::span<const Event> events) = 0;
    EssTable collect_one(const Event& event);
    virtual double total_transitions() const = 0;
    virtual bool complete() const = 0;
    StatsCache& cache() { return cache_; }

  protected:
    StatsCache cache_;
};

/// Complete-data tallies; all cache misses of a collect() call are filled
/// in a single pass over the transitions.
class CompleteDataSource final : public StatsSource {
  public:
    CompleteDataSource(std::vector<std::vector<std::vector<int>>> sequences,
                       std::vector<int> cards);
    /// Columns must all be observed (the model paths check this).
    std::vector<EssTable> collect(std::span<const Event> events) override;
    double total_transitions() const override { return total_; }
    bool complete() const override { return true; }
    /// Number of full data sweeps performed (instrumentation).
    int sweeps() const { return sweeps_; }

  private:
    std::vector<std::vector<std::vector<int>>> sequences_;
    std::vector<int> cards_;
    double total_ = 0.0;
    int sweeps_ = 0;
};

/// Expected statistics under a fixed model: one smoothing sweep per
/// sequence caches singleton posteriors for every (slice, variable) and the
/// exact-in-clique family tables of the current structure. Arbitrary events
/// are then served as products of the cached marginals without further
/// inference.
class FactoredEssSource final : public StatsSource {
  public:
    FactoredEssSource(const Dbn& dbn, const ClusterPartition& partition,
                      std::vector<std::vector<std::vector<int>>> sequences);

    std::vector<EssTable> collect(std::span<const Event> events) override;
    double total_transitions() const override { return total_; }
    bool complete() const override { return false; }

    /// Exact-in-clique expected counts for the model's current families,
    /// aligned with child ids. Used for parameter re-estimation.
    const std::vector<EssTable>& current_family_counts();
    double loglik();
    double slice0_loglik();

    /// Calibrated transitions processed so far (instrumentation: stays
    /// constant however many events are collected).
    long transitions_processed() const { return transitions_; }

  private:
    void ensure_swept();

    const Dbn& dbn_;
    SliceTreeEngine engine_;
    std::vector<std::vector<std::vector<int>>> sequences_;
    double total_ = 0.0;
    bool swept_ = false;
    double loglik_ = 0.0;
    double slice0_loglik_ = 0.0;
    long transitions_ = 0;
    // marginals_[seq][slice][var] = posterior singleton table.
    std::vector<std::vector<std::vector<std::vector<double>>>> marginals_;
    std::vector<EssTable> family_tables_;
};

} // namespace dbn
