#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dbn {

/// Placeholder for an unobserved cell in a data sequence.
inline constexpr int kMissing = -1;

enum class VarKind { Observable, Hidden };

struct Variable {
    int id = 0;
    std::string name;
    int cardinality = 2;
    VarKind kind = VarKind::Observable;
};

/// Reference to a parent of a child variable at slice t+1. lag 0 is the
/// child's own slice, lag d reaches d slices back (slice t+1-d).
struct ParentRef {
    int variable = 0;
    int lag = 0;

    friend auto operator<=>(const ParentRef&, const ParentRef&) = default;
};

/// Canonical parent order: by lag, then variable id. All CPT layouts follow
/// the stored order, so keeping it canonical makes structures comparable and
/// model files reproducible.
struct TransitionStructure {
    std::vector<std::vector<ParentRef>> parents; // indexed by child id
    int max_indegree = 3;

    int num_vars() const { return static_cast<int>(parents.size()); }
    bool has_arc(int child, ParentRef p) const;
    /// Inserts at the canonical position; returns false if already present.
    bool add_arc(int child, ParentRef p);
    bool remove_arc(int child, ParentRef p);
    int max_lag() const;
    /// True if adding `p` to `child` keeps the lag-0 subgraph acyclic.
    bool lag0_acyclic_with(int child, ParentRef p) const;
    bool lag0_acyclic() const;
};

/// Table CPD. The flat table stores one conditional distribution per parent
/// configuration: child value index fastest, parent configurations
/// enumerated row-major over the ordered parent list.
struct Cpt {
    int child = 0;
    std::vector<ParentRef> parents;
    std::vector<int> parent_cards;
    int child_card = 2;
    std::vector<double> table;

    std::size_t num_rows() const;
    std::size_t expected_size() const { return num_rows() * child_card; }
    double at(std::size_t row, int value) const {
        return table[row * child_card + value];
    }
    double& at(std::size_t row, int value) {
        return table[row * child_card + value];
    }
    /// Row index for concrete parent values, in parent order.
    std::size_t row_index(std::span<const int> parent_values) const;

    static Cpt uniform(int child, int child_card,
                       std::vector<ParentRef> parents,
                       std::vector<int> parent_cards);
};

/// Discrete DBN: prior marginals for the first window-1 slices plus a
/// stationary transition fragment reused for every later slice. window 2 is
/// the Markovian case.
struct Dbn {
    std::vector<Variable> variables;
    int window = 2;
    // prior[s][v] is the marginal of variable v at slice s, s < window-1.
    std::vector<std::vector<std::vector<double>>> prior;
    TransitionStructure structure;
    std::vector<Cpt> cpts; // indexed by child id

    int num_vars() const { return static_cast<int>(variables.size()); }
    int card(int v) const { return variables[v].cardinality; }
    std::vector<int> cardinalities() const;
    bool is_hidden(int v) const { return variables[v].kind == VarKind::Hidden; }
    bool has_hidden() const;
    std::optional<int> find_variable(const std::string& name) const;
};

/// One or more discrete sequences over named columns; kMissing marks
/// unobserved cells. Cardinalities are per column.
struct Dataset {
    std::vector<std::string> names;
    std::vector<int> cardinalities;
    // sequences[s][t][c] = value index of column c at slice t.
    std::vector<std::vector<std::vector<int>>> sequences;

    int num_cols() const { return static_cast<int>(names.size()); }
    std::int64_t total_transitions() const;
    /// Throws DataError on shape or range violations.
    void check() const;
};

/// Returns the list of invariant violations; empty iff the model is valid.
std::vector<std::string> validate_dbn(const Dbn& dbn);

/// Number of free parameters of a transition structure:
/// sum over children of (card-1) * prod(parent cards).
std::int64_t dimension(const TransitionStructure& structure,
                       std::span<const int> cards);

/// Natural-log probability of a fully observed sequence (all variables,
/// including hidden ones). -inf is a legal value when a zero CPT entry is
/// hit. Throws DataError on kMissing cells or sequences shorter than the
/// model window.
double joint_log_prob(const Dbn& dbn,
                      const std::vector<std::vector<int>>& sequence);

/// Factorial-HMM template: num_hidden independent hidden chains, every
/// observable depending on all hidden variables in its own slice. CPTs are
/// near-uniform with small seeded multiplicative noise so EM can break
/// symmetry.
Dbn fhmm_structure(int num_hidden, int hidden_cardinality,
                   const std::vector<std::pair<std::string, int>>& observables,
                   int max_indegree, std::uint64_t seed);

/// Model over the dataset's columns with empty structure, uniform CPTs and
/// uniform priors.
Dbn make_empty_model(const Dataset& data, int max_indegree, int window = 2);

/// Prior marginals from slice-0 frequencies with add-one smoothing for
/// observables; hidden variables stay uniform. Matches columns by name.
void set_empirical_prior(Dbn& dbn, const Dataset& data);

/// Maps dataset columns onto model variable ids by name. Model variables
/// absent from the dataset come back all-kMissing. Throws DataError on
/// unknown columns or cardinality overflow.
std::vector<std::vector<std::vector<int>>> align_dataset(const Dbn& dbn,
                                                         const Dataset& data);

} // namespace dbn
