#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dbn {

/// Node addressing inside a two-slice transition window of n variables:
/// variable v at slice t is node v, at slice t+1 it is node n + v.
struct SliceNodes {
    int num_vars = 0;

    int at_t(int v) const { return v; }
    int at_t1(int v) const { return num_vars + v; }
    int var_of(int node) const {
        return node < num_vars ? node : node - num_vars;
    }
    bool is_t1(int node) const { return node >= num_vars; }
    int total() const { return 2 * num_vars; }
};

/// Dense table over a sorted list of nodes, row-major with the last node
/// fastest. Small by construction (clique-sized), manipulated in linear
/// space; callers track log-scale separately.
class Potential {
  public:
    Potential() = default;
    Potential(std::vector<int> nodes, std::vector<int> cards, double fill);

    const std::vector<int>& nodes() const { return nodes_; }
    const std::vector<int>& cards() const { return cards_; }
    std::vector<double>& table() { return table_; }
    const std::vector<double>& table() const { return table_; }
    std::size_t size() const { return table_.size(); }
    bool contains(std::span<const int> nodes) const;

    /// Multiplies in a potential whose scope is a subset of this one.
    void multiply(const Potential& other);
    /// Sums out everything not in `target`; target must be a sorted subset.
    Potential marginal_onto(std::span<const int> target) const;
    /// Marginal table laid out row-major over `query` in the order given
    /// (query may be unsorted; duplicates not allowed).
    std::vector<double> marginal_in_order(std::span<const int> query) const;
    /// Zeroes every cell whose value of `node` differs from `value`.
    void condition(int node, int value);

    double sum() const;
    /// Scales to total mass 1; returns the prior mass (0 if empty).
    double normalize();

  private:
    std::vector<int> nodes_; // sorted ascending
    std::vector<int> cards_;
    std::vector<double> table_;
};

/// cell-to-cell map from a table over `from` onto a table over `to`
/// (`to` ⊆ `from`, both sorted): out[i] = index in the `to` table of cell i.
std::vector<std::int32_t> project_map(std::span<const int> from_nodes,
                                      std::span<const int> from_cards,
                                      std::span<const int> to_nodes);

/// Like project_map, but the target table is laid out row-major over
/// `query` in the exact (possibly unsorted) order given.
std::vector<std::int32_t> ordered_project_map(std::span<const int> from_nodes,
                                              std::span<const int> from_cards,
                                              std::span<const int> query);

/// Per-cell value of `node` in a table over `nodes` (sorted).
std::vector<std::int32_t> value_map(std::span<const int> nodes,
                                    std::span<const int> cards, int node);

} // namespace dbn
