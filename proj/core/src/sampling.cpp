#include "dbn/sampling.hpp"

#include <algorithm>

#include "dbn/errors.hpp"
#include "dbn/rng.hpp"

namespace dbn {

namespace {

// Topological order of the lag-0 subgraph; children after their same-slice
// parents. Deterministic: smallest ready id first.
std::vector<int> lag0_topo_order(const TransitionStructure& s) {
    const int n = s.num_vars();
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> out(n);
    for (int c = 0; c < n; ++c)
        for (const auto& p : s.parents[c])
            if (p.lag == 0) {
                out[p.variable].push_back(c);
                ++indeg[c];
            }
    std::vector<int> ready, order;
    for (int v = 0; v < n; ++v)
        if (indeg[v] == 0) ready.push_back(v);
    while (!ready.empty()) {
        std::pop_heap(ready.begin(), ready.end(), std::greater<>());
        int v = ready.back();
        ready.pop_back();
        order.push_back(v);
        for (int w : out[v])
            if (--indeg[w] == 0) {
                ready.push_back(w);
                std::push_heap(ready.begin(), ready.end(), std::greater<>());
            }
    }
    if (static_cast<int>(order.size()) != n)
        throw DataError("sample_trajectories: lag-0 subgraph has a cycle");
    std::make_heap(ready.begin(), ready.end(), std::greater<>());
    return order;
}

} // namespace

Dataset sample_trajectories(const Dbn& dbn, int num_sequences, int length,
                            std::uint64_t seed, bool include_hidden) {
    if (length < dbn.window)
        throw DataError("sample_trajectories: length shorter than window");
    const int n = dbn.num_vars();
    const std::vector<int> order = lag0_topo_order(dbn.structure);

    Rng rng(seed);
    std::vector<std::vector<std::vector<int>>> raw;
    raw.reserve(num_sequences);
    std::vector<int> pvals;
    for (int s = 0; s < num_sequences; ++s) {
        std::vector<std::vector<int>> seq(length, std::vector<int>(n, 0));
        for (int t = 0; t < dbn.window - 1; ++t)
            for (int v = 0; v < n; ++v)
                seq[t][v] = rng.categorical(dbn.prior[t][v]);
        for (int t = dbn.window - 1; t < length; ++t) {
            for (int v : order) {
                const Cpt& cpt = dbn.cpts[v];
                pvals.resize(cpt.parents.size());
                for (std::size_t i = 0; i < cpt.parents.size(); ++i)
                    pvals[i] =
                        seq[t - cpt.parents[i].lag][cpt.parents[i].variable];
                const std::size_t row = cpt.row_index(pvals);
                seq[t][v] = rng.categorical(
                    {cpt.table.data() + row * cpt.child_card,
                     static_cast<std::size_t>(cpt.child_card)});
            }
        }
        raw.push_back(std::move(seq));
    }

    Dataset out;
    std::vector<int> keep;
    for (int v = 0; v < n; ++v)
        if (include_hidden || !dbn.is_hidden(v)) keep.push_back(v);
    for (int v : keep) {
        out.names.push_back(dbn.variables[v].name);
        out.cardinalities.push_back(dbn.card(v));
    }
    for (auto& seq : raw) {
        std::vector<std::vector<int>> proj(seq.size());
        for (std::size_t t = 0; t < seq.size(); ++t) {
            proj[t].reserve(keep.size());
            for (int v : keep) proj[t].push_back(seq[t][v]);
        }
        out.sequences.push_back(std::move(proj));
    }
    return out;
}

} // namespace dbn
