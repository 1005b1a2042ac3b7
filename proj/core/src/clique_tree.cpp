#include "dbn/clique_tree.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

#include "dbn/errors.hpp"

namespace dbn {

ClusterPartition ClusterPartition::singletons(int num_vars) {
    ClusterPartition p;
    p.clusters.reserve(num_vars);
    for (int v = 0; v < num_vars; ++v) p.clusters.push_back({v});
    return p;
}

ClusterPartition ClusterPartition::single(int num_vars) {
    ClusterPartition p;
    std::vector<int> all(num_vars);
    std::iota(all.begin(), all.end(), 0);
    p.clusters.push_back(std::move(all));
    return p;
}

void ClusterPartition::validate(int num_vars) const {
    std::vector<int> hits(num_vars, 0);
    for (const auto& z : clusters) {
        if (z.empty()) throw DataError("partition: empty cluster");
        if (!std::is_sorted(z.begin(), z.end()))
            throw DataError("partition: cluster not sorted");
        for (int v : z) {
            if (v < 0 || v >= num_vars)
                throw DataError("partition: variable id out of range");
            if (hits[v]++)
                throw DataError("partition: clusters not disjoint");
        }
    }
    for (int v = 0; v < num_vars; ++v)
        if (!hits[v])
            throw DataError("partition: variable " + std::to_string(v) +
                            " not covered");
}

std::vector<int> CliqueTreeTemplate::clique_cards(int c) const {
    std::vector<int> cards;
    cards.reserve(cliques[c].size());
    for (int node : cliques[c]) cards.push_back(node_cards[node]);
    return cards;
}

int CliqueTreeTemplate::smallest_containing(std::span<const int> nodes) const {
    int best = -1;
    std::size_t best_size = 0;
    for (std::size_t c = 0; c < cliques.size(); ++c) {
        if (!std::includes(cliques[c].begin(), cliques[c].end(), nodes.begin(),
                           nodes.end()))
            continue;
        if (best < 0 || cliques[c].size() < best_size) {
            best = static_cast<int>(c);
            best_size = cliques[c].size();
        }
    }
    return best;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

void connect_all(std::vector<std::vector<char>>& adj,
                 const std::vector<int>& nodes) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            adj[nodes[i]][nodes[j]] = 1;
            adj[nodes[j]][nodes[i]] = 1;
        }
}

int node_of(const SliceNodes& s, ParentRef p) {
    return p.lag == 0 ? s.at_t1(p.variable) : s.at_t(p.variable);
}

} // namespace

CliqueTreeTemplate build_clique_tree(const Dbn& dbn,
                                     const ClusterPartition& partition) {
    if (dbn.window != 2 || dbn.structure.max_lag() > 1)
        throw DataError("build_clique_tree: model must be Markovian (window 2)");
    partition.validate(dbn.num_vars());

    CliqueTreeTemplate tpl;
    tpl.slices.num_vars = dbn.num_vars();
    const SliceNodes& sn = tpl.slices;
    const int total = sn.total();
    tpl.node_cards.resize(total);
    for (int v = 0; v < dbn.num_vars(); ++v) {
        tpl.node_cards[sn.at_t(v)] = dbn.card(v);
        tpl.node_cards[sn.at_t1(v)] = dbn.card(v);
    }

    // Moral graph: each family complete, plus completeness of every cluster
    // on both slices so messages can be absorbed and re-projected.
    std::vector<std::vector<char>> adj(total, std::vector<char>(total, 0));
    for (int c = 0; c < dbn.num_vars(); ++c) {
        std::vector<int> family = {sn.at_t1(c)};
        for (const auto& p : dbn.structure.parents[c])
            family.push_back(node_of(sn, p));
        connect_all(adj, family);
    }
    for (const auto& z : partition.clusters) {
        std::vector<int> zt, zt1;
        for (int v : z) {
            zt.push_back(sn.at_t(v));
            zt1.push_back(sn.at_t1(v));
        }
        connect_all(adj, zt);
        connect_all(adj, zt1);
    }

    // Min-fill elimination with lexicographic tie-breaking.
    std::vector<char> alive(total, 1);
    std::vector<std::vector<int>> elim_cliques;
    for (int step = 0; step < total; ++step) {
        int best = -1;
        long best_fill = -1;
        for (int u = 0; u < total; ++u) {
            if (!alive[u]) continue;
            std::vector<int> nb;
            for (int v = 0; v < total; ++v)
                if (alive[v] && adj[u][v]) nb.push_back(v);
            long fill = 0;
            for (std::size_t i = 0; i < nb.size(); ++i)
                for (std::size_t j = i + 1; j < nb.size(); ++j)
                    fill += !adj[nb[i]][nb[j]];
            if (best < 0 || fill < best_fill) {
                best = u;
                best_fill = fill;
            }
        }
        std::vector<int> clique = {best};
        for (int v = 0; v < total; ++v)
            if (alive[v] && adj[best][v]) clique.push_back(v);
        std::sort(clique.begin(), clique.end());
        connect_all(adj, clique);
        alive[best] = 0;
        elim_cliques.push_back(std::move(clique));
    }

    // Keep maximal cliques only.
    for (const auto& c : elim_cliques) {
        bool subsumed = false;
        for (const auto& d : tpl.cliques)
            if (std::includes(d.begin(), d.end(), c.begin(), c.end())) {
                subsumed = true;
                break;
            }
        if (subsumed) continue;
        // A later elimination clique can also subsume an earlier one.
        std::erase_if(tpl.cliques, [&](const std::vector<int>& d) {
            return std::includes(c.begin(), c.end(), d.begin(), d.end());
        });
        tpl.cliques.push_back(c);
    }
    std::sort(tpl.cliques.begin(), tpl.cliques.end());
    const int K = static_cast<int>(tpl.cliques.size());

    // Maximum-sepset spanning tree (Kruskal, deterministic order). Zero
    // weights are kept so disconnected components still join into one tree.
    struct Cand {
        int w, i, j;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j) {
            std::vector<int> inter;
            std::set_intersection(tpl.cliques[i].begin(), tpl.cliques[i].end(),
                                  tpl.cliques[j].begin(), tpl.cliques[j].end(),
                                  std::back_inserter(inter));
            cands.push_back({static_cast<int>(inter.size()), i, j});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.w != b.w) return a.w > b.w;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    UnionFind uf(K);
    tpl.adjacency.resize(K);
    for (const auto& c : cands) {
        if (static_cast<int>(tpl.edges.size()) == K - 1) break;
        if (!uf.unite(c.i, c.j)) continue;
        CliqueTreeTemplate::Edge e;
        e.a = c.i;
        e.b = c.j;
        std::set_intersection(tpl.cliques[c.i].begin(), tpl.cliques[c.i].end(),
                              tpl.cliques[c.j].begin(), tpl.cliques[c.j].end(),
                              std::back_inserter(e.sepset));
        const int idx = static_cast<int>(tpl.edges.size());
        tpl.adjacency[c.i].push_back({idx, c.j});
        tpl.adjacency[c.j].push_back({idx, c.i});
        tpl.edges.push_back(std::move(e));
    }

    // Message schedule: DFS from the root; upward messages in post-order,
    // then the reverse downward.
    tpl.root = 0;
    std::vector<std::pair<int, bool>> upward;
    std::vector<int> stack = {tpl.root};
    std::vector<int> parent_edge(K, -1), parent_clique(K, -1), order;
    std::vector<char> seen(K, 0);
    seen[tpl.root] = 1;
    while (!stack.empty()) {
        int c = stack.back();
        stack.pop_back();
        order.push_back(c);
        for (const auto& [e, nb] : tpl.adjacency[c]) {
            if (seen[nb]) continue;
            seen[nb] = 1;
            parent_edge[nb] = e;
            parent_clique[nb] = c;
            stack.push_back(nb);
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int c = *it;
        if (parent_edge[c] < 0) continue;
        bool a_to_b = tpl.edges[parent_edge[c]].a == c;
        upward.push_back({parent_edge[c], a_to_b});
    }
    tpl.schedule = upward;
    for (auto it = upward.rbegin(); it != upward.rend(); ++it)
        tpl.schedule.push_back({it->first, !it->second});

    // Factor homes.
    tpl.family_clique.resize(dbn.num_vars());
    for (int c = 0; c < dbn.num_vars(); ++c) {
        std::vector<int> family = {sn.at_t1(c)};
        for (const auto& p : dbn.structure.parents[c])
            family.push_back(node_of(sn, p));
        std::sort(family.begin(), family.end());
        tpl.family_clique[c] = tpl.smallest_containing(family);
        assert(tpl.family_clique[c] >= 0);
    }
    tpl.cluster_t_clique.resize(partition.num_clusters());
    tpl.cluster_t1_clique.resize(partition.num_clusters());
    for (int k = 0; k < partition.num_clusters(); ++k) {
        std::vector<int> zt, zt1;
        for (int v : partition.clusters[k]) {
            zt.push_back(sn.at_t(v));
            zt1.push_back(sn.at_t1(v));
        }
        tpl.cluster_t_clique[k] = tpl.smallest_containing(zt);
        tpl.cluster_t1_clique[k] = tpl.smallest_containing(zt1);
        assert(tpl.cluster_t_clique[k] >= 0 && tpl.cluster_t1_clique[k] >= 0);
    }
    return tpl;
}

std::vector<double> CalibratedSliceTree::marginal_query(
    std::span<const int> nodes) const {
    std::vector<int> sorted(nodes.begin(), nodes.end());
    std::sort(sorted.begin(), sorted.end());
    const int c = tpl->smallest_containing(sorted);
    if (c < 0)
        throw NotInAnyClique("marginal_query: no clique contains the " +
                             std::to_string(nodes.size()) +
                             " requested nodes");
    std::vector<double> out = beliefs[c].marginal_in_order(nodes);
    double total = 0.0;
    for (double x : out) total += x;
    if (total > 0.0)
        for (double& x : out) x /= total;
    return out;
}

} // namespace dbn
