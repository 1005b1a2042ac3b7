#include "dbn/inference.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

// CPT as a potential over sorted family nodes: iterate the potential's
// cells and pull the matching CPT entry.
Potential cpt_potential(const Dbn& dbn, int child, const SliceNodes& sn) {
    const Cpt& cpt = dbn.cpts[child];
    std::vector<int> nodes = {sn.at_t1(child)};
    for (const auto& p : cpt.parents)
        nodes.push_back(p.lag == 0 ? sn.at_t1(p.variable)
                                   : sn.at_t(p.variable));
    std::vector<int> order = nodes; // [child, parents...] in CPT order
    std::sort(nodes.begin(), nodes.end());
    std::vector<int> cards;
    for (int node : nodes)
        cards.push_back(dbn.card(sn.var_of(node)));

    Potential pot(nodes, cards, 0.0);
    // Map each potential cell to the CPT flat index: child value fastest,
    // then parents row-major in stored order.
    std::vector<int> cpt_order(order.begin() + 1, order.end());
    cpt_order.push_back(order[0]);
    const auto map = ordered_project_map(pot.nodes(), pot.cards(), cpt_order);
    for (std::size_t cell = 0; cell < pot.size(); ++cell)
        pot.table()[cell] = cpt.table[map[cell]];
    return pot;
}

} // namespace

struct SliceTreeEngine::Scratch {
    std::vector<std::vector<double>> work;    // per clique
    std::vector<std::vector<double>> msg;     // 2 per edge (a->b, b->a)
    std::vector<std::vector<double>> beliefs; // per clique, on demand
    std::vector<char> belief_done;
    std::vector<double> tmp;
};

SliceTreeEngine::SliceTreeEngine(const Dbn& dbn,
                                 const ClusterPartition& partition)
    : partition_(partition) {
    tpl_ = std::make_shared<const CliqueTreeTemplate>(
        build_clique_tree(dbn, partition));
    const CliqueTreeTemplate& tpl = *tpl_;
    const SliceNodes& sn = tpl.slices;
    const int K = static_cast<int>(tpl.cliques.size());

    base_.reserve(K);
    for (int c = 0; c < K; ++c)
        base_.emplace_back(tpl.cliques[c], tpl.clique_cards(c), 1.0);
    for (int child = 0; child < dbn.num_vars(); ++child)
        base_[tpl.family_clique[child]].multiply(cpt_potential(dbn, child, sn));

    auto make_side = [&](int k, bool t1_side) {
        ClusterSide side;
        side.clique =
            t1_side ? tpl.cluster_t1_clique[k] : tpl.cluster_t_clique[k];
        std::vector<int> nodes;
        std::size_t size = 1;
        for (int v : partition_.clusters[k]) {
            nodes.push_back(t1_side ? sn.at_t1(v) : sn.at_t(v));
            size *= static_cast<std::size_t>(dbn.card(v));
        }
        side.size = size;
        side.map = project_map(tpl.cliques[side.clique],
                               base_[side.clique].cards(), nodes);
        return side;
    };
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        side_t_.push_back(make_side(k, false));
        side_t1_.push_back(make_side(k, true));
    }

    evidence_entries_.resize(dbn.num_vars());
    for (int v = 0; v < dbn.num_vars(); ++v) {
        const int node = sn.at_t1(v);
        for (int c = 0; c < K; ++c) {
            if (!std::binary_search(tpl.cliques[c].begin(),
                                    tpl.cliques[c].end(), node))
                continue;
            EvEntry entry;
            entry.clique = c;
            entry.vals = value_map(tpl.cliques[c], base_[c].cards(), node);
            evidence_entries_[v].push_back(std::move(entry));
        }
    }

    edge_maps_.resize(tpl.edges.size());
    for (std::size_t e = 0; e < tpl.edges.size(); ++e) {
        const auto& edge = tpl.edges[e];
        edge_maps_[e].from_a = project_map(
            tpl.cliques[edge.a], base_[edge.a].cards(), edge.sepset);
        edge_maps_[e].from_b = project_map(
            tpl.cliques[edge.b], base_[edge.b].cards(), edge.sepset);
        std::size_t size = 1;
        for (int node : edge.sepset)
            size *= static_cast<std::size_t>(tpl.node_cards[node]);
        edge_maps_[e].sep_size = size;
    }

    prior_cluster_.resize(partition_.num_clusters());
    cluster_value_maps_.resize(partition_.num_clusters());
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const auto& z = partition_.clusters[k];
        std::vector<int> cards;
        for (int v : z) cards.push_back(dbn.card(v));
        std::size_t size = 1;
        for (int c : cards) size *= static_cast<std::size_t>(c);
        auto& tab = prior_cluster_[k];
        tab.assign(size, 1.0);
        // Outer product of the slice-0 prior marginals.
        std::vector<int> nodes(z.begin(), z.end());
        for (std::size_t i = 0; i < z.size(); ++i) {
            const int one[1] = {nodes[i]};
            const auto vm = ordered_project_map(nodes, cards, one);
            for (std::size_t cell = 0; cell < size; ++cell)
                tab[cell] *= dbn.prior[0][z[i]][vm[cell]];
            cluster_value_maps_[k].push_back(
                value_map(nodes, cards, nodes[i]));
        }
    }
}

void SliceTreeEngine::prepare_work(Scratch& s) const {
    const int K = static_cast<int>(base_.size());
    s.work.resize(K);
    for (int c = 0; c < K; ++c) s.work[c] = base_[c].table();
    s.msg.resize(2 * tpl_->edges.size());
    s.beliefs.resize(K);
    s.belief_done.assign(K, 0);
}

void SliceTreeEngine::apply_evidence(Scratch& s,
                                     std::span<const int> evidence) const {
    for (std::size_t v = 0; v < evidence_entries_.size(); ++v) {
        const int obs = evidence[v];
        if (obs == kMissing) continue;
        for (const auto& entry : evidence_entries_[v]) {
            auto& w = s.work[entry.clique];
            for (std::size_t cell = 0; cell < w.size(); ++cell)
                if (entry.vals[cell] != obs) w[cell] = 0.0;
        }
    }
}

// Shafer-Shenoy two-pass propagation. No division, so deterministic CPDs
// with exact zeros are safe. Returns the total mass (the root belief sum).
double SliceTreeEngine::calibrate(Scratch& s) const {
    const CliqueTreeTemplate& tpl = *tpl_;
    for (const auto& [e, a_to_b] : tpl.schedule) {
        const auto& edge = tpl.edges[e];
        const int from = a_to_b ? edge.a : edge.b;
        const auto& from_map =
            a_to_b ? edge_maps_[e].from_a : edge_maps_[e].from_b;
        s.tmp = s.work[from];
        for (const auto& [f, nb] : tpl.adjacency[from]) {
            if (f == e) continue;
            const bool incoming_a_to_b = tpl.edges[f].b == from;
            const auto& in = s.msg[2 * f + (incoming_a_to_b ? 0 : 1)];
            if (in.empty()) continue; // not yet computed: not needed upward
            const auto& map = tpl.edges[f].a == from ? edge_maps_[f].from_a
                                                     : edge_maps_[f].from_b;
            for (std::size_t cell = 0; cell < s.tmp.size(); ++cell)
                s.tmp[cell] *= in[map[cell]];
        }
        auto& out = s.msg[2 * e + (a_to_b ? 0 : 1)];
        out.assign(edge_maps_[e].sep_size, 0.0);
        for (std::size_t cell = 0; cell < s.tmp.size(); ++cell)
            out[from_map[cell]] += s.tmp[cell];
    }
    const auto& root_belief = belief(s, tpl.root);
    double z = 0.0;
    for (double x : root_belief) z += x;
    return z;
}

const std::vector<double>& SliceTreeEngine::belief(Scratch& s,
                                                   int clique) const {
    if (!s.belief_done[clique]) {
        s.beliefs[clique] = s.work[clique];
        auto& b = s.beliefs[clique];
        for (const auto& [e, nb] : tpl_->adjacency[clique]) {
            const bool incoming_a_to_b = tpl_->edges[e].b == clique;
            const auto& in = s.msg[2 * e + (incoming_a_to_b ? 0 : 1)];
            const auto& map = tpl_->edges[e].a == clique
                                  ? edge_maps_[e].from_a
                                  : edge_maps_[e].from_b;
            for (std::size_t cell = 0; cell < b.size(); ++cell)
                b[cell] *= in[map[cell]];
        }
        s.belief_done[clique] = 1;
    }
    return s.beliefs[clique];
}

FactoredMessage SliceTreeEngine::initial_alpha(
    std::span<const int> evidence0) const {
    FactoredMessage msg;
    msg.clusters.resize(partition_.num_clusters());
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        auto tab = prior_cluster_[k];
        const auto& z = partition_.clusters[k];
        for (std::size_t i = 0; i < z.size(); ++i) {
            const int obs = evidence0[z[i]];
            if (obs == kMissing) continue;
            const auto& vm = cluster_value_maps_[k][i];
            for (std::size_t cell = 0; cell < tab.size(); ++cell)
                if (vm[cell] != obs) tab[cell] = 0.0;
        }
        double mass = 0.0;
        for (double x : tab) mass += x;
        if (mass <= 0.0)
            throw ZeroMassEvidence(0, "evidence at slice 0 has zero mass");
        for (double& x : tab) x /= mass;
        msg.log_scale += std::log(mass);
        msg.clusters[k] = std::move(tab);
    }
    return msg;
}

FactoredMessage SliceTreeEngine::uniform_message() const {
    FactoredMessage msg;
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const std::size_t size = side_t_[k].size;
        msg.clusters.push_back(
            std::vector<double>(size, 1.0 / static_cast<double>(size)));
    }
    return msg;
}

FactoredMessage SliceTreeEngine::forward_step(const FactoredMessage& alpha,
                                              std::span<const int> evidence_t1,
                                              int slice_t1) const {
    Scratch s;
    prepare_work(s);
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const auto& side = side_t_[k];
        auto& w = s.work[side.clique];
        const auto& tab = alpha.clusters[k];
        for (std::size_t cell = 0; cell < w.size(); ++cell)
            w[cell] *= tab[side.map[cell]];
    }
    apply_evidence(s, evidence_t1);
    const double z = calibrate(s);
    if (!(z > 0.0))
        throw ZeroMassEvidence(slice_t1, "evidence at slice " +
                                             std::to_string(slice_t1) +
                                             " has zero mass");

    FactoredMessage next;
    next.log_scale = alpha.log_scale + std::log(z);
    next.clusters.resize(partition_.num_clusters());
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const auto& side = side_t1_[k];
        const auto& b = belief(s, side.clique);
        auto& tab = next.clusters[k];
        tab.assign(side.size, 0.0);
        for (std::size_t cell = 0; cell < b.size(); ++cell)
            tab[side.map[cell]] += b[cell];
        double mass = 0.0;
        for (double x : tab) mass += x;
        for (double& x : tab) x /= mass;
    }
    return next;
}

FactoredMessage SliceTreeEngine::backward_step(const FactoredMessage& beta_t1,
                                               std::span<const int> evidence_t1,
                                               int slice_t1) const {
    Scratch s;
    prepare_work(s);
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const auto& side = side_t1_[k];
        auto& w = s.work[side.clique];
        const auto& tab = beta_t1.clusters[k];
        for (std::size_t cell = 0; cell < w.size(); ++cell)
            w[cell] *= tab[side.map[cell]];
    }
    apply_evidence(s, evidence_t1);
    const double z = calibrate(s);
    if (!(z > 0.0))
        throw ZeroMassEvidence(slice_t1, "evidence at slice " +
                                             std::to_string(slice_t1) +
                                             " has zero mass (backward)");

    FactoredMessage prev;
    prev.log_scale = beta_t1.log_scale + std::log(z);
    prev.clusters.resize(partition_.num_clusters());
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const auto& side = side_t_[k];
        const auto& b = belief(s, side.clique);
        auto& tab = prev.clusters[k];
        tab.assign(side.size, 0.0);
        for (std::size_t cell = 0; cell < b.size(); ++cell)
            tab[side.map[cell]] += b[cell];
        double mass = 0.0;
        for (double x : tab) mass += x;
        for (double& x : tab) x /= mass;
    }
    return prev;
}

void SliceTreeEngine::posterior_tree(const FactoredMessage& alpha_t,
                                     const FactoredMessage& beta_t1,
                                     std::span<const int> evidence_t1,
                                     int slice_t1,
                                     CalibratedSliceTree* out) const {
    Scratch s;
    prepare_work(s);
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const auto& side = side_t_[k];
        auto& w = s.work[side.clique];
        const auto& tab = alpha_t.clusters[k];
        for (std::size_t cell = 0; cell < w.size(); ++cell)
            w[cell] *= tab[side.map[cell]];
    }
    for (int k = 0; k < partition_.num_clusters(); ++k) {
        const auto& side = side_t1_[k];
        auto& w = s.work[side.clique];
        const auto& tab = beta_t1.clusters[k];
        for (std::size_t cell = 0; cell < w.size(); ++cell)
            w[cell] *= tab[side.map[cell]];
    }
    apply_evidence(s, evidence_t1);
    const double z = calibrate(s);
    if (!(z > 0.0))
        throw ZeroMassEvidence(slice_t1, "evidence at slice " +
                                             std::to_string(slice_t1) +
                                             " has zero mass (posterior)");

    const CliqueTreeTemplate& tpl = *tpl_;
    const int K = static_cast<int>(tpl.cliques.size());
    if (out->tpl.get() != tpl_.get()) {
        out->tpl = tpl_;
        out->beliefs.clear();
        out->sepset_marginals.clear();
        for (int c = 0; c < K; ++c)
            out->beliefs.emplace_back(tpl.cliques[c], tpl.clique_cards(c),
                                      0.0);
        for (const auto& edge : tpl.edges) {
            std::vector<int> cards;
            for (int node : edge.sepset) cards.push_back(tpl.node_cards[node]);
            out->sepset_marginals.emplace_back(edge.sepset, std::move(cards),
                                               0.0);
        }
    }
    for (int c = 0; c < K; ++c) {
        const auto& b = belief(s, c);
        auto& tab = out->beliefs[c].table();
        for (std::size_t cell = 0; cell < b.size(); ++cell)
            tab[cell] = b[cell] / z;
    }
    for (std::size_t e = 0; e < tpl.edges.size(); ++e) {
        auto& sep = out->sepset_marginals[e].table();
        std::fill(sep.begin(), sep.end(), 0.0);
        const auto& b = out->beliefs[tpl.edges[e].a].table();
        const auto& map = edge_maps_[e].from_a;
        for (std::size_t cell = 0; cell < b.size(); ++cell)
            sep[map[cell]] += b[cell];
    }
    out->calibrated = true;
}

std::pair<double, double> SliceTreeEngine::smooth(
    const std::vector<std::vector<int>>& sequence,
    const std::function<void(int, const CalibratedSliceTree&)>& visit) const {
    const int len = static_cast<int>(sequence.size());
    if (len < 2) throw DataError("smooth: sequence shorter than 2 slices");

    std::vector<FactoredMessage> alphas;
    alphas.reserve(len);
    alphas.push_back(initial_alpha(sequence[0]));
    for (int t = 1; t < len; ++t)
        alphas.push_back(forward_step(alphas[t - 1], sequence[t], t));
    const double loglik = alphas[len - 1].log_scale;
    const double slice0 = alphas[0].log_scale;

    FactoredMessage beta = uniform_message();
    CalibratedSliceTree tree;
    for (int t = len - 2; t >= 0; --t) {
        posterior_tree(alphas[t], beta, sequence[t + 1], t + 1, &tree);
        tree.log_mass = alphas[t + 1].log_scale - alphas[t].log_scale;
        visit(t, tree);
        if (t > 0) beta = backward_step(beta, sequence[t + 1], t + 1);
    }
    return {loglik, slice0};
}

SmoothResult calibrate_slice_trees(const Dbn& dbn,
                                   const std::vector<std::vector<int>>& seq,
                                   const ClusterPartition& partition) {
    SliceTreeEngine engine(dbn, partition);
    SmoothResult result;
    result.trees.resize(seq.size() - 1);
    auto [loglik, slice0] = engine.smooth(
        seq, [&](int t, const CalibratedSliceTree& tree) {
            result.trees[t] = tree; // deep copy; fine for test-scale use
        });
    result.loglik = loglik;
    result.slice0_loglik = slice0;
    return result;
}

} // namespace dbn
