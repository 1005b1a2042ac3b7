#include "dbn/discover.hpp"

#include <algorithm>
#include <cassert>
#include <limits>

#include "dbn/errors.hpp"
#include "dbn/scores.hpp"

namespace dbn {

namespace {

// Window wide enough for the structure's deepest lag.
int window_for(const TransitionStructure& s) {
    return std::max(2, s.max_lag() + 1);
}

// Rebuilds the prior list for a (possibly) new window, keeping slice 0 and
// filling later slices empirically from the data.
void reshape_prior(Dbn& model, const Dataset& data) {
    const int slices = model.window - 1;
    model.prior.resize(slices);
    for (int s = 0; s < slices; ++s) {
        model.prior[s].resize(model.num_vars());
        for (int v = 0; v < model.num_vars(); ++v)
            if (model.prior[s][v].empty())
                model.prior[s][v].assign(model.card(v),
                                         1.0 / model.card(v));
    }
    set_empirical_prior(model, data);
}

} // namespace

KtbnResult learn_ktbn(const Dbn& current, const Dataset& data,
                      const ClusterPartition& partition, int k,
                      const SearchConfig& config) {
    if (k < 2) throw DataError("learn_ktbn: k must be >= 2");
    SearchConfig cfg = config;
    cfg.max_lag = k - 1;

    auto aligned = align_dataset(current, data);
    auto source = make_stats_source(current, aligned, partition);
    const auto cards = current.cardinalities();

    KtbnResult result;
    result.search =
        greedy_family_search(current.structure, *source, cfg, cards);

    result.model = current;
    result.model.structure = result.search.structure;
    result.model.window = window_for(result.search.structure);
    reshape_prior(result.model, data);
    refit_parameters(result.model, *source, cfg.pseudocount);
    return result;
}

std::vector<NonMarkovArc> find_non_markov_arcs(const SearchResult& result) {
    std::vector<NonMarkovArc> arcs;
    for (int c = 0; c < result.structure.num_vars(); ++c)
        for (const auto& p : result.structure.parents[c]) {
            if (p.lag < 2) continue;
            NonMarkovArc arc;
            arc.source = p.variable;
            arc.lag = p.lag;
            arc.child = c;
            auto it = result.add_gains.find({c, p});
            arc.gain = it == result.add_gains.end() ? 0.0 : it->second;
            arcs.push_back(arc);
        }
    std::sort(arcs.begin(), arcs.end(),
              [](const NonMarkovArc& a, const NonMarkovArc& b) {
                  if (a.gain != b.gain) return a.gain > b.gain;
                  return std::tuple(a.child, a.source, a.lag) <
                         std::tuple(b.child, b.source, b.lag);
              });
    return arcs;
}

int memory_depth(const std::string& name) {
    int depth = 0;
    std::size_t pos = name.size();
    while (true) {
        const std::size_t at = name.rfind("@-", pos);
        if (at == std::string::npos) break;
        const std::string digits = name.substr(at + 2, pos - (at + 2));
        if (digits.empty() ||
            digits.find_first_not_of("0123456789") != std::string::npos)
            break;
        depth += std::stoi(digits);
        pos = at;
    }
    return depth;
}

namespace {

// Replaces one parent axis of a CPT (same cardinality), re-sorting the
// parent list and permuting the flat table to the new canonical layout.
Cpt replace_parent(const Cpt& old, ParentRef from, ParentRef to) {
    std::vector<ParentRef> new_parents = old.parents;
    auto it = std::find(new_parents.begin(), new_parents.end(), from);
    assert(it != new_parents.end());
    *it = to;
    // old axis index of each new parent
    std::vector<std::pair<ParentRef, int>> tagged;
    for (std::size_t i = 0; i < new_parents.size(); ++i)
        tagged.push_back({new_parents[i], static_cast<int>(i)});
    std::sort(tagged.begin(), tagged.end());

    Cpt out;
    out.child = old.child;
    out.child_card = old.child_card;
    for (const auto& [p, axis] : tagged) {
        out.parents.push_back(p);
        out.parent_cards.push_back(old.parent_cards[axis]);
    }
    out.table.resize(old.table.size());
    const std::size_t k = out.parents.size();
    std::vector<int> digits(k, 0);
    const std::size_t rows = out.num_rows();
    std::vector<int> old_digits(k, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < k; ++i)
            old_digits[tagged[i].second] = digits[i];
        std::size_t old_row = 0;
        for (std::size_t i = 0; i < k; ++i)
            old_row = old_row * old.parent_cards[i] + old_digits[i];
        for (int v = 0; v < out.child_card; ++v)
            out.at(r, v) = old.at(old_row, v);
        for (std::size_t i = k; i-- > 0;) {
            if (++digits[i] < out.parent_cards[i]) break;
            digits[i] = 0;
        }
    }
    return out;
}

// Drops one parent axis, averaging the table over its values.
Cpt drop_parent(const Cpt& old, ParentRef gone) {
    Cpt out;
    out.child = old.child;
    out.child_card = old.child_card;
    int axis = -1;
    for (std::size_t i = 0; i < old.parents.size(); ++i) {
        if (old.parents[i] == gone) {
            axis = static_cast<int>(i);
            continue;
        }
        out.parents.push_back(old.parents[i]);
        out.parent_cards.push_back(old.parent_cards[i]);
    }
    assert(axis >= 0);
    out.table.assign(out.expected_size(), 0.0);
    const std::size_t k = old.parents.size();
    std::vector<int> digits(k, 0);
    const std::size_t rows = old.num_rows();
    const double w = 1.0 / old.parent_cards[axis];
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t new_row = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (static_cast<int>(i) == axis) continue;
            new_row = new_row * old.parent_cards[i] + digits[i];
        }
        for (int v = 0; v < out.child_card; ++v)
            out.at(new_row, v) += w * old.at(r, v);
        for (std::size_t i = k; i-- > 0;) {
            if (++digits[i] < old.parent_cards[i]) break;
            digits[i] = 0;
        }
    }
    return out;
}

Cpt memory_cpd(int child, int card, int copy_source, int self, double epsilon,
               double rho) {
    std::vector<ParentRef> parents = {{copy_source, 1}, {self, 1}};
    std::sort(parents.begin(), parents.end());
    Cpt cpt = Cpt::uniform(child, card, parents, {card, card});
    const double base = epsilon * (1.0 - rho) / card;
    std::vector<int> vals(2); // in canonical parent order
    for (int a = 0; a < card; ++a)
        for (int b = 0; b < card; ++b) {
            vals[0] = a;
            vals[1] = b;
            const int y = parents[0].variable == copy_source ? a : b;
            const int p = parents[0].variable == copy_source ? b : a;
            const std::size_t row = cpt.row_index(vals);
            for (int h = 0; h < card; ++h)
                cpt.at(row, h) = (h == y ? 1.0 - epsilon : 0.0) +
                                 (h == p ? epsilon * rho : 0.0) + base;
        }
    return cpt;
}

} // namespace

Dbn introduce_memory_variables(const Dbn& dbn,
                               std::span<const NonMarkovArc> arcs,
                               double epsilon, double rho, int depth_cap) {
    if (dbn.structure.max_indegree < 2)
        throw DataError("introduce_memory_variables: max_indegree must "
                        "allow the two-parent memory families");
    Dbn out = dbn;

    // Required chain depth per source, deepest arc wins.
    std::map<int, int> need;
    for (const auto& arc : arcs) {
        if (arc.lag < 2)
            throw DataError("introduce_memory_variables: arc lag < 2");
        const int d = arc.lag - 1;
        if (memory_depth(dbn.variables[arc.source].name) + d > depth_cap)
            throw DataError(
                "introduce_memory_variables: memory chain for '" +
                dbn.variables[arc.source].name + "' would exceed depth cap " +
                std::to_string(depth_cap));
        auto [it, fresh] = need.emplace(arc.source, d);
        if (!fresh) it->second = std::max(it->second, d);
    }

    // Build or extend the chains. chain[(src, i)] is the id of src@-i.
    std::map<std::pair<int, int>, int> chain;
    for (const auto& [src, depth] : need) {
        int prev = src;
        for (int i = 1; i <= depth; ++i) {
            const std::string name =
                dbn.variables[src].name + "@-" + std::to_string(i);
            int id;
            if (auto existing = out.find_variable(name)) {
                id = *existing;
            } else {
                id = out.num_vars();
                out.variables.push_back(
                    {id, name, dbn.card(src), VarKind::Hidden});
                out.structure.parents.push_back({});
                out.structure.add_arc(id, {prev, 1});
                out.structure.add_arc(id, {id, 1}); // persistence
                out.cpts.push_back(
                    memory_cpd(id, dbn.card(src), prev, id, epsilon, rho));
                for (auto& slice : out.prior)
                    slice.push_back(std::vector<double>(
                        dbn.card(src), 1.0 / dbn.card(src)));
            }
            chain[{src, i}] = id;
            prev = id;
        }
    }

    // Rewire each offending arc onto the deepest needed memory variable.
    for (const auto& arc : arcs) {
        const ParentRef old_ref{arc.source, arc.lag};
        if (!out.structure.has_arc(arc.child, old_ref)) continue;
        const ParentRef new_ref{chain.at({arc.source, arc.lag - 1}), 1};
        out.structure.remove_arc(arc.child, old_ref);
        if (out.structure.has_arc(arc.child, new_ref)) {
            out.cpts[arc.child] = drop_parent(out.cpts[arc.child], old_ref);
        } else {
            out.structure.add_arc(arc.child, new_ref);
            out.cpts[arc.child] =
                replace_parent(out.cpts[arc.child], old_ref, new_ref);
        }
    }

    // Anything still deeper than lag 1 was not repaired; drop it so the
    // result is Markovian.
    for (int c = 0; c < out.num_vars(); ++c) {
        auto parents = out.structure.parents[c];
        for (const auto& p : parents)
            if (p.lag > 1) {
                out.structure.remove_arc(c, p);
                out.cpts[c] = drop_parent(out.cpts[c], p);
            }
    }

    out.window = 2;
    out.prior.resize(1);
    return out;
}

Dataset subsample_dataset(const Dataset& data, int factor) {
    if (factor < 1) throw DataError("subsample: factor must be >= 1");
    if (factor == 1) return data;
    Dataset out;
    out.names = data.names;
    out.cardinalities = data.cardinalities;
    for (const auto& seq : data.sequences) {
        std::vector<std::vector<int>> sub;
        for (std::size_t t = 0; t < seq.size(); t += factor)
            sub.push_back(seq[t]);
        if (sub.size() >= 2) out.sequences.push_back(std::move(sub));
    }
    return out;
}

namespace {

ClusterPartition partition_for(const ClusterPartition& base, const Dbn& model,
                               int num_observables) {
    ClusterPartition part = base;
    if (part.clusters.empty())
        part = ClusterPartition::singletons(num_observables);
    for (int v = num_observables; v < model.num_vars(); ++v)
        part.clusters.push_back({v});
    return part;
}

// Non-Markov arcs that fit under the depth cap; capped ones are reported
// but dropped by the repair step.
std::vector<NonMarkovArc> cap_filter(const std::vector<NonMarkovArc>& arcs,
                                     const Dbn& model, int depth_cap) {
    std::vector<NonMarkovArc> ok;
    for (const auto& a : arcs)
        if (memory_depth(model.variables[a.source].name) + (a.lag - 1) <=
            depth_cap)
            ok.push_back(a);
    return ok;
}

double best_train_loglik(const EmResult& em) {
    double best = -std::numeric_limits<double>::infinity();
    for (double ll : em.loglik_trace) best = std::max(best, ll);
    return best;
}

} // namespace

std::vector<DiscoveryRecord> discovery_pipeline(const Dataset& train,
                                                const Dataset& test,
                                                const DiscoveryConfig& config) {
    std::vector<DiscoveryRecord> records;
    const int num_obs = train.num_cols();

    // Markovian observable-only baseline.
    Dbn base = make_empty_model(train, config.search.max_indegree);
    set_empirical_prior(base, train);
    auto aligned = align_dataset(base, train);
    const auto obs_partition = partition_for(config.base_partition, base,
                                             num_obs);
    SearchConfig markov_cfg = config.search;
    markov_cfg.max_lag = 1;

    auto base_source = make_stats_source(base, aligned, obs_partition);
    SearchResult base_search = greedy_family_search(
        base.structure, *base_source, markov_cfg, base.cardinalities());
    Dbn baseline = base;
    baseline.structure = base_search.structure;
    refit_parameters(baseline, *base_source, config.pseudocount);
    {
        DiscoveryRecord rec;
        rec.label = "fully observable only";
        rec.model = baseline;
        rec.test_bits =
            holdout_bits_per_slice(baseline, test, obs_partition);
        if (auto* f = dynamic_cast<FactoredEssSource*>(base_source.get()))
            rec.train_loglik = f->loglik();
        else {
            rec.train_loglik = 0.0;
            for (const auto& seq : aligned)
                rec.train_loglik += joint_log_prob(baseline, seq);
        }
        records.push_back(std::move(rec));
    }

    // Iteration 0: widen the window over the observables and look for
    // Markov violations.
    KtbnResult ktbn = learn_ktbn(baseline, train, obs_partition,
                                 config.search.max_lag + 1, config.search);
    auto arcs = find_non_markov_arcs(ktbn.search);
    auto usable = cap_filter(arcs, ktbn.model, config.depth_cap);
    if (usable.empty()) return records;

    Dbn augmented = introduce_memory_variables(ktbn.model, usable,
                                               config.epsilon, config.rho,
                                               config.depth_cap);
    ClusterPartition part = partition_for(config.base_partition, augmented,
                                          num_obs);
    EmResult em = parametric_em(augmented, train, part, config.em);
    {
        DiscoveryRecord rec;
        rec.label = "iteration 0";
        rec.model = em.model;
        rec.arcs_found = arcs;
        for (const auto& v : em.model.variables)
            rec.num_hidden += v.kind == VarKind::Hidden;
        rec.train_loglik = best_train_loglik(em);
        rec.test_bits = holdout_bits_per_slice(em.model, test, part);
        records.push_back(std::move(rec));
    }
    Dbn current = em.model;

    // Structural iterations under the augmented model: expected statistics
    // from the two-slice model, k-window search, further repairs.
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        auto cur_aligned = align_dataset(current, train);
        auto source = make_stats_source(current, cur_aligned, part);
        const auto cards = current.cardinalities();
        const double cur_score =
            structure_score(current.structure, *source, config.search, cards);
        SearchResult res = greedy_family_search(current.structure, *source,
                                                config.search, cards);
        auto new_arcs = find_non_markov_arcs(res);
        auto new_usable = cap_filter(new_arcs, current, config.depth_cap);
        const double gain = res.total_score - cur_score;
        if (new_usable.empty() && gain <= config.sem_tolerance) break;

        Dbn next = current;
        next.structure = res.structure;
        next.window = std::max(2, res.structure.max_lag() + 1);
        reshape_prior(next, train);
        refit_parameters(next, *source, config.pseudocount,
                         &current.structure);
        if (!new_usable.empty())
            next = introduce_memory_variables(next, new_usable,
                                              config.epsilon, config.rho,
                                              config.depth_cap);
        else if (next.window > 2)
            next = introduce_memory_variables(next, {}, config.epsilon,
                                              config.rho, config.depth_cap);

        part = partition_for(config.base_partition, next, num_obs);
        EmResult iter_em = parametric_em(next, train, part, config.em);
        DiscoveryRecord rec;
        rec.label = "iteration " + std::to_string(iter);
        rec.model = iter_em.model;
        rec.arcs_found = new_arcs;
        for (const auto& v : iter_em.model.variables)
            rec.num_hidden += v.kind == VarKind::Hidden;
        rec.train_loglik = best_train_loglik(iter_em);
        rec.test_bits = holdout_bits_per_slice(iter_em.model, test, part);
        records.push_back(rec);
        current = std::move(iter_em.model);
    }
    return records;
}

} // namespace dbn
