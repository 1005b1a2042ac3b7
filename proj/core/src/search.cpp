#include "dbn/search.hpp"

#include <algorithm>
#include <cassert>

#include "dbn/scores.hpp"

namespace dbn {

namespace {

Event event_for(std::vector<ParentRef> parents, int child) {
    std::sort(parents.begin(), parents.end());
    Event e;
    e.terms = std::move(parents);
    e.terms.push_back({child, 0});
    return e;
}

double score_table(const EssTable& tab, StatsSource& stats,
                   const SearchConfig& cfg) {
    return cfg.score == ScoreKind::Bic
               ? bic_family_score(tab, stats.total_transitions())
               : bde_family_score(tab, cfg.bde_ess);
}

double family_score(std::vector<ParentRef> parents, int child,
                    StatsSource& stats, const SearchConfig& cfg) {
    const EssTable tab = stats.collect_one(event_for(std::move(parents), child));
    return score_table(tab, stats, cfg);
}

// All (variable, lag) pairs a child may legally gain, before the
// acyclicity and indegree move filters.
std::vector<ParentRef> candidate_refs(int child, int num_vars,
                                      const SearchConfig& cfg) {
    std::vector<ParentRef> refs;
    for (int lag = cfg.allow_intra_slice ? 0 : 1; lag <= cfg.max_lag; ++lag)
        for (int v = 0; v < num_vars; ++v) {
            if (lag == 0 && v == child) continue;
            refs.push_back({v, lag});
        }
    return refs;
}

} // namespace

std::vector<ParentRef> potential_parents(int child,
                                         const TransitionStructure& current,
                                         StatsSource& stats,
                                         const SearchConfig& config,
                                         std::span<const int> cards) {
    const auto& parents = current.parents[child];
    std::vector<ParentRef> cands;
    for (const auto& p : candidate_refs(child, current.num_vars(), config))
        if (!current.has_arc(child, p)) cands.push_back(p);

    std::vector<Event> events;
    events.reserve(cands.size() + 1);
    events.push_back(event_for(parents, child));
    for (const auto& p : cands) {
        auto with = parents;
        with.push_back(p);
        events.push_back(event_for(std::move(with), child));
    }
    auto tables = stats.collect(events);

    // Ranking always uses BIC: a plain penalized likelihood gain.
    const double base = bic_family_score(tables[0], stats.total_transitions());
    std::vector<std::pair<double, ParentRef>> ranked;
    ranked.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
        ranked.push_back(
            {bic_family_score(tables[i + 1], stats.total_transitions()) - base,
             cands[i]});
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second < b.second;
              });

    std::vector<ParentRef> pot;
    const int limit = std::min<int>(config.candidates_per_child,
                                    static_cast<int>(ranked.size()));
    for (int i = 0; i < limit; ++i) pot.push_back(ranked[i].second);
    for (const auto& p : parents) pot.push_back(p);
    std::sort(pot.begin(), pot.end());
    pot.erase(std::unique(pot.begin(), pot.end()), pot.end());
    (void)cards;
    return pot;
}

double structure_score(const TransitionStructure& structure,
                       StatsSource& stats, const SearchConfig& config,
                       std::span<const int> cards) {
    (void)cards;
    std::vector<Event> events;
    for (int c = 0; c < structure.num_vars(); ++c)
        events.push_back(family_event(structure, c));
    auto tables = stats.collect(events);
    double total = 0.0;
    for (const auto& tab : tables) total += score_table(tab, stats, config);
    return total;
}

SearchResult greedy_family_search(const TransitionStructure& initial,
                                  StatsSource& stats,
                                  const SearchConfig& config,
                                  std::span<const int> cards) {
    SearchResult result;
    result.structure = initial;
    TransitionStructure& st = result.structure;
    st.max_indegree = config.max_indegree;
    const int n = st.num_vars();

    std::vector<double> cur(n);
    for (int c = 0; c < n; ++c)
        cur[c] = family_score(st.parents[c], c, stats, config);

    struct Best {
        bool found = false;
        Move move;
        ParentRef reverse_other; // arc added to the other family
    };

    for (int stage = 0; stage < config.stages; ++stage) {
        std::vector<std::vector<ParentRef>> pots(n);
        for (int c = 0; c < n; ++c)
            pots[c] = potential_parents(c, st, stats, config, cards);

        bool stage_accepted = false;
        while (true) {
            // Batch every event the move evaluation will need, so complete
            // sources fill all misses in one data pass.
            std::vector<Event> batch;
            for (int c = 0; c < n; ++c) {
                const auto& parents = st.parents[c];
                const bool room =
                    static_cast<int>(parents.size()) < config.max_indegree;
                for (const auto& p : pots[c]) {
                    if (st.has_arc(c, p) || !room) continue;
                    auto with = parents;
                    with.push_back(p);
                    batch.push_back(event_for(std::move(with), c));
                }
                for (const auto& p : parents) {
                    auto without = parents;
                    without.erase(
                        std::find(without.begin(), without.end(), p));
                    batch.push_back(event_for(std::move(without), c));
                    if (p.lag == 0 && config.allow_intra_slice) {
                        auto other = st.parents[p.variable];
                        other.push_back({c, 0});
                        batch.push_back(
                            event_for(std::move(other), p.variable));
                    }
                }
            }
            stats.collect(batch);

            Best best;
            auto consider = [&](Move m, ParentRef reverse_other = {}) {
                if (!best.found || m.gain > best.move.gain) {
                    best.found = true;
                    best.move = m;
                    best.reverse_other = reverse_other;
                }
            };

            for (int c = 0; c < n; ++c) {
                const auto& parents = st.parents[c];
                // Adds, in (variable, lag) order.
                if (static_cast<int>(parents.size()) < config.max_indegree) {
                    auto adds = pots[c];
                    std::sort(adds.begin(), adds.end(),
                              [](const ParentRef& a, const ParentRef& b) {
                                  return std::pair(a.variable, a.lag) <
                                         std::pair(b.variable, b.lag);
                              });
                    for (const auto& p : adds) {
                        if (st.has_arc(c, p)) continue;
                        if (p.lag == 0 && !st.lag0_acyclic_with(c, p))
                            continue;
                        auto with = parents;
                        with.push_back(p);
                        const double gain =
                            family_score(std::move(with), c, stats, config) -
                            cur[c];
                        if (gain > 0.0)
                            consider({Move::Add, c, p, gain});
                    }
                }
                // Deletes.
                std::vector<ParentRef> dels = parents;
                std::sort(dels.begin(), dels.end(),
                          [](const ParentRef& a, const ParentRef& b) {
                              return std::pair(a.variable, a.lag) <
                                     std::pair(b.variable, b.lag);
                          });
                for (const auto& p : dels) {
                    auto without = parents;
                    without.erase(std::find(without.begin(), without.end(), p));
                    const double gain =
                        family_score(std::move(without), c, stats, config) -
                        cur[c];
                    if (gain > 0.0)
                        consider({Move::Delete, c, p, gain});
                }
                // Reversals of intra-slice arcs only; reversing an
                // inter-slice arc has no meaning in a stationary fragment.
                if (config.allow_intra_slice) {
                    for (const auto& p : dels) {
                        if (p.lag != 0) continue;
                        const int j = p.variable;
                        const ParentRef back{c, 0};
                        if (st.has_arc(j, back)) continue;
                        if (static_cast<int>(st.parents[j].size()) >=
                            config.max_indegree)
                            continue;
                        TransitionStructure probe = st;
                        probe.remove_arc(c, p);
                        if (!probe.lag0_acyclic_with(j, back)) continue;
                        auto without = parents;
                        without.erase(
                            std::find(without.begin(), without.end(), p));
                        auto other = st.parents[j];
                        other.push_back(back);
                        const double gain =
                            (family_score(std::move(without), c, stats,
                                          config) -
                             cur[c]) +
                            (family_score(std::move(other), j, stats,
                                          config) -
                             cur[j]);
                        if (gain > 0.0)
                            consider({Move::Reverse, c, p, gain}, back);
                    }
                }
            }

            if (!best.found) break;
            const Move& m = best.move;
            switch (m.kind) {
            case Move::Add:
                st.add_arc(m.child, m.parent);
                result.add_gains[{m.child, m.parent}] = m.gain;
                break;
            case Move::Delete:
                st.remove_arc(m.child, m.parent);
                break;
            case Move::Reverse:
                st.remove_arc(m.child, m.parent);
                st.add_arc(m.parent.variable, best.reverse_other);
                break;
            }
            cur[m.child] = family_score(st.parents[m.child], m.child, stats,
                                        config);
            if (m.kind == Move::Reverse)
                cur[m.parent.variable] = family_score(
                    st.parents[m.parent.variable], m.parent.variable, stats,
                    config);
            result.accepted.push_back(m);
            double total = 0.0;
            for (double s : cur) total += s;
            result.score_after.push_back(total);
            stage_accepted = true;
        }
        if (!stage_accepted) break;
    }

    result.family_scores = cur;
    result.total_score = 0.0;
    for (double s : cur) result.total_score += s;
    return result;
}

} // namespace dbn
