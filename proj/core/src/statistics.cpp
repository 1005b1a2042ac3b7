#include "dbn/statistics.hpp"

#include <algorithm>
#include <cassert>

#include "dbn/errors.hpp"

namespace dbn {

Event family_event(const TransitionStructure& structure, int child) {
    Event e;
    e.terms = structure.parents[child];
    e.terms.push_back({child, 0});
    return e;
}

std::size_t EssTable::index(std::span<const int> values) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < cards.size(); ++i)
        idx = idx * cards[i] + values[i];
    return idx;
}

EssTable EssTable::zeros(Event event, std::span<const int> var_cards) {
    EssTable t;
    std::size_t size = 1;
    t.cards.reserve(event.terms.size());
    for (const auto& term : event.terms) {
        t.cards.push_back(var_cards[term.variable]);
        size *= static_cast<std::size_t>(var_cards[term.variable]);
    }
    t.event = std::move(event);
    t.table.assign(size, 0.0);
    return t;
}

std::vector<EssTable> complete_counts(
    const std::vector<std::vector<std::vector<int>>>& sequences,
    std::span<const int> cards, std::span<const Event> events) {
    std::vector<EssTable> tables;
    tables.reserve(events.size());
    for (const auto& e : events) tables.push_back(EssTable::zeros(e, cards));

    for (const auto& seq : sequences) {
        const int len = static_cast<int>(seq.size());
        for (int t = 0; t + 1 < len; ++t) {
            for (auto& tab : tables) {
                std::size_t idx = 0;
                bool ok = true;
                for (std::size_t i = 0; i < tab.event.terms.size(); ++i) {
                    const auto& term = tab.event.terms[i];
                    const int s = t + 1 - term.lag;
                    if (s < 0 || s >= len) {
                        ok = false;
                        break;
                    }
                    const int val = seq[s][term.variable];
                    if (val == kMissing) {
                        ok = false;
                        break;
                    }
                    idx = idx * tab.cards[i] + val;
                }
                if (!ok) continue;
                tab.table[idx] += 1.0;
                tab.total += 1.0;
            }
        }
    }
    return tables;
}

std::vector<EssTable> complete_counts(const Dataset& data,
                                      std::span<const Event> events) {
    for (const auto& e : events)
        for (const auto& term : e.terms)
            if (term.variable < 0 || term.variable >= data.num_cols())
                throw DataError("complete_counts: event variable " +
                                std::to_string(term.variable) +
                                " is not a dataset column");
    return complete_counts(data.sequences, data.cardinalities, events);
}

namespace {

// Two-slice node for a term relative to transition t: lag 0 lives on the
// t+1 side, lag 1 on the t side. Deeper lags do not fit one tree.
int term_node(const SliceNodes& sn, const ParentRef& term) {
    if (term.lag == 0) return sn.at_t1(term.variable);
    if (term.lag == 1) return sn.at_t(term.variable);
    throw NotInAnyClique("family event has lag " + std::to_string(term.lag) +
                         " > 1; no single tree contains it");
}

} // namespace

std::vector<EssTable> expected_family_counts(
    std::span<const CalibratedSliceTree> trees,
    std::span<const Event> family_events, std::span<const int> var_cards) {
    std::vector<EssTable> tables;
    tables.reserve(family_events.size());
    for (const auto& e : family_events)
        tables.push_back(EssTable::zeros(e, var_cards));
    if (trees.empty()) return tables;

    const SliceNodes& sn = trees[0].tpl->slices;
    std::vector<std::vector<int>> query_nodes;
    for (const auto& e : family_events) {
        std::vector<int> nodes;
        for (const auto& term : e.terms) nodes.push_back(term_node(sn, term));
        query_nodes.push_back(std::move(nodes));
    }

    for (const auto& tree : trees) {
        for (std::size_t i = 0; i < tables.size(); ++i) {
            const auto q = tree.marginal_query(query_nodes[i]);
            auto& tab = tables[i];
            for (std::size_t cell = 0; cell < q.size(); ++cell)
                tab.table[cell] += q[cell];
            tab.total += 1.0;
        }
    }
    return tables;
}

std::vector<EssTable> expected_event_counts_factored(
    std::span<const CalibratedSliceTree> trees, std::span<const Event> events,
    std::span<const int> var_cards) {
    std::vector<EssTable> tables;
    tables.reserve(events.size());
    for (const auto& e : events) tables.push_back(EssTable::zeros(e, var_cards));
    if (trees.empty()) return tables;

    const SliceNodes& sn = trees[0].tpl->slices;
    const int len = static_cast<int>(trees.size()) + 1;
    const int n = sn.num_vars;

    // Singleton posteriors per (slice, variable), one extraction each.
    std::vector<std::vector<std::vector<double>>> marg(
        len, std::vector<std::vector<double>>(n));
    for (int s = 0; s < len; ++s) {
        const bool last = s == len - 1;
        const auto& tree = trees[last ? s - 1 : s];
        for (int v = 0; v < n; ++v) {
            const int node[1] = {last ? sn.at_t1(v) : sn.at_t(v)};
            marg[s][v] = tree.marginal_query(node);
        }
    }

    std::vector<int> digits;
    for (auto& tab : tables) {
        const std::size_t k = tab.event.terms.size();
        for (int t = 0; t + 1 < len; ++t) {
            bool in_range = true;
            for (const auto& term : tab.event.terms) {
                const int s = t + 1 - term.lag;
                if (s < 0 || s >= len) {
                    in_range = false;
                    break;
                }
            }
            if (!in_range) continue;
            digits.assign(k, 0);
            for (std::size_t cell = 0; cell < tab.table.size(); ++cell) {
                double p = 1.0;
                for (std::size_t i = 0; i < k; ++i) {
                    const auto& term = tab.event.terms[i];
                    p *= marg[t + 1 - term.lag][term.variable][digits[i]];
                }
                tab.table[cell] += p;
                for (std::size_t i = k; i-- > 0;) {
                    if (++digits[i] < tab.cards[i]) break;
                    digits[i] = 0;
                }
            }
            tab.total += 1.0;
        }
    }
    return tables;
}

const EssTable* StatsCache::lookup(const Event& event) const {
    auto it = tables_.find(event);
    if (it == tables_.end()) {
        ++misses_;
        return nullptr;
    }
    ++hits_;
    return &it->second;
}

void StatsCache::store(EssTable table) {
    Event key = table.event;
    tables_.insert_or_assign(std::move(key), std::move(table));
}

void StatsCache::clear() {
    tables_.clear();
    hits_ = misses_ = 0;
}

EssTable StatsSource::collect_one(const Event& event) {
    const Event evs[1] = {event};
    return collect(evs)[0];
}

CompleteDataSource::CompleteDataSource(
    std::vector<std::vector<std::vector<int>>> sequences,
    std::vector<int> cards)
    : sequences_(std::move(sequences)), cards_(std::move(cards)) {
    for (const auto& seq : sequences_)
        total_ += static_cast<double>(seq.size()) - 1.0;
}

std::vector<EssTable> CompleteDataSource::collect(
    std::span<const Event> events) {
    std::vector<Event> misses;
    for (const auto& e : events)
        if (cache_.lookup(e) == nullptr) misses.push_back(e);
    std::sort(misses.begin(), misses.end());
    misses.erase(std::unique(misses.begin(), misses.end()), misses.end());
    if (!misses.empty()) {
        ++sweeps_;
        auto tables = complete_counts(sequences_, cards_, misses);
        for (auto& t : tables) cache_.store(std::move(t));
    }
    std::vector<EssTable> out;
    out.reserve(events.size());
    for (const auto& e : events) out.push_back(*cache_.lookup(e));
    return out;
}

FactoredEssSource::FactoredEssSource(
    const Dbn& dbn, const ClusterPartition& partition,
    std::vector<std::vector<std::vector<int>>> sequences)
    : dbn_(dbn), engine_(dbn, partition), sequences_(std::move(sequences)) {
    for (const auto& seq : sequences_)
        total_ += static_cast<double>(seq.size()) - 1.0;
}

void FactoredEssSource::ensure_swept() {
    if (swept_) return;
    swept_ = true;

    const SliceNodes& sn = engine_.tpl().slices;
    const int n = dbn_.num_vars();
    const auto& tpl = engine_.tpl();

    family_tables_.clear();
    std::vector<Event> fam_events;
    for (int c = 0; c < n; ++c)
        fam_events.push_back(family_event(dbn_.structure, c));
    const auto cards = dbn_.cardinalities();
    for (const auto& e : fam_events)
        family_tables_.push_back(EssTable::zeros(e, cards));

    // Per-family and per-variable extraction maps, built once against the
    // shared tree template.
    struct Extract {
        int clique;
        std::vector<std::int32_t> map;
    };
    std::vector<Extract> fam_extract(n);
    for (int c = 0; c < n; ++c) {
        std::vector<int> order;
        for (const auto& term : fam_events[c].terms)
            order.push_back(term_node(sn, term));
        std::vector<int> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        const int clique = tpl.smallest_containing(sorted);
        assert(clique >= 0);
        fam_extract[c].clique = clique;
        fam_extract[c].map = ordered_project_map(
            tpl.cliques[clique], tpl.clique_cards(clique), order);
    }
    std::vector<Extract> var_t(n), var_t1(n);
    for (int v = 0; v < n; ++v) {
        for (bool t1 : {false, true}) {
            const int node[1] = {t1 ? sn.at_t1(v) : sn.at_t(v)};
            const int clique = tpl.smallest_containing(node);
            auto& ex = t1 ? var_t1[v] : var_t[v];
            ex.clique = clique;
            ex.map = ordered_project_map(tpl.cliques[clique],
                                         tpl.clique_cards(clique), node);
        }
    }

    marginals_.clear();
    marginals_.reserve(sequences_.size());
    for (const auto& seq : sequences_) {
        const int len = static_cast<int>(seq.size());
        std::vector<std::vector<std::vector<double>>> marg(
            len, std::vector<std::vector<double>>(n));
        auto extract_var = [&](const CalibratedSliceTree& tree,
                               const Extract& ex, int card) {
            std::vector<double> out(card, 0.0);
            const auto& belief = tree.beliefs[ex.clique].table();
            for (std::size_t cell = 0; cell < belief.size(); ++cell)
                out[ex.map[cell]] += belief[cell];
            return out;
        };
        auto [ll, s0] = engine_.smooth(
            seq, [&](int t, const CalibratedSliceTree& tree) {
                ++transitions_;
                for (int c = 0; c < n; ++c) {
                    const auto& ex = fam_extract[c];
                    const auto& belief = tree.beliefs[ex.clique].table();
                    auto& tab = family_tables_[c];
                    for (std::size_t cell = 0; cell < belief.size(); ++cell)
                        tab.table[ex.map[cell]] += belief[cell];
                    tab.total += 1.0;
                }
                for (int v = 0; v < n; ++v) {
                    marg[t][v] = extract_var(tree, var_t[v], dbn_.card(v));
                    if (t == len - 2)
                        marg[t + 1][v] =
                            extract_var(tree, var_t1[v], dbn_.card(v));
                }
            });
        loglik_ += ll;
        slice0_loglik_ += s0;
        marginals_.push_back(std::move(marg));
    }
}

const std::vector<EssTable>& FactoredEssSource::current_family_counts() {
    ensure_swept();
    return family_tables_;
}

double FactoredEssSource::loglik() {
    ensure_swept();
    return loglik_;
}

double FactoredEssSource::slice0_loglik() {
    ensure_swept();
    return slice0_loglik_;
}

std::vector<EssTable> FactoredEssSource::collect(
    std::span<const Event> events) {
    ensure_swept();
    const auto cards = dbn_.cardinalities();
    std::vector<EssTable> out;
    out.reserve(events.size());
    std::vector<int> digits;
    for (const auto& e : events) {
        if (const EssTable* hit = cache_.lookup(e)) {
            out.push_back(*hit);
            continue;
        }
        EssTable tab = EssTable::zeros(e, cards);
        const std::size_t k = e.terms.size();
        for (const auto& marg : marginals_) {
            const int len = static_cast<int>(marg.size());
            for (int t = 0; t + 1 < len; ++t) {
                bool in_range = true;
                for (const auto& term : e.terms) {
                    const int s = t + 1 - term.lag;
                    if (s < 0 || s >= len) {
                        in_range = false;
                        break;
                    }
                }
                if (!in_range) continue;
                digits.assign(k, 0);
                for (std::size_t cell = 0; cell < tab.table.size(); ++cell) {
                    double p = 1.0;
                    for (std::size_t i = 0; i < k; ++i) {
                        const auto& term = e.terms[i];
                        p *= marg[t + 1 - term.lag][term.variable][digits[i]];
                    }
                    tab.table[cell] += p;
                    for (std::size_t i = k; i-- > 0;) {
                        if (++digits[i] < tab.cards[i]) break;
                        digits[i] = 0;
                    }
                }
                tab.total += 1.0;
            }
        }
        cache_.store(tab);
        out.push_back(std::move(tab));
    }
    return out;
}

} // namespace dbn
