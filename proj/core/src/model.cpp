#include "dbn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "dbn/errors.hpp"
#include "dbn/rng.hpp"

namespace dbn {

namespace {

constexpr double kRowSumTol = 1e-12;

std::string describe(const ParentRef& p) {
    std::ostringstream os;
    os << "(var " << p.variable << ", lag " << p.lag << ")";
    return os.str();
}

} // namespace

bool TransitionStructure::has_arc(int child, ParentRef p) const {
    const auto& ps = parents[child];
    return std::binary_search(ps.begin(), ps.end(), p);
}

bool TransitionStructure::add_arc(int child, ParentRef p) {
    auto& ps = parents[child];
    auto it = std::lower_bound(ps.begin(), ps.end(), p);
    if (it != ps.end() && *it == p) return false;
    ps.insert(it, p);
    return true;
}

bool TransitionStructure::remove_arc(int child, ParentRef p) {
    auto& ps = parents[child];
    auto it = std::lower_bound(ps.begin(), ps.end(), p);
    if (it == ps.end() || *it != p) return false;
    ps.erase(it);
    return true;
}

int TransitionStructure::max_lag() const {
    int m = 0;
    for (const auto& ps : parents)
        for (const auto& p : ps) m = std::max(m, p.lag);
    return m;
}

namespace {

// Cycle check on the lag-0 subgraph with an optional extra arc.
bool lag0_acyclic_impl(const TransitionStructure& s, int extra_child,
                       const ParentRef* extra) {
    const int n = s.num_vars();
    std::vector<std::vector<int>> out(n); // parent -> children
    for (int c = 0; c < n; ++c)
        for (const auto& p : s.parents[c])
            if (p.lag == 0) out[p.variable].push_back(c);
    if (extra != nullptr && extra->lag == 0)
        out[extra->variable].push_back(extra_child);

    // 0 = unvisited, 1 = on stack, 2 = done
    std::vector<int> state(n, 0);
    std::vector<int> stack;
    for (int start = 0; start < n; ++start) {
        if (state[start] != 0) continue;
        stack.push_back(start);
        while (!stack.empty()) {
            int v = stack.back();
            if (state[v] == 0) {
                state[v] = 1;
                for (int w : out[v]) {
                    if (state[w] == 1) return false;
                    if (state[w] == 0) stack.push_back(w);
                }
            } else {
                if (state[v] == 1) state[v] = 2;
                stack.pop_back();
            }
        }
    }
    return true;
}

} // namespace

bool TransitionStructure::lag0_acyclic() const {
    return lag0_acyclic_impl(*this, -1, nullptr);
}

bool TransitionStructure::lag0_acyclic_with(int child, ParentRef p) const {
    return lag0_acyclic_impl(*this, child, &p);
}

std::size_t Cpt::num_rows() const {
    std::size_t rows = 1;
    for (int c : parent_cards) rows *= static_cast<std::size_t>(c);
    return rows;
}

std::size_t Cpt::row_index(std::span<const int> parent_values) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < parents.size(); ++i)
        idx = idx * parent_cards[i] + parent_values[i];
    return idx;
}

Cpt Cpt::uniform(int child, int child_card, std::vector<ParentRef> parents,
                 std::vector<int> parent_cards) {
    Cpt cpt;
    cpt.child = child;
    cpt.child_card = child_card;
    cpt.parents = std::move(parents);
    cpt.parent_cards = std::move(parent_cards);
    cpt.table.assign(cpt.expected_size(), 1.0 / child_card);
    return cpt;
}

std::vector<int> Dbn::cardinalities() const {
    std::vector<int> cards(variables.size());
    for (std::size_t i = 0; i < variables.size(); ++i)
        cards[i] = variables[i].cardinality;
    return cards;
}

bool Dbn::has_hidden() const {
    for (const auto& v : variables)
        if (v.kind == VarKind::Hidden) return true;
    return false;
}

std::optional<int> Dbn::find_variable(const std::string& name) const {
    for (const auto& v : variables)
        if (v.name == name) return v.id;
    return std::nullopt;
}

std::int64_t Dataset::total_transitions() const {
    std::int64_t total = 0;
    for (const auto& seq : sequences)
        total += static_cast<std::int64_t>(seq.size()) - 1;
    return total;
}

void Dataset::check() const {
    if (names.size() != cardinalities.size())
        throw DataError("dataset: names/cardinalities size mismatch");
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto& seq = sequences[s];
        if (seq.size() < 2)
            throw DataError("dataset: sequence " + std::to_string(s) +
                            " shorter than 2 slices");
        for (const auto& slice : seq) {
            if (slice.size() != names.size())
                throw DataError("dataset: ragged slice in sequence " +
                                std::to_string(s));
            for (std::size_t c = 0; c < slice.size(); ++c) {
                int v = slice[c];
                if (v == kMissing) continue;
                if (v < 0 || v >= cardinalities[c])
                    throw DataError("dataset: value " + std::to_string(v) +
                                    " out of range for column " + names[c]);
            }
        }
    }
}

std::vector<std::string> validate_dbn(const Dbn& dbn) {
    std::vector<std::string> issues;
    auto add = [&issues](const std::string& msg) { issues.push_back(msg); };

    const int n = dbn.num_vars();
    std::set<std::string> seen_names;
    for (int i = 0; i < n; ++i) {
        const Variable& v = dbn.variables[i];
        if (v.id != i)
            add("variable " + v.name + ": id " + std::to_string(v.id) +
                " not dense (expected " + std::to_string(i) + ")");
        if (v.cardinality < 2)
            add("variable " + v.name + ": cardinality must be >= 2");
        if (!seen_names.insert(v.name).second)
            add("duplicate variable name '" + v.name + "'");
    }

    if (dbn.window < 2) add("window must be >= 2");

    if (static_cast<int>(dbn.prior.size()) != dbn.window - 1) {
        add("prior must cover window-1 slices");
    } else {
        for (int s = 0; s < dbn.window - 1; ++s) {
            if (static_cast<int>(dbn.prior[s].size()) != n) {
                add("prior slice " + std::to_string(s) +
                    ": wrong variable count");
                continue;
            }
            for (int v = 0; v < n; ++v) {
                const auto& marg = dbn.prior[s][v];
                if (static_cast<int>(marg.size()) != dbn.card(v)) {
                    add("prior slice " + std::to_string(s) + ", variable " +
                        dbn.variables[v].name + ": wrong length");
                    continue;
                }
                double sum = 0.0;
                bool neg = false;
                for (double p : marg) {
                    sum += p;
                    neg = neg || p < 0.0;
                }
                if (neg)
                    add("prior slice " + std::to_string(s) + ", variable " +
                        dbn.variables[v].name + ": negative entry");
                if (std::abs(sum - 1.0) > kRowSumTol)
                    add("prior slice " + std::to_string(s) + ", variable " +
                        dbn.variables[v].name + ": sums to " +
                        std::to_string(sum));
            }
        }
    }

    if (dbn.structure.num_vars() != n) {
        add("structure: wrong variable count");
        return issues;
    }

    for (int c = 0; c < n; ++c) {
        const auto& ps = dbn.structure.parents[c];
        if (static_cast<int>(ps.size()) > dbn.structure.max_indegree)
            add("child " + dbn.variables[c].name + ": indegree " +
                std::to_string(ps.size()) + " exceeds bound " +
                std::to_string(dbn.structure.max_indegree));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const ParentRef& p = ps[i];
            if (p.variable < 0 || p.variable >= n) {
                add("child " + dbn.variables[c].name + ": parent " +
                    describe(p) + " out of range");
                continue;
            }
            if (p.lag < 0 || p.lag > dbn.window - 1)
                add("child " + dbn.variables[c].name + ": parent " +
                    describe(p) + " outside window " +
                    std::to_string(dbn.window));
            if (p.lag == 0 && p.variable == c)
                add("child " + dbn.variables[c].name + ": lag-0 self loop");
            if (i > 0 && ps[i - 1] == p)
                add("child " + dbn.variables[c].name + ": duplicate parent " +
                    describe(p));
            if (i > 0 && p < ps[i - 1])
                add("child " + dbn.variables[c].name +
                    ": parents not in canonical (lag, variable) order");
        }
    }

    if (!dbn.structure.lag0_acyclic()) add("lag-0 subgraph has a cycle");

    if (static_cast<int>(dbn.cpts.size()) != n) {
        add("cpts: wrong count");
        return issues;
    }
    for (int c = 0; c < n; ++c) {
        const Cpt& cpt = dbn.cpts[c];
        if (cpt.child != c) {
            add("cpt " + std::to_string(c) + ": child id mismatch");
            continue;
        }
        if (cpt.parents != dbn.structure.parents[c]) {
            add("cpt for " + dbn.variables[c].name +
                ": parents do not match structure");
            continue;
        }
        if (cpt.child_card != dbn.card(c))
            add("cpt for " + dbn.variables[c].name + ": child card mismatch");
        bool card_ok = cpt.parent_cards.size() == cpt.parents.size();
        for (std::size_t i = 0; card_ok && i < cpt.parents.size(); ++i)
            card_ok = cpt.parent_cards[i] == dbn.card(cpt.parents[i].variable);
        if (!card_ok) {
            add("cpt for " + dbn.variables[c].name + ": parent card mismatch");
            continue;
        }
        if (cpt.table.size() != cpt.expected_size()) {
            add("cpt for " + dbn.variables[c].name + ": table length " +
                std::to_string(cpt.table.size()) + ", expected " +
                std::to_string(cpt.expected_size()));
            continue;
        }
        const std::size_t rows = cpt.num_rows();
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            bool neg = false;
            for (int v = 0; v < cpt.child_card; ++v) {
                sum += cpt.at(r, v);
                neg = neg || cpt.at(r, v) < 0.0;
            }
            if (neg)
                add("cpt for " + dbn.variables[c].name + ", row " +
                    std::to_string(r) + ": negative entry");
            if (std::abs(sum - 1.0) > kRowSumTol)
                add("cpt for " + dbn.variables[c].name + ", row " +
                    std::to_string(r) + ": sums to " + std::to_string(sum));
        }
    }

    return issues;
}

std::int64_t dimension(const TransitionStructure& structure,
                       std::span<const int> cards) {
    std::int64_t dim = 0;
    for (int c = 0; c < structure.num_vars(); ++c) {
        std::int64_t rows = 1;
        for (const auto& p : structure.parents[c]) rows *= cards[p.variable];
        dim += rows * (cards[c] - 1);
    }
    return dim;
}

double joint_log_prob(const Dbn& dbn,
                      const std::vector<std::vector<int>>& sequence) {
    const int n = dbn.num_vars();
    const int len = static_cast<int>(sequence.size());
    if (len < dbn.window)
        throw DataError("joint_log_prob: sequence shorter than model window");
    for (const auto& slice : sequence) {
        if (static_cast<int>(slice.size()) != n)
            throw DataError("joint_log_prob: slice width != variable count");
        for (int v : slice)
            if (v == kMissing)
                throw DataError("joint_log_prob: sequence has missing values");
    }

    double lp = 0.0;
    for (int s = 0; s < dbn.window - 1; ++s)
        for (int v = 0; v < n; ++v)
            lp += std::log(dbn.prior[s][v][sequence[s][v]]);

    std::vector<int> pvals;
    for (int s = dbn.window - 1; s < len; ++s) {
        for (int c = 0; c < n; ++c) {
            const Cpt& cpt = dbn.cpts[c];
            pvals.resize(cpt.parents.size());
            for (std::size_t i = 0; i < cpt.parents.size(); ++i)
                pvals[i] = sequence[s - cpt.parents[i].lag]
                                   [cpt.parents[i].variable];
            lp += std::log(cpt.at(cpt.row_index(pvals), sequence[s][c]));
        }
    }
    return lp; // -inf is legal: zero CPT entries are valid parameters
}

namespace {

// Uniform table with multiplicative noise exp(u), u ~ U(-0.1, 0.1), rows
// renormalized. Keeps EM from getting stuck on a symmetric start.
void perturb_rows(Cpt& cpt, Rng& rng) {
    const std::size_t rows = cpt.num_rows();
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (int v = 0; v < cpt.child_card; ++v) {
            cpt.at(r, v) *= std::exp(rng.uniform(-0.1, 0.1));
            sum += cpt.at(r, v);
        }
        for (int v = 0; v < cpt.child_card; ++v) cpt.at(r, v) /= sum;
    }
}

} // namespace

Dbn fhmm_structure(int num_hidden, int hidden_cardinality,
                   const std::vector<std::pair<std::string, int>>& observables,
                   int max_indegree, std::uint64_t seed) {
    if (num_hidden < 1) throw DataError("fhmm_structure: num_hidden < 1");
    if (num_hidden > max_indegree)
        throw DataError("fhmm_structure: each observable would need " +
                        std::to_string(num_hidden) +
                        " parents, exceeding max_indegree " +
                        std::to_string(max_indegree));

    Dbn dbn;
    dbn.window = 2;
    for (int h = 0; h < num_hidden; ++h)
        dbn.variables.push_back({h, "H" + std::to_string(h + 1),
                                 hidden_cardinality, VarKind::Hidden});
    for (std::size_t o = 0; o < observables.size(); ++o)
        dbn.variables.push_back({num_hidden + static_cast<int>(o),
                                 observables[o].first, observables[o].second,
                                 VarKind::Observable});

    const int n = dbn.num_vars();
    dbn.structure.parents.assign(n, {});
    dbn.structure.max_indegree = max_indegree;
    for (int h = 0; h < num_hidden; ++h)
        dbn.structure.add_arc(h, {h, 1}); // independent hidden chains
    for (int o = num_hidden; o < n; ++o)
        for (int h = 0; h < num_hidden; ++h)
            dbn.structure.add_arc(o, {h, 0});

    Rng rng(seed);
    dbn.cpts.reserve(n);
    for (int c = 0; c < n; ++c) {
        std::vector<int> pcards;
        for (const auto& p : dbn.structure.parents[c])
            pcards.push_back(dbn.card(p.variable));
        Cpt cpt = Cpt::uniform(c, dbn.card(c), dbn.structure.parents[c],
                               std::move(pcards));
        perturb_rows(cpt, rng);
        dbn.cpts.push_back(std::move(cpt));
    }

    dbn.prior.assign(1, {});
    for (int v = 0; v < n; ++v)
        dbn.prior[0].push_back(
            std::vector<double>(dbn.card(v), 1.0 / dbn.card(v)));
    return dbn;
}

Dbn make_empty_model(const Dataset& data, int max_indegree, int window) {
    Dbn dbn;
    dbn.window = window;
    for (int c = 0; c < data.num_cols(); ++c)
        dbn.variables.push_back(
            {c, data.names[c], data.cardinalities[c], VarKind::Observable});
    dbn.structure.parents.assign(data.num_cols(), {});
    dbn.structure.max_indegree = max_indegree;
    for (int c = 0; c < data.num_cols(); ++c)
        dbn.cpts.push_back(Cpt::uniform(c, dbn.card(c), {}, {}));
    dbn.prior.assign(window - 1, {});
    for (int s = 0; s < window - 1; ++s)
        for (int v = 0; v < data.num_cols(); ++v)
            dbn.prior[s].push_back(
                std::vector<double>(dbn.card(v), 1.0 / dbn.card(v)));
    return dbn;
}

void set_empirical_prior(Dbn& dbn, const Dataset& data) {
    for (int s = 0; s < dbn.window - 1; ++s) {
        for (int v = 0; v < dbn.num_vars(); ++v) {
            auto& marg = dbn.prior[s][v];
            if (dbn.is_hidden(v)) {
                marg.assign(dbn.card(v), 1.0 / dbn.card(v));
                continue;
            }
            auto col = std::find(data.names.begin(), data.names.end(),
                                 dbn.variables[v].name);
            if (col == data.names.end()) {
                marg.assign(dbn.card(v), 1.0 / dbn.card(v));
                continue;
            }
            const int c = static_cast<int>(col - data.names.begin());
            std::vector<double> counts(dbn.card(v), 1.0); // add-one smoothing
            for (const auto& seq : data.sequences) {
                if (s >= static_cast<int>(seq.size())) continue;
                int val = seq[s][c];
                if (val != kMissing) counts[val] += 1.0;
            }
            double total = 0.0;
            for (double x : counts) total += x;
            for (int k = 0; k < dbn.card(v); ++k) marg[k] = counts[k] / total;
        }
    }
}

std::vector<std::vector<std::vector<int>>> align_dataset(const Dbn& dbn,
                                                         const Dataset& data) {
    const int n = dbn.num_vars();
    std::vector<int> col_to_var(data.num_cols());
    for (int c = 0; c < data.num_cols(); ++c) {
        auto id = dbn.find_variable(data.names[c]);
        if (!id)
            throw DataError("dataset column '" + data.names[c] +
                            "' is not a model variable");
        if (data.cardinalities[c] > dbn.card(*id))
            throw DataError("dataset column '" + data.names[c] +
                            "' has cardinality " +
                            std::to_string(data.cardinalities[c]) +
                            " > model cardinality " +
                            std::to_string(dbn.card(*id)));
        col_to_var[c] = *id;
    }

    std::vector<std::vector<std::vector<int>>> out;
    out.reserve(data.sequences.size());
    for (const auto& seq : data.sequences) {
        std::vector<std::vector<int>> aligned(seq.size(),
                                              std::vector<int>(n, kMissing));
        for (std::size_t t = 0; t < seq.size(); ++t)
            for (int c = 0; c < data.num_cols(); ++c)
                aligned[t][col_to_var[c]] = seq[t][c];
        out.push_back(std::move(aligned));
    }
    return out;
}

} // namespace dbn
