#include "dbn/em.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dbn/errors.hpp"
#include "dbn/exact.hpp"
#include "dbn/inference.hpp"
#include "dbn/rng.hpp"
#include "dbn/scores.hpp"

namespace dbn {

namespace {

struct EStepOut {
    std::vector<EssTable> families; // aligned with child ids
    double loglik = 0.0;
};

EStepOut run_e_step(const Dbn& model,
                    const std::vector<std::vector<std::vector<int>>>& aligned,
                    const ClusterPartition& partition, const EmConfig& cfg) {
    EStepOut out;
    if (cfg.e_step == EmConfig::EStep::Exact) {
        FlatEngine engine(model, cfg.state_bound);
        auto ess = engine.family_ess(aligned);
        out.loglik = ess.loglik;
        const auto cards = model.cardinalities();
        for (int c = 0; c < model.num_vars(); ++c) {
            EssTable tab =
                EssTable::zeros(family_event(model.structure, c), cards);
            tab.table = std::move(ess.tables[c]);
            for (double x : tab.table) tab.total += x;
            out.families.push_back(std::move(tab));
        }
        return out;
    }
    FactoredEssSource source(model, partition, aligned);
    if (cfg.ess == EmConfig::Ess::Family) {
        out.families = source.current_family_counts();
    } else {
        std::vector<Event> events;
        for (int c = 0; c < model.num_vars(); ++c)
            events.push_back(family_event(model.structure, c));
        out.families = source.collect(events);
    }
    out.loglik = source.loglik();
    return out;
}

} // namespace

bool has_missing(const std::vector<std::vector<std::vector<int>>>& aligned) {
    for (const auto& seq : aligned)
        for (const auto& slice : seq)
            for (int v : slice)
                if (v == kMissing) return true;
    return false;
}

EmResult parametric_em(const Dbn& init,
                       const std::vector<std::vector<std::vector<int>>>& aligned,
                       const ClusterPartition& partition, const EmConfig& cfg) {
    double transitions = 0.0;
    for (const auto& seq : aligned)
        transitions += static_cast<double>(seq.size()) - 1.0;

    EmResult result;
    Dbn model = init;
    double prev = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        EStepOut e = run_e_step(model, aligned, partition, cfg);
        result.loglik_trace.push_back(e.loglik);
        if (e.loglik > best) {
            best = e.loglik;
            result.model = model;
            result.best_iteration = iter;
        }
        if (iter > 0) {
            const double delta = e.loglik - prev;
            if (cfg.e_step == EmConfig::EStep::Bk &&
                -delta / std::numbers::ln2 / transitions >
                    cfg.decrease_guard_bits)
                break; // approximation regressed; keep the best so far
            const double rel =
                delta / std::max(std::abs(prev), 1e-12);
            if (rel >= 0.0 && rel < cfg.tolerance) break;
        }
        for (int c = 0; c < model.num_vars(); ++c)
            model.cpts[c] = mle_from_counts(e.families[c], cfg.pseudocount);
        prev = e.loglik;
    }
    if (result.loglik_trace.empty()) result.model = model;
    return result;
}

EmResult parametric_em(const Dbn& init, const Dataset& data,
                       const ClusterPartition& partition, const EmConfig& cfg) {
    return parametric_em(init, align_dataset(init, data), partition, cfg);
}

void randomize_parameters(Dbn& dbn, std::uint64_t seed, double strength) {
    Rng rng(seed);
    for (auto& cpt : dbn.cpts) {
        const std::size_t rows = cpt.num_rows();
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (int v = 0; v < cpt.child_card; ++v) {
                cpt.at(r, v) *= std::exp(rng.uniform(-strength, strength));
                sum += cpt.at(r, v);
            }
            for (int v = 0; v < cpt.child_card; ++v) cpt.at(r, v) /= sum;
        }
    }
}

EmResult parametric_em_restarts(const Dbn& init, const Dataset& data,
                                const ClusterPartition& partition,
                                const EmConfig& cfg, int restarts,
                                std::uint64_t seed) {
    const auto aligned = align_dataset(init, data);
    EmResult best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        Dbn start = init;
        if (r > 0) randomize_parameters(start, seed + r, 1.0);
        EmResult run = parametric_em(start, aligned, partition, cfg);
        const double ll = run.loglik_trace.empty()
                              ? -std::numeric_limits<double>::infinity()
                              : *std::max_element(run.loglik_trace.begin(),
                                                  run.loglik_trace.end());
        if (ll > best_ll) {
            best_ll = ll;
            best = std::move(run);
        }
    }
    return best;
}

double bits_per_slice(double loglik, double slice0_loglik,
                      double transitions) {
    return -(loglik - slice0_loglik) / std::numbers::ln2 / transitions;
}

double holdout_bits_per_slice(const Dbn& dbn, const Dataset& test,
                              const ClusterPartition& partition,
                              std::vector<std::string>* diagnostics) {
    const auto aligned = align_dataset(dbn, test);
    if (aligned.empty()) throw DataError("holdout: empty test dataset");
    SliceTreeEngine engine(dbn, partition);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        const auto& seq = aligned[i];
        try {
            FactoredMessage alpha = engine.initial_alpha(seq[0]);
            const double slice0 = alpha.log_scale;
            for (std::size_t t = 1; t < seq.size(); ++t)
                alpha = engine.forward_step(alpha, seq[t],
                                            static_cast<int>(t));
            num += -(alpha.log_scale - slice0) / std::numbers::ln2;
            den += static_cast<double>(seq.size()) - 1.0;
        } catch (const ZeroMassEvidence& e) {
            if (diagnostics)
                diagnostics->push_back("sequence " + std::to_string(i) +
                                       ": " + e.what());
            return std::numeric_limits<double>::infinity();
        }
    }
    return num / den;
}

std::unique_ptr<StatsSource> make_stats_source(
    const Dbn& model, const std::vector<std::vector<std::vector<int>>>& aligned,
    const ClusterPartition& partition) {
    if (!model.has_hidden() && !has_missing(aligned))
        return std::make_unique<CompleteDataSource>(aligned,
                                                    model.cardinalities());
    return std::make_unique<FactoredEssSource>(model, partition, aligned);
}

void refit_parameters(Dbn& model, StatsSource& stats, double pseudocount,
                      const TransitionStructure* reference) {
    std::vector<Event> events;
    std::vector<int> children;
    for (int c = 0; c < model.num_vars(); ++c) {
        if (reference != nullptr &&
            reference->parents[c] == model.structure.parents[c])
            continue;
        events.push_back(family_event(model.structure, c));
        children.push_back(c);
    }
    auto tables = stats.collect(events);
    for (std::size_t i = 0; i < children.size(); ++i)
        model.cpts[children[i]] = mle_from_counts(tables[i], pseudocount);
}

namespace {

// Conditional training bits for a fully observed dataset, no inference.
std::pair<double, double> complete_loglik(
    const Dbn& model, const std::vector<std::vector<std::vector<int>>>& aligned) {
    double total = 0.0, prior_part = 0.0;
    for (const auto& seq : aligned) {
        total += joint_log_prob(model, seq);
        for (int s = 0; s < model.window - 1; ++s)
            for (int v = 0; v < model.num_vars(); ++v)
                prior_part += std::log(model.prior[s][v][seq[s][v]]);
    }
    return {total, prior_part};
}

} // namespace

SemResult structural_em(const Dbn& init, const Dataset& data,
                        const ClusterPartition& partition,
                        const SemConfig& cfg) {
    if (cfg.search.max_lag != 1)
        throw DataError("structural_em: search window must be Markovian");
    SemResult result;
    Dbn model = init;
    const auto cards = model.cardinalities();
    auto aligned = align_dataset(model, data);
    const double transitions = [&] {
        double t = 0.0;
        for (const auto& seq : aligned) t += double(seq.size()) - 1.0;
        return t;
    }();

    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        auto source = make_stats_source(model, aligned, partition);
        const double current =
            structure_score(model.structure, *source, cfg.search, cards);
        SearchResult inner =
            greedy_family_search(model.structure, *source, cfg.search, cards);

        double bits;
        if (auto* fact = dynamic_cast<FactoredEssSource*>(source.get())) {
            bits = bits_per_slice(fact->loglik(), fact->slice0_loglik(),
                                  transitions);
        } else {
            auto [total, prior_part] = complete_loglik(model, aligned);
            bits = bits_per_slice(total, prior_part, transitions);
        }
        result.records.push_back(
            {"sem", outer, inner.total_score, bits});
        result.searches.push_back(inner);

        if (inner.total_score - current <= cfg.tolerance) break;

        const TransitionStructure old = model.structure;
        model.structure = inner.structure;
        refit_parameters(model, *source, cfg.search.pseudocount, &old);
        if (model.has_hidden() || has_missing(aligned)) {
            EmResult em = parametric_em(model, aligned, partition, cfg.em);
            model = std::move(em.model);
        }
    }
    result.model = std::move(model);
    return result;
}

} // namespace dbn
