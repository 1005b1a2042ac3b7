#include "dbn/scores.hpp"

#include <cassert>
#include <cmath>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

void check_family_shape(const EssTable& ess) {
    if (ess.event.terms.empty() || ess.event.terms.back().lag != 0)
        throw DataError("count table is not family-shaped (child last, lag 0)");
}

} // namespace

Cpt mle_from_counts(const EssTable& ess, double pseudocount) {
    check_family_shape(ess);
    Cpt cpt;
    cpt.child = ess.event.terms.back().variable;
    cpt.child_card = ess.cards.back();
    cpt.parents.assign(ess.event.terms.begin(), ess.event.terms.end() - 1);
    cpt.parent_cards.assign(ess.cards.begin(), ess.cards.end() - 1);
    cpt.table.resize(ess.table.size());

    const std::size_t rows = cpt.num_rows();
    for (std::size_t r = 0; r < rows; ++r) {
        double mass = 0.0;
        for (int v = 0; v < cpt.child_card; ++v)
            mass += ess.table[r * cpt.child_card + v] + pseudocount;
        if (mass <= 0.0) {
            for (int v = 0; v < cpt.child_card; ++v)
                cpt.at(r, v) = 1.0 / cpt.child_card;
            continue;
        }
        for (int v = 0; v < cpt.child_card; ++v)
            cpt.at(r, v) =
                (ess.table[r * cpt.child_card + v] + pseudocount) / mass;
    }
    return cpt;
}

double bic_family_score(const EssTable& ess, double total_transitions) {
    check_family_shape(ess);
    const int child_card = ess.cards.back();
    const std::size_t rows = ess.table.size() / child_card;

    double ll = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double mass = 0.0;
        for (int v = 0; v < child_card; ++v)
            mass += ess.table[r * child_card + v];
        if (mass <= 0.0) continue;
        for (int v = 0; v < child_card; ++v) {
            const double n = ess.table[r * child_card + v];
            if (n > 0.0) ll += n * std::log(n / mass);
        }
    }
    const double dim = static_cast<double>(rows) * (child_card - 1);
    return ll - 0.5 * std::log(total_transitions) * dim;
}

double bde_family_score(const EssTable& ess, double equivalent_sample_size) {
    check_family_shape(ess);
    assert(equivalent_sample_size > 0.0);
    const int child_card = ess.cards.back();
    const std::size_t rows = ess.table.size() / child_card;
    const double alpha_cell =
        equivalent_sample_size / static_cast<double>(ess.table.size());
    const double alpha_row = alpha_cell * child_card;

    double score = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double mass = 0.0;
        for (int v = 0; v < child_card; ++v)
            mass += ess.table[r * child_card + v];
        score += std::lgamma(alpha_row) - std::lgamma(alpha_row + mass);
        for (int v = 0; v < child_card; ++v) {
            const double n = ess.table[r * child_card + v];
            score += std::lgamma(alpha_cell + n) - std::lgamma(alpha_cell);
        }
    }
    return score;
}

} // namespace dbn
