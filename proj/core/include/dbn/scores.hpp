#pragma once

#include <span>

#include "dbn/model.hpp"
#include "dbn/statistics.hpp"

namespace dbn {

/// Maximum-likelihood CPT from a family-shaped count table (parents first,
/// child last). Rows with zero mass become uniform; a positive pseudocount
/// is added to every cell before normalizing when smoothing is requested.
Cpt mle_from_counts(const EssTable& ess, double pseudocount = 0.0);

/// BIC family score: fitted log-likelihood of the family's counts minus
/// (ln T / 2) times the family's parameter count. 0*ln(0) is taken as 0.
double bic_family_score(const EssTable& ess, double total_transitions);

/// BDeu family score with a uniform prior of the given equivalent sample
/// size spread over the table.
double bde_family_score(const EssTable& ess, double equivalent_sample_size);

} // namespace dbn
