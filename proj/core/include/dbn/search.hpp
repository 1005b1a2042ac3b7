#pragma once

#include <map>
#include <span>
#include <vector>

#include "dbn/model.hpp"
#include "dbn/statistics.hpp"

namespace dbn {

enum class ScoreKind { Bic, Bde };

struct SearchConfig {
    ScoreKind score = ScoreKind::Bic;
    double bde_ess = 1.0; // equivalent sample size for BDeu
    int max_indegree = 3;
    int max_lag = 1; // k-1 for a k-slice window
    bool allow_intra_slice = true;
    int stages = 3;              // candidate refreshes
    int candidates_per_child = 8;
    double pseudocount = 1.0; // spread over each family table when fitting
};

struct Move {
    enum Kind { Add = 0, Delete = 1, Reverse = 2 };
    Kind kind = Add;
    int child = 0;
    ParentRef parent;
    double gain = 0.0;
};

struct SearchResult {
    TransitionStructure structure;
    std::vector<double> family_scores;
    double total_score = 0.0;
    std::vector<Move> accepted;      // in acceptance order
    std::vector<double> score_after; // total score after each accepted move
    // Gain recorded when an arc was (last) added; feeds the non-Markovian
    // arc report.
    std::map<std::pair<int, ParentRef>, double> add_gains;
};

/// Candidate parent set Pot'_i: non-parents ranked by the BIC gain of
/// adding them alone to the current family, truncated to
/// candidates_per_child, plus all current parents.
std::vector<ParentRef> potential_parents(int child,
                                         const TransitionStructure& current,
                                         StatsSource& stats,
                                         const SearchConfig& config,
                                         std::span<const int> cards);

/// Staged greedy hill-climbing over add / delete / reverse moves, one best
/// positive-gain move per step, deterministic lexicographic tie-breaking on
/// (child, kind, parent variable, parent lag). Each stage refreshes the
/// candidate sets; the search stops after a stage accepts nothing.
SearchResult greedy_family_search(const TransitionStructure& initial,
                                  StatsSource& stats,
                                  const SearchConfig& config,
                                  std::span<const int> cards);

/// Total decomposed score of a structure under the given statistics.
double structure_score(const TransitionStructure& structure,
                       StatsSource& stats, const SearchConfig& config,
                       std::span<const int> cards);

} // namespace dbn
