#include "oracles.hpp"

#include <cassert>
#include <cmath>

namespace dbn::test {

CompletionOracle::CompletionOracle(const Dbn& dbn,
                                   std::vector<std::vector<int>> evidence)
    : dbn_(dbn), evidence_(std::move(evidence)) {
    const int n = dbn.num_vars();
    cards_ = dbn.cardinalities();
    strides_.assign(n, 1);
    for (int v = n - 2; v >= 0; --v)
        strides_[v] = strides_[v + 1] * static_cast<std::size_t>(cards_[v + 1]);
    for (int v = 0; v < n; ++v)
        num_states_ *= static_cast<std::size_t>(cards_[v]);

    for (std::size_t t = 0; t < evidence_.size(); ++t)
        for (int v = 0; v < n; ++v)
            if (evidence_[t][v] == kMissing)
                holes_.push_back({static_cast<int>(t), v});
    std::size_t completions = 1;
    for (const auto& [t, v] : holes_) {
        completions *= static_cast<std::size_t>(cards_[v]);
        assert(completions <= (std::size_t{1} << 26));
    }

    for_each_completion([&](const std::vector<std::vector<int>>&, double w) {
        mass_ += w;
    });
    loglik_ = std::log(mass_);
}

template <typename Fn>
void CompletionOracle::for_each_completion(Fn&& fn) const {
    std::vector<std::vector<int>> grid = evidence_;
    std::vector<int> digits(holes_.size(), 0);
    while (true) {
        for (std::size_t i = 0; i < holes_.size(); ++i)
            grid[holes_[i].first][holes_[i].second] = digits[i];
        fn(grid, std::exp(joint_log_prob(dbn_, grid)));
        std::size_t i = holes_.size();
        while (i-- > 0) {
            if (++digits[i] < cards_[holes_[i].second]) break;
            digits[i] = 0;
        }
        if (i == std::size_t(-1)) break;
    }
}

std::size_t CompletionOracle::state_index(const std::vector<int>& slice) const {
    std::size_t s = 0;
    for (std::size_t v = 0; v < slice.size(); ++v)
        s += static_cast<std::size_t>(slice[v]) * strides_[v];
    return s;
}

std::vector<double> CompletionOracle::transition_posterior(int t) const {
    std::vector<double> out(num_states_ * num_states_, 0.0);
    for_each_completion([&](const std::vector<std::vector<int>>& grid,
                            double w) {
        out[state_index(grid[t]) * num_states_ + state_index(grid[t + 1])] +=
            w / mass_;
    });
    return out;
}

std::vector<double> CompletionOracle::marginal(
    int t, std::span<const int> nodes) const {
    const int n = dbn_.num_vars();
    std::size_t size = 1;
    for (int node : nodes) size *= static_cast<std::size_t>(cards_[node % n]);
    std::vector<double> out(size, 0.0);
    for_each_completion([&](const std::vector<std::vector<int>>& grid,
                            double w) {
        std::size_t idx = 0;
        for (int node : nodes) {
            const int v = node % n;
            idx = idx * cards_[v] + grid[node < n ? t : t + 1][v];
        }
        out[idx] += w / mass_;
    });
    return out;
}

EssTable CompletionOracle::event_ess(const Event& event) const {
    EssTable tab = EssTable::zeros(event, cards_);
    const int len = static_cast<int>(evidence_.size());
    for (int t = 0; t + 1 < len; ++t) {
        bool in_range = true;
        for (const auto& term : event.terms) {
            const int s = t + 1 - term.lag;
            if (s < 0 || s >= len) in_range = false;
        }
        if (!in_range) continue;
        for_each_completion([&](const std::vector<std::vector<int>>& grid,
                                double w) {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < event.terms.size(); ++i) {
                const auto& term = event.terms[i];
                idx = idx * tab.cards[i] +
                      grid[t + 1 - term.lag][term.variable];
            }
            tab.table[idx] += w / mass_;
        });
        tab.total += 1.0;
    }
    return tab;
}

} // namespace dbn::test
