#include "dbn/exact.hpp"

#include <algorithm>
#include <cmath>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

// Dense transition matrices are cached up to this many entries (32 MB).
constexpr std::size_t kMatrixCells = std::size_t{1} << 22;

} // namespace

FlatEngine::FlatEngine(const Dbn& dbn, std::size_t state_bound) : dbn_(dbn) {
    if (dbn.window != 2 || dbn.structure.max_lag() > 1)
        throw DataError("FlatEngine: model must be Markovian (window 2)");
    const int n = dbn.num_vars();
    cards_ = dbn.cardinalities();
    strides_.assign(n, 1);
    for (int v = n - 2; v >= 0; --v)
        strides_[v] = strides_[v + 1] * static_cast<std::size_t>(cards_[v + 1]);
    for (int v = 0; v < n; ++v) {
        if (num_states_ > state_bound / static_cast<std::size_t>(cards_[v]))
            throw StateSpaceTooLarge(
                "joint state space exceeds bound of " +
                std::to_string(state_bound) + " states");
        num_states_ *= static_cast<std::size_t>(cards_[v]);
    }

    if (num_states_ * num_states_ <= kMatrixCells) {
        matrix_.resize(num_states_ * num_states_);
        for (std::size_t s = 0; s < num_states_; ++s)
            for (std::size_t s1 = 0; s1 < num_states_; ++s1)
                matrix_[s * num_states_ + s1] = transition_entry(s, s1);
    }
}

double FlatEngine::transition_entry(std::size_t s, std::size_t s1) const {
    double p = 1.0;
    for (int c = 0; c < dbn_.num_vars(); ++c) {
        const Cpt& cpt = dbn_.cpts[c];
        std::size_t row = 0;
        for (std::size_t i = 0; i < cpt.parents.size(); ++i) {
            const auto& pr = cpt.parents[i];
            const std::size_t src = pr.lag == 0 ? s1 : s;
            row = row * cpt.parent_cards[i] +
                  (src / strides_[pr.variable]) % cards_[pr.variable];
        }
        p *= cpt.at(row, static_cast<int>((s1 / strides_[c]) % cards_[c]));
        if (p == 0.0) return 0.0;
    }
    return p;
}

std::vector<double> FlatEngine::state_prior(std::span<const int> slice0) const {
    std::vector<double> vec(num_states_, 1.0);
    for (std::size_t s = 0; s < num_states_; ++s)
        for (int v = 0; v < dbn_.num_vars(); ++v) {
            const int val = static_cast<int>((s / strides_[v]) % cards_[v]);
            vec[s] *= dbn_.prior[0][v][val];
        }
    apply_evidence(vec, slice0);
    return vec;
}

void FlatEngine::apply_evidence(std::vector<double>& vec,
                                std::span<const int> slice) const {
    for (int v = 0; v < dbn_.num_vars(); ++v) {
        const int obs = slice[v];
        if (obs == kMissing) continue;
        for (std::size_t s = 0; s < num_states_; ++s)
            if (static_cast<int>((s / strides_[v]) % cards_[v]) != obs)
                vec[s] = 0.0;
    }
}

void FlatEngine::forward_apply(const std::vector<double>& in,
                               std::span<const int> ev_slice,
                               std::vector<double>& out) const {
    out.assign(num_states_, 0.0);
    if (!matrix_.empty()) {
        for (std::size_t s = 0; s < num_states_; ++s) {
            const double w = in[s];
            if (w == 0.0) continue;
            const double* row = matrix_.data() + s * num_states_;
            for (std::size_t s1 = 0; s1 < num_states_; ++s1)
                out[s1] += w * row[s1];
        }
    } else {
        for (std::size_t s = 0; s < num_states_; ++s) {
            const double w = in[s];
            if (w == 0.0) continue;
            for (std::size_t s1 = 0; s1 < num_states_; ++s1)
                out[s1] += w * transition_entry(s, s1);
        }
    }
    apply_evidence(out, ev_slice);
}

void FlatEngine::backward_apply(const std::vector<double>& in,
                                std::vector<double>& out) const {
    out.assign(num_states_, 0.0);
    if (!matrix_.empty()) {
        for (std::size_t s = 0; s < num_states_; ++s) {
            const double* row = matrix_.data() + s * num_states_;
            double acc = 0.0;
            for (std::size_t s1 = 0; s1 < num_states_; ++s1)
                acc += row[s1] * in[s1];
            out[s] = acc;
        }
    } else {
        for (std::size_t s = 0; s < num_states_; ++s) {
            double acc = 0.0;
            for (std::size_t s1 = 0; s1 < num_states_; ++s1) {
                if (in[s1] == 0.0) continue;
                acc += transition_entry(s, s1) * in[s1];
            }
            out[s] = acc;
        }
    }
}

std::pair<double, double> FlatEngine::loglik(
    const std::vector<std::vector<int>>& seq) const {
    const int len = static_cast<int>(seq.size());
    if (len < 2) throw DataError("FlatEngine: sequence shorter than 2 slices");
    std::vector<double> alpha = state_prior(seq[0]);
    double c0 = 0.0;
    for (double x : alpha) c0 += x;
    if (!(c0 > 0.0))
        throw ZeroMassEvidence(0, "evidence at slice 0 has zero mass");
    for (double& x : alpha) x /= c0;
    double ll = std::log(c0);
    const double slice0 = ll;

    std::vector<double> next;
    for (int t = 1; t < len; ++t) {
        forward_apply(alpha, seq[t], next);
        double c = 0.0;
        for (double x : next) c += x;
        if (!(c > 0.0))
            throw ZeroMassEvidence(t, "evidence at slice " +
                                          std::to_string(t) +
                                          " has zero mass");
        for (double& x : next) x /= c;
        ll += std::log(c);
        alpha.swap(next);
    }
    return {ll, slice0};
}

ExactPosteriors FlatEngine::posteriors(
    const std::vector<std::vector<int>>& seq) const {
    const int len = static_cast<int>(seq.size());
    if (len < 2) throw DataError("FlatEngine: sequence shorter than 2 slices");

    // Scaled forward pass, keeping every normalized message.
    std::vector<std::vector<double>> alphas(len);
    std::vector<double> scales(len);
    alphas[0] = state_prior(seq[0]);
    double c0 = 0.0;
    for (double x : alphas[0]) c0 += x;
    if (!(c0 > 0.0))
        throw ZeroMassEvidence(0, "evidence at slice 0 has zero mass");
    for (double& x : alphas[0]) x /= c0;
    scales[0] = c0;
    for (int t = 1; t < len; ++t) {
        forward_apply(alphas[t - 1], seq[t], alphas[t]);
        double c = 0.0;
        for (double x : alphas[t]) c += x;
        if (!(c > 0.0))
            throw ZeroMassEvidence(t, "evidence at slice " +
                                          std::to_string(t) +
                                          " has zero mass");
        for (double& x : alphas[t]) x /= c;
        scales[t] = c;
    }

    ExactPosteriors out;
    out.num_states = num_states_;
    out.cards = cards_;
    out.slice0_loglik = std::log(scales[0]);
    out.loglik = 0.0;
    for (int t = 0; t < len; ++t) out.loglik += std::log(scales[t]);
    out.transition_posteriors.assign(
        len - 1, std::vector<double>(num_states_ * num_states_, 0.0));

    // Backward pass with the forward scales; the per-transition posterior
    // alpha(s) * M(s,s') * ev(s') * beta(s') / c then sums to one exactly.
    std::vector<double> beta(num_states_, 1.0), tmp(num_states_), prev;
    for (int t = len - 2; t >= 0; --t) {
        for (std::size_t s1 = 0; s1 < num_states_; ++s1) tmp[s1] = beta[s1];
        apply_evidence(tmp, seq[t + 1]);
        for (double& x : tmp) x /= scales[t + 1];
        auto& phi = out.transition_posteriors[t];
        for (std::size_t s = 0; s < num_states_; ++s) {
            const double w = alphas[t][s];
            if (w == 0.0) continue;
            for (std::size_t s1 = 0; s1 < num_states_; ++s1) {
                const double m = matrix_.empty()
                                     ? transition_entry(s, s1)
                                     : matrix_[s * num_states_ + s1];
                phi[s * num_states_ + s1] = w * m * tmp[s1];
            }
        }
        backward_apply(tmp, prev);
        beta.swap(prev);
    }
    return out;
}

FlatEngine::FamilyEss FlatEngine::family_ess(
    const std::vector<std::vector<std::vector<int>>>& seqs) const {
    FamilyEss out;
    const int n = dbn_.num_vars();
    out.tables.resize(n);
    for (int c = 0; c < n; ++c)
        out.tables[c].assign(dbn_.cpts[c].expected_size(), 0.0);

    // Accumulated alpha (x) scaled-beta outer products; family counts come
    // from one final sweep against the transition model.
    std::vector<double> phi_acc(num_states_ * num_states_, 0.0);
    for (const auto& seq : seqs) {
        const int len = static_cast<int>(seq.size());
        std::vector<std::vector<double>> alphas(len);
        std::vector<double> scales(len);
        alphas[0] = state_prior(seq[0]);
        double c0 = 0.0;
        for (double x : alphas[0]) c0 += x;
        if (!(c0 > 0.0))
            throw ZeroMassEvidence(0, "evidence at slice 0 has zero mass");
        for (double& x : alphas[0]) x /= c0;
        scales[0] = c0;
        for (int t = 1; t < len; ++t) {
            forward_apply(alphas[t - 1], seq[t], alphas[t]);
            double c = 0.0;
            for (double x : alphas[t]) c += x;
            if (!(c > 0.0))
                throw ZeroMassEvidence(t, "evidence at slice " +
                                              std::to_string(t) +
                                              " has zero mass");
            for (double& x : alphas[t]) x /= c;
            scales[t] = c;
        }
        for (int t = 0; t < len; ++t) out.loglik += std::log(scales[t]);
        out.slice0_loglik += std::log(scales[0]);

        std::vector<double> beta(num_states_, 1.0), tmp(num_states_), prev;
        for (int t = len - 2; t >= 0; --t) {
            for (std::size_t s1 = 0; s1 < num_states_; ++s1)
                tmp[s1] = beta[s1];
            apply_evidence(tmp, seq[t + 1]);
            for (double& x : tmp) x /= scales[t + 1];
            for (std::size_t s = 0; s < num_states_; ++s) {
                const double w = alphas[t][s];
                if (w == 0.0) continue;
                double* acc = phi_acc.data() + s * num_states_;
                for (std::size_t s1 = 0; s1 < num_states_; ++s1)
                    acc[s1] += w * tmp[s1];
            }
            backward_apply(tmp, prev);
            beta.swap(prev);
        }
    }

    for (std::size_t s = 0; s < num_states_; ++s) {
        for (std::size_t s1 = 0; s1 < num_states_; ++s1) {
            const double w = phi_acc[s * num_states_ + s1];
            if (w == 0.0) continue;
            const double m = matrix_.empty() ? transition_entry(s, s1)
                                             : matrix_[s * num_states_ + s1];
            if (m == 0.0) continue;
            const double mass = w * m;
            for (int c = 0; c < n; ++c) {
                const Cpt& cpt = dbn_.cpts[c];
                std::size_t row = 0;
                for (std::size_t i = 0; i < cpt.parents.size(); ++i) {
                    const auto& pr = cpt.parents[i];
                    const std::size_t src = pr.lag == 0 ? s1 : s;
                    row = row * cpt.parent_cards[i] +
                          (src / strides_[pr.variable]) % cards_[pr.variable];
                }
                const int val = static_cast<int>((s1 / strides_[c]) %
                                                 cards_[c]);
                out.tables[c][row * cpt.child_card + val] += mass;
            }
        }
    }
    return out;
}

std::vector<double> ExactPosteriors::marginal(
    int t, std::span<const int> nodes) const {
    const int n = static_cast<int>(cards.size());
    std::vector<std::size_t> strides(n, 1);
    for (int v = n - 2; v >= 0; --v)
        strides[v] = strides[v + 1] * static_cast<std::size_t>(cards[v + 1]);

    std::size_t out_size = 1;
    for (int node : nodes)
        out_size *= static_cast<std::size_t>(cards[node % n]);
    std::vector<double> out(out_size, 0.0);
    const auto& phi = transition_posteriors[t];
    for (std::size_t s = 0; s < num_states; ++s)
        for (std::size_t s1 = 0; s1 < num_states; ++s1) {
            const double w = phi[s * num_states + s1];
            if (w == 0.0) continue;
            std::size_t idx = 0;
            for (int node : nodes) {
                const int v = node % n;
                const std::size_t src = node < n ? s : s1;
                idx = idx * cards[v] + (src / strides[v]) % cards[v];
            }
            out[idx] += w;
        }
    double total = 0.0;
    for (double x : out) total += x;
    if (total > 0.0)
        for (double& x : out) x /= total;
    return out;
}

ExactPosteriors exact_posteriors(const Dbn& dbn,
                                 const std::vector<std::vector<int>>& seq,
                                 std::size_t state_bound) {
    FlatEngine engine(dbn, state_bound);
    return engine.posteriors(seq);
}

} // namespace dbn
