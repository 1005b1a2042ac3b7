#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbn/model.hpp"

namespace dbn {

/// Exact smoothing output on the enumerated joint state space.
struct ExactPosteriors {
    double loglik = 0.0;
    double slice0_loglik = 0.0;
    std::size_t num_states = 0;
    // phi[t] is the joint posterior over (state at t, state at t+1), flat
    // S*S with the t+1 state fastest; each table sums to 1.
    std::vector<std::vector<double>> transition_posteriors;
    std::vector<int> cards;

    /// Marginal over two-slice nodes (SliceNodes encoding: var v at t is v,
    /// at t+1 it is n+v) for transition t, row-major in the order given.
    std::vector<double> marginal(int t, std::span<const int> nodes) const;
};

/// Flat-state forward-backward: the classical exact solution, exponential
/// in the number of variables. Used as the oracle and as the exact E-step.
/// Markovian models only.
class FlatEngine {
  public:
    explicit FlatEngine(const Dbn& dbn, std::size_t state_bound = 1u << 20);

    std::size_t num_states() const { return num_states_; }

    /// Log-likelihood of an aligned sequence (first = total incl. slice 0,
    /// second = slice-0 evidence mass). Throws ZeroMassEvidence.
    std::pair<double, double> loglik(
        const std::vector<std::vector<int>>& seq) const;

    /// Full per-transition posterior tables; materializes S*S per
    /// transition, so only sensible for small nets.
    ExactPosteriors posteriors(const std::vector<std::vector<int>>& seq) const;

    /// Expected family counts accumulated over the sequences without
    /// materializing per-transition posteriors. families[i] follows the CPT
    /// layout of child i (parents row-major, child value fastest). Returns
    /// tables aligned with the model's children plus the total loglik and
    /// its slice-0 part.
    struct FamilyEss {
        std::vector<std::vector<double>> tables;
        double loglik = 0.0;
        double slice0_loglik = 0.0;
    };
    FamilyEss family_ess(
        const std::vector<std::vector<std::vector<int>>>& seqs) const;

  private:
    std::vector<double> state_prior(std::span<const int> slice0) const;
    void apply_evidence(std::vector<double>& vec,
                        std::span<const int> slice) const;
    // out[s'] = sum_s in[s] * M(s,s'), with evidence on s' applied.
    void forward_apply(const std::vector<double>& in,
                       std::span<const int> ev_slice,
                       std::vector<double>& out) const;
    // out[s] = sum_s' M(s,s') * in[s'] where in already carries evidence.
    void backward_apply(const std::vector<double>& in,
                        std::vector<double>& out) const;
    double transition_entry(std::size_t s, std::size_t s1) const;

    const Dbn& dbn_;
    std::size_t num_states_ = 1;
    std::vector<std::size_t> strides_; // var value = (s / stride) % card
    std::vector<int> cards_;
    std::vector<double> matrix_; // dense S*S cache when small enough
};

/// Convenience wrapper: exact per-transition posteriors plus exact
/// log-likelihood. Throws StateSpaceTooLarge above the bound.
ExactPosteriors exact_posteriors(const Dbn& dbn,
                                 const std::vector<std::vector<int>>& seq,
                                 std::size_t state_bound = 1u << 20);

} // namespace dbn
