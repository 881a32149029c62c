#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "crl/network.hpp"
#include "crl/utility.hpp"
#include "crl/value_solver.hpp"

namespace crl {

/// A network state paired with the accumulated cost vector on arrival.
struct ExtendedState {
    StateId base = 0;
    std::vector<Quanta> acc;
};

struct ExtendedBuildOptions {
    std::size_t state_cap = 5'000'000;
};

/// Reachable (state, accumulated cost) pairs from (origin, 0) under bounds alpha.
/// Infeasible pairs are never stored. Transition semantics, per dimension k:
/// acc_k += c_k(s'|s); the move is pruned if acc_k > alpha_k; then acc_k = 0 if
/// s' is a reset state in dimension k. Two histories that reach the same pair
/// share one extended state.
class ExtendedStateSpace {
public:
    std::size_t size() const noexcept { return base_.size(); }
    std::size_t constraint_arity() const noexcept { return arity_; }
    std::span<const Quanta> alpha() const noexcept { return alpha_; }

    StateId base(std::size_t i) const { return base_[i]; }
    std::span<const Quanta> acc(std::size_t i) const {
        return std::span<const Quanta>(acc_).subspan(i * arity_, arity_);
    }
    ExtendedState state(std::size_t i) const;

    std::size_t origin_index() const noexcept { return 0; }
    StateId origin() const noexcept { return base_.front(); }
    const std::vector<std::size_t>& destination_indices() const noexcept { return destinations_; }
    bool acyclic() const noexcept { return graph_.acyclic; }

    /// Successor structure; arc edge ids index Network::edges().
    const ChoiceGraph& graph() const noexcept { return graph_; }

    std::optional<std::size_t> find(StateId base, std::span<const Quanta> acc) const;

    /// Extended indices along the lifted observation, or nullopt when some prefix
    /// violates the bounds. Throws InvariantError on a non-edge.
    std::optional<std::vector<std::size_t>> lift(const Network& net, const Observation& obs) const;

    /// Observed (max - min + 1) of the accumulated cost in each dimension.
    std::vector<Quanta> dimension_extents() const;

private:
    friend ExtendedStateSpace build_extended(const Network&, StateId, std::span<const Quanta>,
                                             const ExtendedBuildOptions&);

    struct KeyHash {
        std::size_t operator()(const std::vector<Quanta>& key) const noexcept;
    };

    std::size_t arity_ = 0;
    std::vector<Quanta> alpha_;
    std::vector<StateId> base_;
    std::vector<Quanta> acc_;
    std::vector<std::size_t> destinations_;
    ChoiceGraph graph_;
    std::unordered_map<std::vector<Quanta>, std::size_t, KeyHash> index_;
};

/// Breadth-first expansion from (origin, 0). Throws ResourceError past the state
/// cap and InvariantError when alpha has a negative entry or the wrong arity.
ExtendedStateSpace build_extended(const Network& net, StateId origin, std::span<const Quanta> alpha,
                                  const ExtendedBuildOptions& opts = {});

/// Value function on an extended space. node_mu is empty for a constant scale.
struct ExtendedValueTable {
    std::vector<double> z;
    std::vector<double> value;
    double mu = 1.0;
    std::vector<double> node_mu;

    ScaleField scale() const { return ScaleField{mu, node_mu}; }
};

/// Solves z = Mz + B on the extended space: backward induction when acyclic,
/// otherwise the same direct/iterative solve as the unconstrained model.
ExtendedValueTable solve_erl(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                             const SolverOptions& opts = {});

/// Choice probability of every extended arc, in graph().targets order.
std::vector<double> erl_link_probs(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                                   const ExtendedValueTable& evt);

/// Product of extended choice probabilities along the lifted path. Exactly 0
/// when any prefix violates the bounds.
double path_prob_crl(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                     const ExtendedValueTable& evt, const Observation& obs);

/// Closed form (v(tau) - V(origin)) / mu for a constant scale; -inf when infeasible.
double path_log_prob_crl(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                         const ExtendedValueTable& evt, const Observation& obs);

/// State-dependent dispersion for the constrained nested model.
struct NestedSpec {
    std::function<double(StateId base, std::span<const Quanta> acc)> scale;

    static NestedSpec constant(double mu);
    /// mu_by_state[s] > 0 overrides the fallback at base state s.
    static NestedSpec per_base(std::vector<double> mu_by_state, double fallback);
};

/// Solves V(s)/mu_s = ln sum exp((v + V(s'))/mu_s) by backward induction when
/// acyclic, else by value iteration. Throws SolveFailure on divergence.
ExtendedValueTable solve_nested(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                                const NestedSpec& nested, const SolverOptions& opts = {});

/// Sum of extended arc probabilities per network edge, weighted by the
/// probability of reaching each extended state from the origin.
std::vector<double> aggregate_edge_flows(const ExtendedStateSpace& xs, const Network& net,
                                         std::span<const double> arc_probs);

}  // namespace crl
