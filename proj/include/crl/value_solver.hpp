#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crl/network.hpp"

namespace crl {

/// Settings shared by every value-function solve.
struct SolverOptions {
    /// Cyclic systems with at most this many live states use a sparse LU solve,
    /// larger ones use value iteration.
    std::size_t direct_cutoff = 20000;
    double vi_tolerance = 1e-10;
    std::size_t vi_max_iterations = 10000;
    /// Any z component above this bound during value iteration counts as divergence.
    double divergence_bound = 1e30;
    /// Accepted relative residual of z = Mz + b after a direct solve.
    double residual_tolerance = 1e-8;
};

/// Compressed successor structure over which a logit value function is solved.
/// Each arc carries the index of the network edge that supplies its utility.
/// Used for the base network (unconstrained model) and for extended spaces.
struct ChoiceGraph {
    std::vector<std::size_t> offsets;   // size num_nodes() + 1
    std::vector<std::uint32_t> targets;
    std::vector<std::size_t> edge_ids;
    std::vector<char> terminal;
    std::vector<std::uint32_t> topo_order;  // filled when acyclic
    bool acyclic = false;

    std::size_t num_nodes() const noexcept { return terminal.size(); }
    std::size_t num_arcs() const noexcept { return targets.size(); }

    /// Fills topo_order and acyclic from the arcs.
    void compute_order();
    /// Nodes from which some terminal is reachable.
    std::vector<char> live_nodes() const;
};

/// The base network viewed as a choice graph whose single terminal is the destination.
ChoiceGraph network_choice_graph(const Network& net);

/// Scale parameter: either one constant or one value per graph node.
struct ScaleField {
    double constant = 1.0;
    std::span<const double> per_node{};

    double at(std::size_t node) const { return per_node.empty() ? constant : per_node[node]; }
};

/// Solves V(s) = mu ln sum_{s'} exp((v(s'|s) + V(s'))/mu), V = 0 on terminals.
/// Nodes that cannot reach a terminal get -inf. Acyclic graphs use backward
/// induction in log space; cyclic graphs solve z = Mz + b directly or by value
/// iteration. Throws SolveFailure when no valid solution exists.
std::vector<double> solve_values(const ChoiceGraph& g, std::span<const double> edge_util, double mu,
                                 const SolverOptions& opts = {});

/// Same recursion with a node-dependent scale. Cyclic graphs use value iteration.
std::vector<double> solve_nested_values(const ChoiceGraph& g, std::span<const double> edge_util,
                                        ScaleField mu, const SolverOptions& opts = {});

/// Logit choice probability of every arc given the values. Rows of nodes with a
/// finite value sum to one; arcs into -inf nodes get exactly zero.
std::vector<double> arc_probabilities(const ChoiceGraph& g, std::span<const double> edge_util,
                                      std::span<const double> values, ScaleField mu);

/// max_s |z(s) - sum M z - b(s)| / max(1, |z|_inf), evaluated without overflow.
double relative_residual(const ChoiceGraph& g, std::span<const double> edge_util,
                         std::span<const double> values, double mu);

/// Expected number of traversals of each arc by a traveller leaving `origin`.
std::vector<double> arc_flows(const ChoiceGraph& g, std::span<const double> arc_probs, std::size_t origin);

/// For every attribute j, w_j(s) = d ln z(s) / d beta_j, i.e. the expected
/// downstream total of x_j / mu under the arc probabilities. Returned row-major:
/// result[s * A + j]. Equivalent to solving (I - M) dz = (dM) z scaled by 1/z.
std::vector<double> value_sensitivities(const ChoiceGraph& g, const Network& net,
                                        std::span<const double> arc_probs,
                                        std::span<const double> values, double mu);

}  // namespace crl
