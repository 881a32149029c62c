#pragma once

#include <span>
#include <vector>

#include "crl/network.hpp"

namespace crl {

/// Linear-in-attributes deterministic utility v(s'|s) = beta . x(s, s'), with scale mu.
struct UtilitySpec {
    std::vector<double> beta;
    double mu = 1.0;

    /// Throws InvariantError when mu <= 0 or beta does not match the attribute arity.
    void check(const Network& net) const;
};

double edge_utility(const Edge& e, std::span<const double> beta);

/// v(s'|s) for every edge, in Network::edges() order.
std::vector<double> edge_utilities(const Network& net, std::span<const double> beta);

/// Total utility along a path; throws InvariantError on a non-edge.
double path_utility(const Network& net, std::span<const double> beta, std::span<const StateId> path);

/// Per-attribute totals x(tau) along a path.
std::vector<double> path_attributes(const Network& net, std::span<const StateId> path);

}  // namespace crl
