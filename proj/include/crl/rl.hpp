#pragma once

#include <vector>

#include "crl/network.hpp"
#include "crl/utility.hpp"
#include "crl/value_solver.hpp"

namespace crl {

/// Value function of the unconstrained model. value[s] = mu ln z[s]; states that
/// cannot reach the destination have z = 0 and value = -inf.
struct ValueTable {
    std::vector<double> z;
    std::vector<double> value;
};

/// Solves z = Mz + b on the network. Throws SolveFailure when the system has no
/// valid solution, which is the expected outcome on cyclic networks whose
/// utilities are not negative enough.
ValueTable solve_rl(const Network& net, const UtilitySpec& u, const SolverOptions& opts = {});

/// P(s'|s) for every edge, in Network::edges() order.
std::vector<double> link_probs(const Network& net, const UtilitySpec& u, const ValueTable& vt);

/// Product of link probabilities along the observation.
double path_prob_rl(const Network& net, const UtilitySpec& u, const ValueTable& vt, const Observation& obs);

/// Closed form (v(sigma) - V(s_0)) / mu of the path log-probability.
double path_log_prob_rl(const Network& net, const UtilitySpec& u, const ValueTable& vt,
                        const Observation& obs);

}  // namespace crl
