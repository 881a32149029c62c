#include "crl/rl.hpp"

#include <cmath>

namespace crl {

ValueTable solve_rl(const Network& net, const UtilitySpec& u, const SolverOptions& opts) {
    u.check(net);
    const auto graph = network_choice_graph(net);
    const auto util = edge_utilities(net, u.beta);
    ValueTable vt;
    vt.value = solve_values(graph, util, u.mu, opts);
    vt.z.resize(vt.value.size());
    for (std::size_t s = 0; s < vt.value.size(); ++s) vt.z[s] = std::exp(vt.value[s] / u.mu);
    return vt;
}

std::vector<double> link_probs(const Network& net, const UtilitySpec& u, const ValueTable& vt) {
    const auto graph = network_choice_graph(net);
    const auto util = edge_utilities(net, u.beta);
    return arc_probabilities(graph, util, vt.value, ScaleField{u.mu});
}

double path_prob_rl(const Network& net, const UtilitySpec& u, const ValueTable& vt, const Observation& obs) {
    net.validate(obs);
    double p = 1.0;
    for (std::size_t t = 0; t + 1 < obs.path.size(); ++t) {
        const auto idx = *net.find_edge(obs.path[t], obs.path[t + 1]);
        const double vs = vt.value[obs.path[t]];
        const double vn = vt.value[obs.path[t + 1]];
        if (std::isinf(vs) || std::isinf(vn)) return 0.0;
        p *= std::exp((edge_utility(net.edge(idx), u.beta) + vn - vs) / u.mu);
    }
    return p;
}

double path_log_prob_rl(const Network& net, const UtilitySpec& u, const ValueTable& vt,
                        const Observation& obs) {
    net.validate(obs);
    return (path_utility(net, u.beta, obs.path) - vt.value[obs.origin()]) / u.mu;
}

}  // namespace crl
