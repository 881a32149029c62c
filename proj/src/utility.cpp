#include "crl/utility.hpp"

#include <cmath>
#include <numeric>

#include "crl/errors.hpp"

namespace crl {

void UtilitySpec::check(const Network& net) const {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw InvariantError("scale mu must be positive");
    if (beta.size() != net.attribute_arity())
        throw InvariantError("beta has " + std::to_string(beta.size()) + " entries, network has " +
                             std::to_string(net.attribute_arity()) + " attributes");
}

double edge_utility(const Edge& e, std::span<const double> beta) {
    return std::inner_product(e.attributes.begin(), e.attributes.end(), beta.begin(), 0.0);
}

std::vector<double> edge_utilities(const Network& net, std::span<const double> beta) {
    std::vector<double> v(net.num_edges());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = edge_utility(net.edge(i), beta);
    return v;
}

namespace {
const Edge& edge_between(const Network& net, StateId a, StateId b) {
    auto idx = net.find_edge(a, b);
    if (!idx) throw InvariantError("path uses non-edge " + std::to_string(a) + "->" + std::to_string(b));
    return net.edge(*idx);
}
}  // namespace

double path_utility(const Network& net, std::span<const double> beta, std::span<const StateId> path) {
    double total = 0.0;
    for (std::size_t t = 0; t + 1 < path.size(); ++t)
        total += edge_utility(edge_between(net, path[t], path[t + 1]), beta);
    return total;
}

std::vector<double> path_attributes(const Network& net, std::span<const StateId> path) {
    std::vector<double> x(net.attribute_arity(), 0.0);
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        const Edge& e = edge_between(net, path[t], path[t + 1]);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] += e.attributes[j];
    }
    return x;
}

}  // namespace crl
