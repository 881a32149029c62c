#include "crl/path_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "crl/errors.hpp"

namespace crl {

namespace {

PathSet select(const PathSet& ps, const std::vector<char>& keep) {
    PathSet out;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!keep[i]) continue;
        out.paths.push_back(ps.paths[i]);
        out.utilities.push_back(ps.utilities[i]);
        out.totals.push_back(ps.totals[i]);
    }
    return out;
}

}  // namespace

PathSet enumerate_paths(const Network& net, StateId origin, std::span<const double> beta,
                        const EnumerateOptions& opts) {
    if (origin >= net.num_states()) throw InvariantError("origin is not a valid state");
    if (!net.is_acyclic() && !opts.hop_limit)
        throw InvariantError("enumerating paths on a cyclic network needs a hop limit");
    if (beta.size() != net.attribute_arity()) throw InvariantError("beta does not match the attribute arity");

    const std::size_t K = net.constraint_arity();
    PathSet ps;
    std::vector<StateId> stack{origin};
    std::vector<double> util{0.0};
    std::vector<std::vector<Quanta>> cost{std::vector<Quanta>(K, 0)};

    // Explicit DFS: cursor[d] is the next out-edge to try at depth d.
    std::vector<std::size_t> cursor{0};
    while (!stack.empty()) {
        const StateId s = stack.back();
        if (s == net.destination()) {
            if (ps.size() >= opts.max_paths)
                throw PathOverflow("more than " + std::to_string(opts.max_paths) + " paths");
            ps.paths.push_back(Observation{stack});
            ps.utilities.push_back(util.back());
            ps.totals.push_back(cost.back());
            stack.pop_back(); util.pop_back(); cost.pop_back(); cursor.pop_back();
            continue;
        }
        const auto out = net.out_edges(s);
        const bool depth_ok = !opts.hop_limit || stack.size() - 1 < *opts.hop_limit;
        if (!depth_ok || cursor.back() >= out.size()) {
            stack.pop_back(); util.pop_back(); cost.pop_back(); cursor.pop_back();
            continue;
        }
        const Edge& e = out[cursor.back()++];
        double v = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) v += beta[j] * e.attributes[j];
        std::vector<Quanta> c = cost.back();
        for (std::size_t k = 0; k < K; ++k) c[k] += e.costs[k];
        stack.push_back(e.to);
        util.push_back(util.back() + v);
        cost.push_back(std::move(c));
        cursor.push_back(0);
    }
    return ps;
}

PathSet restrict_total(const Network& net, const PathSet& ps, std::span<const Quanta> alpha) {
    if (net.has_negative_costs())
        throw InvariantError("total-cost restriction needs nonnegative costs; use restrict_stepwise");
    if (alpha.size() != net.constraint_arity()) throw InvariantError("alpha has the wrong arity");
    std::vector<char> keep(ps.size(), 1);
    for (std::size_t i = 0; i < ps.size(); ++i)
        for (std::size_t k = 0; k < alpha.size(); ++k)
            if (ps.totals[i][k] > alpha[k]) keep[i] = 0;
    return select(ps, keep);
}

bool stepwise_feasible(const Network& net, std::span<const StateId> path, std::span<const Quanta> alpha) {
    if (alpha.size() != net.constraint_arity()) throw InvariantError("alpha has the wrong arity");
    std::vector<Quanta> acc(alpha.size(), 0);
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        const auto idx = net.find_edge(path[t], path[t + 1]);
        if (!idx) throw InvariantError("path uses a missing edge");
        const Edge& e = net.edge(*idx);
        for (std::size_t k = 0; k < acc.size(); ++k) {
            acc[k] += e.costs[k];
            if (acc[k] > alpha[k]) return false;
            if (net.is_reset(e.to, k)) acc[k] = 0;
        }
    }
    return true;
}

PathSet restrict_stepwise(const Network& net, const PathSet& ps, std::span<const Quanta> alpha) {
    std::vector<char> keep(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) keep[i] = stepwise_feasible(net, ps.paths[i].path, alpha);
    return select(ps, keep);
}

std::vector<double> mnl_over(const PathSet& ps, double mu) {
    if (ps.empty()) throw InvariantError("no feasible route in the path set");
    if (!(mu > 0.0)) throw InvariantError("mu must be positive");
    const double vmax = *std::max_element(ps.utilities.begin(), ps.utilities.end());
    std::vector<double> p(ps.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) sum += p[i] = std::exp((ps.utilities[i] - vmax) / mu);
    for (double& x : p) x /= sum;
    return p;
}

std::optional<std::size_t> find_path(const PathSet& ps, const Observation& obs) {
    auto it = std::find(ps.paths.begin(), ps.paths.end(), obs);
    if (it == ps.paths.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ps.paths.begin());
}

}  // namespace crl
