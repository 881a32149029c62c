#include "crl/crl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "crl/errors.hpp"

namespace crl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Applies one transition to `acc`; false when the move breaks a bound.
bool advance(const Network& net, const Edge& e, std::span<const Quanta> alpha, std::vector<Quanta>& acc) {
    for (std::size_t k = 0; k < acc.size(); ++k) {
        acc[k] += e.costs[k];
        if (acc[k] > alpha[k]) return false;
    }
    for (std::size_t k = 0; k < acc.size(); ++k)
        if (net.is_reset(e.to, k)) acc[k] = 0;
    return true;
}

std::size_t arc_between(const ChoiceGraph& g, std::size_t from, std::size_t to) {
    for (std::size_t a = g.offsets[from]; a < g.offsets[from + 1]; ++a)
        if (g.targets[a] == to) return a;
    throw InvariantError("extended arc not found");
}

}  // namespace

std::size_t ExtendedStateSpace::KeyHash::operator()(const std::vector<Quanta>& key) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (Quanta q : key) {
        h ^= static_cast<std::size_t>(q) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

ExtendedState ExtendedStateSpace::state(std::size_t i) const {
    auto a = acc(i);
    return ExtendedState{base_[i], std::vector<Quanta>(a.begin(), a.end())};
}

std::optional<std::size_t> ExtendedStateSpace::find(StateId base, std::span<const Quanta> acc) const {
    std::vector<Quanta> key;
    key.reserve(arity_ + 1);
    key.push_back(base);
    key.insert(key.end(), acc.begin(), acc.end());
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::vector<std::size_t>> ExtendedStateSpace::lift(const Network& net, const Observation& obs) const {
    net.validate(obs);
    if (obs.origin() != origin()) throw InvariantError("observation starts at a different origin");
    std::vector<std::size_t> lifted{origin_index()};
    std::vector<Quanta> acc(arity_, 0);
    for (std::size_t t = 0; t + 1 < obs.path.size(); ++t) {
        const Edge& e = net.edge(*net.find_edge(obs.path[t], obs.path[t + 1]));
        if (!advance(net, e, alpha_, acc)) return std::nullopt;
        auto next = find(e.to, acc);
        if (!next) return std::nullopt;
        lifted.push_back(*next);
    }
    return lifted;
}

std::vector<Quanta> ExtendedStateSpace::dimension_extents() const {
    std::vector<Quanta> lo(arity_, std::numeric_limits<Quanta>::max());
    std::vector<Quanta> hi(arity_, std::numeric_limits<Quanta>::min());
    for (std::size_t i = 0; i < size(); ++i) {
        auto a = acc(i);
        for (std::size_t k = 0; k < arity_; ++k) {
            lo[k] = std::min(lo[k], a[k]);
            hi[k] = std::max(hi[k], a[k]);
        }
    }
    std::vector<Quanta> extent(arity_, 0);
    for (std::size_t k = 0; k < arity_; ++k) extent[k] = size() ? hi[k] - lo[k] + 1 : 0;
    return extent;
}

ExtendedStateSpace build_extended(const Network& net, StateId origin, std::span<const Quanta> alpha,
                                  const ExtendedBuildOptions& opts) {
    const std::size_t arity = net.constraint_arity();
    if (alpha.size() != arity)
        throw InvariantError("alpha has " + std::to_string(alpha.size()) + " entries, network has " +
                             std::to_string(arity) + " constraint dimensions");
    for (Quanta a : alpha)
        if (a < 0) throw InvariantError("alpha must be nonnegative in every dimension");
    if (origin >= net.num_states()) throw InvariantError("origin is not a valid state");

    ExtendedStateSpace xs;
    xs.arity_ = arity;
    xs.alpha_.assign(alpha.begin(), alpha.end());

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> succ;  // (target, edge)
    auto intern = [&](StateId base, const std::vector<Quanta>& acc) -> std::pair<std::size_t, bool> {
        std::vector<Quanta> key;
        key.reserve(arity + 1);
        key.push_back(base);
        key.insert(key.end(), acc.begin(), acc.end());
        auto [it, inserted] = xs.index_.try_emplace(std::move(key), xs.base_.size());
        if (inserted) {
            if (xs.base_.size() >= opts.state_cap) {
                std::ostringstream msg;
                msg << "extended state space exceeds the cap of " << opts.state_cap << " states; extents per dimension:";
                for (Quanta e : xs.dimension_extents()) msg << ' ' << e;
                throw ResourceError(msg.str());
            }
            xs.base_.push_back(base);
            xs.acc_.insert(xs.acc_.end(), acc.begin(), acc.end());
            succ.emplace_back();
        }
        return {it->second, inserted};
    };

    intern(origin, std::vector<Quanta>(arity, 0));
    std::vector<Quanta> acc(arity);
    for (std::size_t head = 0; head < xs.base_.size(); ++head) {
        const StateId s = xs.base_[head];
        if (s == net.destination()) continue;
        const std::size_t first = net.first_out_edge(s);
        const auto out = net.out_edges(s);
        for (std::size_t i = 0; i < out.size(); ++i) {
            auto cur = xs.acc(head);
            acc.assign(cur.begin(), cur.end());
            if (!advance(net, out[i], alpha, acc)) continue;
            auto [target, inserted] = intern(out[i].to, acc);
            succ[head].emplace_back(target, first + i);
        }
    }

    ChoiceGraph& g = xs.graph_;
    const std::size_t n = xs.base_.size();
    g.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + succ[i].size();
    g.targets.reserve(g.offsets[n]);
    g.edge_ids.reserve(g.offsets[n]);
    for (const auto& list : succ)
        for (auto [t, e] : list) {
            g.targets.push_back(static_cast<std::uint32_t>(t));
            g.edge_ids.push_back(e);
        }
    g.terminal.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (xs.base_[i] == net.destination()) {
            g.terminal[i] = 1;
            xs.destinations_.push_back(i);
        }
    g.compute_order();
    return xs;
}

ExtendedValueTable solve_erl(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                             const SolverOptions& opts) {
    u.check(net);
    const auto util = edge_utilities(net, u.beta);
    ExtendedValueTable evt;
    evt.mu = u.mu;
    evt.value = solve_values(xs.graph(), util, u.mu, opts);
    evt.z.resize(evt.value.size());
    for (std::size_t i = 0; i < evt.value.size(); ++i) evt.z[i] = std::exp(evt.value[i] / u.mu);
    return evt;
}

std::vector<double> erl_link_probs(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                                   const ExtendedValueTable& evt) {
    const auto util = edge_utilities(net, u.beta);
    return arc_probabilities(xs.graph(), util, evt.value, evt.scale());
}

double path_prob_crl(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                     const ExtendedValueTable& evt, const Observation& obs) {
    const auto lifted = xs.lift(net, obs);
    if (!lifted) return 0.0;
    const auto& g = xs.graph();
    const auto util = edge_utilities(net, u.beta);
    const auto scale = evt.scale();
    double p = 1.0;
    for (std::size_t t = 0; t + 1 < lifted->size(); ++t) {
        const std::size_t from = (*lifted)[t], to = (*lifted)[t + 1];
        if (evt.value[from] == kNegInf || evt.value[to] == kNegInf) return 0.0;
        const std::size_t a = arc_between(g, from, to);
        p *= std::exp((util[g.edge_ids[a]] + evt.value[to] - evt.value[from]) / scale.at(from));
    }
    return p;
}

double path_log_prob_crl(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                         const ExtendedValueTable& evt, const Observation& obs) {
    const auto lifted = xs.lift(net, obs);
    if (!lifted || evt.value[xs.origin_index()] == kNegInf) return kNegInf;
    return (path_utility(net, u.beta, obs.path) - evt.value[xs.origin_index()]) / u.mu;
}

NestedSpec NestedSpec::constant(double mu) {
    return NestedSpec{[mu](StateId, std::span<const Quanta>) { return mu; }};
}

NestedSpec NestedSpec::per_base(std::vector<double> mu_by_state, double fallback) {
    return NestedSpec{[table = std::move(mu_by_state), fallback](StateId s, std::span<const Quanta>) {
        return s < table.size() && table[s] > 0.0 ? table[s] : fallback;
    }};
}

ExtendedValueTable solve_nested(const ExtendedStateSpace& xs, const Network& net, const UtilitySpec& u,
                                const NestedSpec& nested, const SolverOptions& opts) {
    u.check(net);
    ExtendedValueTable evt;
    evt.mu = u.mu;
    evt.node_mu.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        evt.node_mu[i] = nested.scale(xs.base(i), xs.acc(i));
        if (!(evt.node_mu[i] > 0.0) || !std::isfinite(evt.node_mu[i]))
            throw InvariantError("nested scale must be positive at every extended state");
    }
    const auto util = edge_utilities(net, u.beta);
    evt.value = solve_nested_values(xs.graph(), util, evt.scale(), opts);
    evt.z.resize(evt.value.size());
    for (std::size_t i = 0; i < evt.value.size(); ++i) evt.z[i] = std::exp(evt.value[i] / evt.node_mu[i]);
    return evt;
}

std::vector<double> aggregate_edge_flows(const ExtendedStateSpace& xs, const Network& net,
                                         std::span<const double> arc_probs) {
    const auto flows = arc_flows(xs.graph(), arc_probs, xs.origin_index());
    std::vector<double> per_edge(net.num_edges(), 0.0);
    for (std::size_t a = 0; a < flows.size(); ++a) per_edge[xs.graph().edge_ids[a]] += flows[a];
    return per_edge;
}

}  // namespace crl
