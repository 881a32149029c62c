#include "crl/simulation.hpp"

#include <cmath>
#include <random>

#include "crl/errors.hpp"
#include "crl/path_oracle.hpp"
#include "crl/rl.hpp"

namespace crl {

namespace {

constexpr std::size_t kAcceptanceWindow = 10000;
constexpr double kMinAcceptance = 1e-4;

std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

// Walks the choice graph from `start` by inverse-CDF draws; returns the visited nodes.
std::vector<std::size_t> walk(const ChoiceGraph& g, std::span<const double> probs, std::size_t start,
                              std::size_t max_hops, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::size_t> nodes{start};
    std::size_t s = start;
    while (!g.terminal[s]) {
        if (nodes.size() > max_hops)
            throw InvariantError("simulated route exceeded " + std::to_string(max_hops) + " hops");
        const double r = unif(rng);
        double cum = 0.0;
        std::size_t pick = g.num_arcs();
        for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) {
            if (probs[a] <= 0.0) continue;
            pick = a;
            cum += probs[a];
            if (r < cum) break;
        }
        if (pick == g.num_arcs()) throw InvariantError("simulation reached a state with no route to the destination");
        s = g.targets[pick];
        nodes.push_back(s);
    }
    return nodes;
}

}  // namespace

std::vector<Observation> simulate(const Network& net, const UtilitySpec& u, std::span<const Quanta> alpha,
                                  const SimConfig& cfg, std::optional<StateId> origin, SimStats* stats) {
    if (cfg.n_obs == 0) throw InvariantError("n_obs must be positive");
    if (cfg.max_hops == 0) throw InvariantError("max_hops must be positive");
    u.check(net);
    const StateId o = resolve_origin(net, origin);
    const auto util = edge_utilities(net, u.beta);
    SimStats local;
    std::vector<Observation> out;
    out.reserve(cfg.n_obs);

    if (cfg.model == Model::RL) {
        if (cfg.rejection && alpha.size() != net.constraint_arity())
            throw InvariantError("alpha must have one entry per constraint dimension");
        const auto graph = network_choice_graph(net);
        const auto values = solve_values(graph, util, u.mu, cfg.solver);
        if (std::isinf(values[o])) throw InvariantError("origin cannot reach the destination");
        const auto probs = arc_probabilities(graph, util, values, ScaleField{u.mu});
        for (std::size_t i = 0; i < cfg.n_obs; ++i) {
            auto rng = stream_for(cfg.seed, i);
            for (;;) {
                const auto nodes = walk(graph, probs, o, cfg.max_hops, rng);
                ++local.draws;
                Observation obs;
                obs.path.assign(nodes.begin(), nodes.end());
                if (!cfg.rejection || stepwise_feasible(net, obs.path, alpha)) {
                    out.push_back(std::move(obs));
                    break;
                }
                ++local.rejected;
                const std::size_t accepted = local.draws - local.rejected;
                if (local.draws >= kAcceptanceWindow &&
                    static_cast<double>(accepted) < kMinAcceptance * static_cast<double>(local.draws))
                    throw ResourceError("rejection sampling accepted " + std::to_string(accepted) + " of " +
                                        std::to_string(local.draws) + " draws; the bound is too tight for RL generation");
            }
        }
    } else {
        const auto xs = build_extended(net, o, alpha, cfg.build);
        const ExtendedValueTable evt =
            cfg.model == Model::CRL ? solve_erl(xs, net, u, cfg.solver)
                                    : solve_nested(xs, net, u, cfg.nested.value_or(NestedSpec::constant(u.mu)),
                                                   cfg.solver);
        if (std::isinf(evt.value[xs.origin_index()]))
            throw InvariantError("no route from the origin satisfies the bounds");
        const auto probs = arc_probabilities(xs.graph(), util, evt.value, evt.scale());
        for (std::size_t i = 0; i < cfg.n_obs; ++i) {
            auto rng = stream_for(cfg.seed, i);
            const auto nodes = walk(xs.graph(), probs, xs.origin_index(), cfg.max_hops, rng);
            ++local.draws;
            Observation obs;
            obs.path.reserve(nodes.size());
            for (std::size_t x : nodes) obs.path.push_back(xs.base(x));
            out.push_back(std::move(obs));
        }
    }
    if (stats) *stats = local;
    return out;
}

}  // namespace crl
