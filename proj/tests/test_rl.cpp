#include <doctest.h>

#include <cmath>

#include "crl/errors.hpp"
#include "crl/path_oracle.hpp"
#include "crl/rl.hpp"
#include "support.hpp"

using namespace crl;

namespace {

// ln sum over enumerated paths of exp(v / mu)
double oracle_log_z(const PathSet& ps, double mu) {
    double m = -INFINITY;
    for (double v : ps.utilities) m = std::max(m, v / mu);
    double s = 0.0;
    for (double v : ps.utilities) s += std::exp(v / mu - m);
    return m + std::log(s);
}

}  // namespace

TEST_CASE("unconstrained model on the toy network") {
    const Network net = load_network_file(testing::data_path("toy_four_path.net"));
    const UtilitySpec u{{-2.0}, 1.0};
    const auto vt = solve_rl(net, u);
    const auto ps = enumerate_paths(net, 1, u.beta);
    const auto oracle = mnl_over(ps, 1.0);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        CHECK(std::abs(path_prob_rl(net, u, vt, ps.paths[i]) - oracle[i]) < 1e-12);
        CHECK(std::abs(std::exp(path_log_prob_rl(net, u, vt, ps.paths[i])) - oracle[i]) < 1e-12);
    }
    const double table[] = {0.083, 0.610, 0.224, 0.083};
    const std::vector<Observation> order{{{1, 2}}, {{1, 3, 5, 2}}, {{1, 3, 4, 5, 2}}, {{1, 3, 4, 6, 2}}};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(path_prob_rl(net, u, vt, order[i]) - table[i]) < 1e-3);
    CHECK(vt.z[2] == 1.0);
    CHECK(vt.value[2] == 0.0);
    // state 0 is isolated
    CHECK(vt.z[0] == 0.0);
    CHECK(std::isinf(vt.value[0]));
}

TEST_CASE("origin value equals the log-sum over enumerated paths on random DAGs") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 30; ++rep) {
        testing::RandomNetOptions o;
        o.nodes = 11;
        const Network net = testing::random_network(rng, o);
        const UtilitySpec u{testing::random_beta(rng, 2, -2.0, 1.0), 0.5 + rep % 3};
        const auto vt = solve_rl(net, u);
        const auto ps = enumerate_paths(net, 0, u.beta);
        CHECK(testing::rel_err(vt.value[0] / u.mu, oracle_log_z(ps, u.mu)) < 1e-10);
        const auto p = link_probs(net, u, vt);
        for (StateId s = 0; s < net.num_states(); ++s) {
            if (net.out_degree(s) == 0 || std::isinf(vt.value[s])) continue;
            double row = 0.0;
            for (std::size_t i = 0; i < net.out_degree(s); ++i) row += p[net.first_out_edge(s) + i];
            CHECK(std::abs(row - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("cyclic networks: convergent utilities match the hop-limited oracle") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        testing::RandomNetOptions o;
        o.nodes = 7;
        o.cyclic = true;
        o.density = 0.4;
        const Network net = testing::random_network(rng, o);
        // every edge utility is at most -3, so walks longer than 40 edges are negligible
        const UtilitySpec u{{-1.5, -1.5}, 1.0};
        std::vector<double> shifted = u.beta;
        const auto vt = solve_rl(net, u);
        const auto ps = enumerate_paths(net, 0, u.beta, EnumerateOptions{5'000'000, 14});
        if (net.is_acyclic()) continue;
        CHECK(vt.value[0] >= oracle_log_z(ps, 1.0) - 1e-12);
        CHECK(std::abs(vt.value[0] - oracle_log_z(ps, 1.0)) < 1e-6);
        const auto g = network_choice_graph(net);
        CHECK(relative_residual(g, edge_utilities(net, u.beta), vt.value, 1.0) <= 1e-8);
    }
}

TEST_CASE("direct and iterative cyclic solves agree") {
    std::mt19937_64 rng(9);
    testing::RandomNetOptions o;
    o.nodes = 10;
    o.cyclic = true;
    const Network net = testing::random_network(rng, o);
    const UtilitySpec u{{-1.0, -0.8}, 1.0};
    const auto direct = solve_rl(net, u);
    SolverOptions vi;
    vi.direct_cutoff = 0;
    const auto iter = solve_rl(net, u, vi);
    for (std::size_t s = 0; s < net.num_states(); ++s) {
        if (std::isinf(direct.value[s])) {
            CHECK(std::isinf(iter.value[s]));
            continue;
        }
        CHECK(std::abs(direct.value[s] - iter.value[s]) < 1e-8);
    }
}

TEST_CASE("large positive utilities on a cycle make the unconstrained solve fail") {
    const Network net = NetworkBuilder(3, 2, {"x"})
                            .add_edge(0, 1, {1.0})
                            .add_edge(1, 0, {1.0})
                            .add_edge(1, 2, {1.0})
                            .build();
    const UtilitySpec u{{2.0}, 1.0};
    CHECK_THROWS_AS(solve_rl(net, u), SolveFailure);
    SolverOptions vi;
    vi.direct_cutoff = 0;
    CHECK_THROWS_AS(solve_rl(net, u, vi), SolveFailure);
    // exp(-1)^2 < 1: the same cycle is fine with negative utilities
    CHECK_NOTHROW(solve_rl(net, UtilitySpec{{-1.0}, 1.0}));
}

TEST_CASE("utility spec is checked") {
    const Network net = load_network_file(testing::data_path("toy_four_path.net"));
    CHECK_THROWS_AS(solve_rl(net, UtilitySpec{{-2.0, 1.0}, 1.0}), InvariantError);
    CHECK_THROWS_AS(solve_rl(net, UtilitySpec{{-2.0}, 0.0}), InvariantError);
}
