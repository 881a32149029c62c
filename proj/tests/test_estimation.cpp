#include <doctest.h>

#include <cmath>

#include "crl/errors.hpp"
#include "crl/estimation.hpp"
#include "crl/path_oracle.hpp"
#include "crl/simulation.hpp"
#include "support.hpp"

using namespace crl;

namespace {

ModelSpec rl_spec() { return ModelSpec{Model::RL, 1.0, {}, std::nullopt, {}, {}}; }
ModelSpec crl_spec(std::vector<Quanta> alpha, double mu = 1.0) {
    return ModelSpec{Model::CRL, mu, std::move(alpha), std::nullopt, {}, {}};
}

// Sum over observations of ln MNL probability over the stepwise-feasible path set.
double oracle_loglik(const Network& net, std::span<const double> beta, std::span<const Quanta> alpha,
                     std::span<const Observation> obs) {
    const auto feas = restrict_stepwise(net, enumerate_paths(net, resolve_origin(net, std::nullopt), beta), alpha);
    const auto p = mnl_over(feas, 1.0);
    double ll = 0.0;
    for (const auto& o : obs) ll += std::log(p[*find_path(feas, o)]);
    return ll;
}

}  // namespace

TEST_CASE("log-likelihood on the toy network") {
    const Network net = load_network_file(testing::data_path("toy_four_path.net"));
    const std::vector<double> beta{-2.0};
    const std::vector<Observation> obs{{{1, 3, 5, 2}}};
    const auto ll = loglik(net, crl_spec({5}), beta, obs);
    CHECK(std::abs(ll.total - std::log(0.731)) < 2e-3);
    CHECK(std::abs(ll.total - (-std::log1p(std::exp(-1.0)))) < 1e-12);
    CHECK(loglik(net, crl_spec({5}), beta, std::vector<Observation>{}).total == 0.0);
    CHECK(loglik(net, rl_spec(), beta, std::vector<Observation>{}).total == 0.0);
}

TEST_CASE("infeasible observations are reported by index") {
    const Network net = load_network_file(testing::data_path("toy_four_path.net"));
    const std::vector<Observation> obs{{{1, 3, 5, 2}}, {{1, 2}}, {{1, 3, 4, 5, 2}}, {{1, 3, 4, 6, 2}}};
    try {
        Likelihood(net, crl_spec({5}), obs);
        FAIL("expected infeasible observations");
    } catch (const InfeasibleObservation& e) {
        CHECK(e.indices() == std::vector<std::size_t>{1, 3});
    }
}

TEST_CASE("log-likelihood of simulated data matches the path oracle") {
    const Network net = generate_geometric_dag(20, 3);
    const std::vector<double> beta{-4.0, -0.1, -0.05, -0.3};
    const std::vector<Quanta> alpha{threshold_from_percent(net, 0, 0.5)};
    SimConfig cfg;
    cfg.n_obs = 3000;
    cfg.seed = 11;
    const auto obs = simulate(net, UtilitySpec{beta, 1.0}, alpha, cfg);
    const auto ll = loglik(net, crl_spec(alpha), beta, obs);
    CHECK(std::abs(ll.total - oracle_loglik(net, beta, alpha, obs)) < 1e-9);
    // repeated evaluations are bit-identical
    const Likelihood lik(net, crl_spec(alpha), obs);
    CHECK(lik.evaluate(beta).total == lik.evaluate(beta).total);
}

TEST_CASE("analytic gradients agree with central differences") {
    std::mt19937_64 rng(101);
    for (int net_i = 0; net_i < 3; ++net_i) {
        testing::RandomNetOptions o;
        o.nodes = 9;
        o.cyclic = net_i == 2;
        o.resets = net_i == 1;
        const Network net = testing::random_network(rng, o);
        const std::vector<Quanta> alpha{9};
        // data: enumerate-free draws from the constrained model at a fixed beta
        SimConfig cfg;
        cfg.n_obs = 50;
        cfg.seed = 5 + net_i;
        const auto obs = simulate(net, UtilitySpec{{-1.0, -0.5}, 1.0}, alpha, cfg);
        const Likelihood crl(net, crl_spec(alpha, 1.3), obs), rl(net, ModelSpec{Model::RL, 1.3, {}, std::nullopt, {}, {}}, obs);
        for (int draw = 0; draw < 20; ++draw) {
            const auto beta = testing::random_beta(rng, 2, -2.0, -0.3);
            for (const Likelihood* lik : {&crl, &rl}) {
                // random cyclic draws can leave RL without a solution
                if (lik == &rl && o.cyclic) continue;
                const auto ga = lik->gradient(beta, GradientMode::Analytic);
                const auto gf = lik->gradient(beta, GradientMode::FiniteDifference, 1e-5);
                for (std::size_t j = 0; j < 2; ++j) CHECK(testing::rel_err(ga[j], gf[j]) < 1e-5);
            }
        }
    }
}

TEST_CASE("degenerate gradients") {
    SUBCASE("attribute that is zero everywhere") {
        const Network net = NetworkBuilder(4, 3, {"a", "zero"}, 1)
                                .add_edge(0, 1, {1.0, 0.0}, {1})
                                .add_edge(0, 2, {2.0, 0.0}, {1})
                                .add_edge(1, 3, {1.0, 0.0}, {1})
                                .add_edge(2, 3, {0.5, 0.0}, {1})
                                .build();
        const std::vector<Observation> obs{{{0, 1, 3}}, {{0, 2, 3}}, {{0, 1, 3}}};
        const std::vector<double> beta{-0.7, 3.0};
        CHECK(loglik_gradient(net, rl_spec(), beta, obs)[1] == 0.0);
        CHECK(loglik_gradient(net, crl_spec({5}), beta, obs)[1] == 0.0);
    }
    SUBCASE("single feasible path") {
        const Network net = load_network_file(testing::data_path("toy_stations.net"));
        const std::vector<Observation> obs{{{1, 3, 4, 5, 6, 7, 2}}};
        for (double b : {-3.0, 0.0, 2.0}) {
            const std::vector<double> beta{b};
            CHECK(std::abs(loglik_gradient(net, crl_spec({6}), beta, obs)[0]) < 1e-12);
            CHECK(std::abs(loglik(net, crl_spec({6}), beta, obs).total) < 1e-12);
        }
    }
}

TEST_CASE("one-parameter estimate matches a grid-search oracle") {
    const Network net =
        NetworkBuilder(3, 2, {"tt"}).add_edge(0, 1, {1.0}).add_edge(1, 2, {1.0}).add_edge(0, 2, {1.5}).build();
    std::vector<Observation> obs;
    for (int i = 0; i < 70; ++i) obs.push_back(Observation{{0, 2}});
    for (int i = 0; i < 30; ++i) obs.push_back(Observation{{0, 1, 2}});
    EstimationConfig cfg;
    cfg.spec = rl_spec();
    cfg.beta0 = {0.0};
    const auto res = estimate(net, obs, cfg);
    REQUIRE(res.converged);

    auto ll = [&](double b) { return 70 * (1.5 * b) + 30 * (2.0 * b) - 100 * std::log(std::exp(1.5 * b) + std::exp(2.0 * b)); };
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (ll(m1) < ll(m2)) lo = m1; else hi = m2;
    }
    CHECK(std::abs(res.beta[0] - 0.5 * (lo + hi)) < 1e-4);
    // closed form: 0.5 b = ln(30/70)
    CHECK(std::abs(res.beta[0] - 2.0 * std::log(30.0 / 70.0)) < 1e-4);
    CHECK(res.std_err[0] > 0.0);
    CHECK(res.t_stat[0] == doctest::Approx(res.beta[0] / res.std_err[0]));
    CHECK(res.avg_loglik <= 0.0);
}

TEST_CASE("estimation ascends and recovers parameters on a simulated DAG") {
    const Network net = generate_geometric_dag(20, 3);
    const std::vector<double> truth{-4.0, -0.1, -0.05, -0.3};
    const std::vector<Quanta> alpha{threshold_from_percent(net, 0, 0.5)};
    SimConfig sim;
    sim.n_obs = 3000;
    sim.seed = 4;
    const auto obs = simulate(net, UtilitySpec{truth, 1.0}, alpha, sim);
    EstimationConfig cfg;
    cfg.spec = crl_spec(alpha);
    cfg.beta0 = {0.0, 0.0, 0.0, 0.0};
    const auto res = estimate(net, obs, cfg);
    CHECK(res.converged);
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] >= res.trace[i - 1]);
    CHECK(res.trace.back() >= res.trace.front());
    CHECK(std::abs(res.beta[0] - truth[0]) < 1.0);
}

TEST_CASE("unconstrained estimation fails on a cycle with positive utilities, constrained succeeds") {
    const Network net = NetworkBuilder(4, 3, {"x"}, 1, 1.0)
                            .origin(0)
                            .add_edge(0, 1, {1.0}, {1})
                            .add_edge(1, 2, {1.0}, {1})
                            .add_edge(2, 1, {1.0}, {1})
                            .add_edge(2, 3, {0.2}, {1})
                            .add_edge(1, 3, {0.5}, {1})
                            .build();
    const std::vector<Observation> obs{{{0, 1, 3}}, {{0, 1, 2, 3}}, {{0, 1, 2, 1, 3}}};
    EstimationConfig cfg;
    cfg.spec = rl_spec();
    cfg.beta0 = {1.0};
    CHECK_THROWS_AS(estimate(net, obs, cfg), SolveFailure);
    cfg.spec = crl_spec({6});
    const auto res = estimate(net, obs, cfg);
    CHECK(res.converged);
    CHECK(std::isfinite(res.avg_loglik));
}

TEST_CASE("scale and coefficients are confounded") {
    const Network net = load_network_file(testing::data_path("toy_stations.net"));
    const std::vector<Observation> obs{{{1, 2}}, {{1, 3, 4, 5, 2}}, {{1, 3, 6, 7, 2}}};
    const std::vector<double> b1{-1.3}, b2{-2.6};
    const auto l1 = loglik(net, crl_spec({10}, 1.0), b1, obs);
    const auto l2 = loglik(net, crl_spec({10}, 2.0), b2, obs);
    for (std::size_t i = 0; i < obs.size(); ++i) CHECK(std::abs(std::exp(l1.per_obs[i]) - std::exp(l2.per_obs[i])) < 1e-12);
}

TEST_CASE("nested model likelihood") {
    const Network net = load_network_file(testing::data_path("toy_four_path.net"));
    const std::vector<Observation> obs{{{1, 3, 5, 2}}, {{1, 3, 4, 5, 2}}, {{1, 3, 5, 2}}};
    ModelSpec nested{Model::CNRL, 1.0, {5}, std::nullopt, {}, {}};
    const std::vector<double> beta{-1.7};
    CHECK(std::abs(loglik(net, nested, beta, obs).total - loglik(net, crl_spec({5}), beta, obs).total) < 1e-10);
    std::vector<double> table(7, 0.0);
    table[3] = 0.6;
    nested.nested = NestedSpec::per_base(table, 1.0);
    const Likelihood lik(net, nested, obs);
    CHECK_THROWS_AS(lik.gradient(beta, GradientMode::Analytic), InvariantError);
    EstimationConfig cfg;
    cfg.spec = nested;
    cfg.beta0 = {0.0};
    cfg.gradient_mode = GradientMode::FiniteDifference;
    cfg.tol_grad = 1e-6;
    const auto res = estimate(net, obs, cfg);
    CHECK(res.converged);
}

TEST_CASE("percent improvement") {
    CHECK(percent_improve(-3.39, -3.44) == doctest::Approx(1.4535).epsilon(1e-3));
    CHECK(percent_improve(-2.0, -2.0) == 0.0);
    CHECK(percent_improve(-9.0, -10.0) == doctest::Approx(10.0));
    CHECK_THROWS_AS(percent_improve(-1.0, 0.0), InvariantError);
}

TEST_CASE("model names") {
    CHECK(parse_model("CRL") == Model::CRL);
    CHECK(parse_model("rl") == Model::RL);
    CHECK(parse_model("cnrl") == Model::CNRL);
    CHECK_THROWS_AS(parse_model("logit"), InvariantError);
}
