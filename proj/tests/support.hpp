#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crl/network.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(CRL_DATA_DIR) + "/" + name; }

struct RandomNetOptions {
    std::size_t nodes = 8;
    std::size_t attributes = 2;
    std::size_t constraints = 1;
    double density = 0.35;
    bool cyclic = false;
    bool negative_costs = false;
    bool resets = false;
    crl::Quanta max_cost = 4;
};

// Origin 0, destination n-1; an increasing chain guarantees a route.
inline crl::Network random_network(std::mt19937_64& rng, const RandomNetOptions& o) {
    using crl::Quanta;
    using crl::StateId;
    const std::size_t n = o.nodes;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<Quanta> cost(o.negative_costs ? -2 : 1, o.max_cost);
    std::vector<std::vector<char>> has(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (unit(rng) < o.density) has[i][j] = 1;
    std::size_t cur = 0;
    while (cur != n - 1) {
        std::uniform_int_distribution<std::size_t> step(cur + 1, std::min(n - 1, cur + 3));
        const std::size_t next = step(rng);
        has[cur][next] = 1;
        cur = next;
    }
    if (o.cyclic)
        for (std::size_t j = 1; j + 1 < n; ++j)
            for (std::size_t i = 1; i < j; ++i)
                if (unit(rng) < o.density / 2) has[j][i] = 1;

    std::vector<std::string> names;
    for (std::size_t a = 0; a < o.attributes; ++a) names.push_back("x" + std::to_string(a));
    crl::NetworkBuilder b(n, static_cast<StateId>(n - 1), names, o.constraints, 1.0);
    b.origin(0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (!has[i][j] || i == n - 1) continue;
            std::vector<double> x(o.attributes);
            for (auto& v : x) v = std::round(unit(rng) * 20.0) / 10.0;
            std::vector<Quanta> c(o.constraints);
            for (auto& v : c) v = cost(rng);
            b.add_edge(static_cast<StateId>(i), static_cast<StateId>(j), x, c);
        }
    if (o.resets)
        for (std::size_t s = 1; s + 1 < n; ++s)
            for (std::size_t k = 0; k < o.constraints; ++k)
                if (unit(rng) < 0.2) b.add_reset(static_cast<StateId>(s), k);
    return b.build();
}

inline std::vector<double> random_beta(std::mt19937_64& rng, std::size_t n, double lo = -2.0, double hi = 0.5) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> b(n);
    for (auto& v : b) v = d(rng);
    return b;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace testing
