#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crl/crl.hpp"
#include "crl/estimation.hpp"
#include "crl/network.hpp"
#include "crl/utility.hpp"

namespace crl {

struct SimConfig {
    Model model = Model::CRL;
    std::size_t n_obs = 1000;
    std::uint64_t seed = 1;
    /// Draw from RL and discard paths that break the bounds stepwise.
    bool rejection = false;
    std::size_t max_hops = 100000;
    /// Dispersion field for CNRL; defaults to the constant mu.
    std::optional<NestedSpec> nested;
    SolverOptions solver;
    ExtendedBuildOptions build;
};

struct SimStats {
    std::size_t draws = 0;
    std::size_t rejected = 0;
};

/// Samples n_obs routes from `origin` (network default when omitted). Observation
/// i depends only on (seed, i). alpha is ignored by RL without rejection.
/// Throws SolveFailure, InvariantError when a run exceeds max_hops or the origin
/// cannot reach the destination, and ResourceError when rejection accepts fewer
/// than 1 in 10,000 draws.
std::vector<Observation> simulate(const Network& net, const UtilitySpec& u, std::span<const Quanta> alpha,
                                  const SimConfig& cfg, std::optional<StateId> origin = std::nullopt,
                                  SimStats* stats = nullptr);

}  // namespace crl
