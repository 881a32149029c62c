#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "crl/network.hpp"
#include "crl/utility.hpp"

namespace crl {

/// Explicit list of origin-to-destination paths with their total utilities and
/// total costs (quanta, one entry per constraint dimension).
struct PathSet {
    std::vector<Observation> paths;
    std::vector<double> utilities;
    std::vector<std::vector<Quanta>> totals;

    std::size_t size() const noexcept { return paths.size(); }
    bool empty() const noexcept { return paths.empty(); }
};

struct EnumerateOptions {
    std::size_t max_paths = 100000;
    /// Required on cyclic networks: walks longer than this many edges are dropped.
    std::optional<std::size_t> hop_limit;
};

/// Depth-first enumeration of every walk from `origin` to the destination.
/// Throws PathOverflow past max_paths and InvariantError on a cyclic network
/// without a hop limit.
PathSet enumerate_paths(const Network& net, StateId origin, std::span<const double> beta,
                        const EnumerateOptions& opts = {});

/// Keeps paths whose total cost is within alpha in every dimension.
/// Throws InvariantError when the network has a negative cost.
PathSet restrict_total(const Network& net, const PathSet& ps, std::span<const Quanta> alpha);

/// Whether every prefix of the path respects alpha, applying resets on arrival.
bool stepwise_feasible(const Network& net, std::span<const StateId> path, std::span<const Quanta> alpha);

/// Keeps paths that are stepwise feasible under alpha.
PathSet restrict_stepwise(const Network& net, const PathSet& ps, std::span<const Quanta> alpha);

/// Logit probabilities over the set, computed with a max-shifted log-sum-exp.
/// Throws InvariantError on an empty set.
std::vector<double> mnl_over(const PathSet& ps, double mu);

/// Index of `obs` in the set, if present.
std::optional<std::size_t> find_path(const PathSet& ps, const Observation& obs);

}  // namespace crl
