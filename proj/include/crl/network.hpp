#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crl {

/// Index into a network's state table. A state may stand for a node or a link.
using StateId = std::uint32_t;

/// Integer cost in units of the network's cost quantum.
using Quanta = std::int64_t;

struct Edge {
    StateId from = 0;
    StateId to = 0;
    std::vector<double> attributes;
    std::vector<Quanta> costs;
};

/// Sequence of states from an origin to the destination.
struct Observation {
    std::vector<StateId> path;

    StateId origin() const { return path.front(); }
    bool operator==(const Observation&) const = default;
};

class NetworkBuilder;

/// Immutable directed state graph with per-edge attributes, per-edge integer
/// constraint costs and per-state reset flags. The destination is absorbing.
class Network {
public:
    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }
    StateId destination() const noexcept { return destination_; }
    /// Default origin, when the source file or generator names one.
    std::optional<StateId> origin() const noexcept { return origin_; }

    const std::vector<std::string>& attribute_names() const noexcept { return attribute_names_; }
    std::size_t attribute_arity() const noexcept { return attribute_names_.size(); }
    std::size_t constraint_arity() const noexcept { return constraint_arity_; }
    double cost_quantum() const noexcept { return cost_quantum_; }

    /// All edges, sorted by (from, to).
    std::span<const Edge> edges() const noexcept { return edges_; }
    const Edge& edge(std::size_t index) const { return edges_[index]; }

    /// Edges leaving `s`; their global indices are first_out_edge(s) + i.
    std::span<const Edge> out_edges(StateId s) const;
    std::size_t first_out_edge(StateId s) const { return offsets_[s]; }
    std::size_t out_degree(StateId s) const { return offsets_[s + 1] - offsets_[s]; }

    std::optional<std::size_t> find_edge(StateId from, StateId to) const;

    bool is_reset(StateId s, std::size_t dim) const {
        return resets_[static_cast<std::size_t>(s) * constraint_arity_ + dim] != 0;
    }
    bool has_resets() const noexcept;
    bool has_negative_costs() const noexcept;

    bool is_acyclic() const noexcept { return !topo_order_.empty() || num_states_ == 0; }
    /// Topological order of all states; empty when the network has a cycle.
    const std::vector<StateId>& topological_order() const noexcept { return topo_order_; }

    /// States from which the destination can be reached (destination included).
    std::vector<char> reaches_destination() const;

    /// Throws InvariantError when `obs` is not a walk ending at the destination.
    void validate(const Observation& obs) const;

private:
    friend class NetworkBuilder;
    Network() = default;

    std::size_t num_states_ = 0;
    StateId destination_ = 0;
    std::optional<StateId> origin_;
    std::vector<std::string> attribute_names_;
    std::size_t constraint_arity_ = 0;
    double cost_quantum_ = 1.0;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<char> resets_;
    std::vector<StateId> topo_order_;
};

/// Accumulates states, edges and resets, then validates them into a Network.
class NetworkBuilder {
public:
    NetworkBuilder(std::size_t num_states, StateId destination,
                   std::vector<std::string> attribute_names,
                   std::size_t constraint_arity = 0, double cost_quantum = 1.0);

    NetworkBuilder& origin(StateId s);
    NetworkBuilder& add_edge(StateId from, StateId to, std::vector<double> attributes,
                             std::vector<Quanta> costs = {});
    NetworkBuilder& add_reset(StateId s, std::size_t dim);

    /// Throws InvariantError on dangling endpoints, arity mismatches, duplicate
    /// (from, to) pairs or a destination with outgoing edges.
    Network build() const;

private:
    std::size_t num_states_;
    StateId destination_;
    std::optional<StateId> origin_;
    std::vector<std::string> attribute_names_;
    std::size_t constraint_arity_;
    double cost_quantum_;
    std::vector<Edge> edges_;
    std::vector<std::pair<StateId, std::size_t>> resets_;
};

Network load_network(std::istream& in);
Network load_network_file(const std::string& path);
void save_network(const Network& net, std::ostream& out);

std::vector<Observation> load_observations(std::istream& in);
std::vector<Observation> load_observations_file(const std::string& path);
void save_observations(std::span<const Observation> observations, std::ostream& out);

/// Random geometric DAG on `n_nodes` points in the unit square. Edges join points
/// closer than 2/sqrt(n) and run from the lower to the higher index; node 0 is the
/// origin and node n-1 the destination. Attributes are travel time (Euclidean
/// length), left turn, right turn and u-turn. One constraint dimension holds the
/// travel time rounded to 0.1 h quanta.
Network generate_geometric_dag(std::size_t n_nodes, std::uint64_t seed);

/// Classification of the signed angle (degrees) between two bearings.
struct TurnDummies {
    double left = 0.0;
    double right = 0.0;
    double uturn = 0.0;
};
TurnDummies classify_turn(double signed_angle_deg);

/// Largest total cost (constraint dimension `dim`, in quanta) over all
/// origin-to-destination paths. Throws InvariantError on a cyclic network.
Quanta longest_path_cost(const Network& net, StateId origin, std::size_t dim = 0);

/// longest_path_cost converted to hours (cost units).
double longest_travel_time(const Network& net, StateId origin, std::size_t dim = 0);

/// floor(percent * T_max) expressed in quanta.
Quanta threshold_from_percent(const Network& net, StateId origin, double percent,
                              std::size_t dim = 0);

/// Resolves the origin to use: explicit value, else the network default.
StateId resolve_origin(const Network& net, std::optional<StateId> origin);

}  // namespace crl
