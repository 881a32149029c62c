#include "crl/network.hpp"

#include <limits>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "crl/errors.hpp"

namespace crl {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::string body = line.substr(0, line.find('#'));
    std::istringstream ss(body);
    std::vector<std::string> tokens;
    for (std::string t; ss >> t;) tokens.push_back(std::move(t));
    return tokens;
}

template <typename T>
T parse_integer(const std::string& token, std::size_t line_no, const char* what) {
    T value{};
    const char* first = token.data();
    const char* last = first + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError(line_no, std::string("expected integer ") + what + ", got '" + token + "'");
    return value;
}

double parse_real(const std::string& token, std::size_t line_no, const char* what) {
    try {
        std::size_t used = 0;
        double value = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return value;
    } catch (const std::exception&) {
        throw ParseError(line_no, std::string("expected real ") + what + ", got '" + token + "'");
    }
}

std::vector<StateId> kahn_order(std::size_t n, std::span<const Edge> edges) {
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& e : edges) ++indegree[e.to];
    std::vector<std::vector<StateId>> succ(n);
    for (const auto& e : edges) succ[e.from].push_back(e.to);
    std::vector<StateId> order;
    order.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
        if (indegree[s] == 0) order.push_back(static_cast<StateId>(s));
    for (std::size_t head = 0; head < order.size(); ++head)
        for (StateId t : succ[order[head]])
            if (--indegree[t] == 0) order.push_back(t);
    if (order.size() != n) order.clear();
    return order;
}

}  // namespace

std::span<const Edge> Network::out_edges(StateId s) const {
    return std::span<const Edge>(edges_).subspan(offsets_[s], offsets_[s + 1] - offsets_[s]);
}

std::optional<std::size_t> Network::find_edge(StateId from, StateId to) const {
    if (from >= num_states_) return std::nullopt;
    auto out = out_edges(from);
    auto it = std::lower_bound(out.begin(), out.end(), to,
                               [](const Edge& e, StateId t) { return e.to < t; });
    if (it == out.end() || it->to != to) return std::nullopt;
    return offsets_[from] + static_cast<std::size_t>(it - out.begin());
}

bool Network::has_resets() const noexcept {
    return std::any_of(resets_.begin(), resets_.end(), [](char c) { return c != 0; });
}

bool Network::has_negative_costs() const noexcept {
    for (const auto& e : edges_)
        for (Quanta c : e.costs)
            if (c < 0) return true;
    return false;
}

std::vector<char> Network::reaches_destination() const {
    std::vector<std::vector<StateId>> pred(num_states_);
    for (const auto& e : edges_) pred[e.to].push_back(e.from);
    std::vector<char> seen(num_states_, 0);
    std::vector<StateId> stack{destination_};
    seen[destination_] = 1;
    while (!stack.empty()) {
        StateId s = stack.back();
        stack.pop_back();
        for (StateId p : pred[s])
            if (!seen[p]) {
                seen[p] = 1;
                stack.push_back(p);
            }
    }
    return seen;
}

void Network::validate(const Observation& obs) const {
    if (obs.path.empty()) throw InvariantError("observation is empty");
    for (StateId s : obs.path)
        if (s >= num_states_)
            throw InvariantError("observation references unknown state " + std::to_string(s));
    if (obs.path.back() != destination_)
        throw InvariantError("observation does not end at the destination");
    for (std::size_t t = 0; t + 1 < obs.path.size(); ++t)
        if (!find_edge(obs.path[t], obs.path[t + 1]))
            throw InvariantError("observation uses non-edge " + std::to_string(obs.path[t]) + "->" +
                                 std::to_string(obs.path[t + 1]));
}

NetworkBuilder::NetworkBuilder(std::size_t num_states, StateId destination,
                               std::vector<std::string> attribute_names,
                               std::size_t constraint_arity, double cost_quantum)
    : num_states_(num_states),
      destination_(destination),
      attribute_names_(std::move(attribute_names)),
      constraint_arity_(constraint_arity),
      cost_quantum_(cost_quantum) {}

NetworkBuilder& NetworkBuilder::origin(StateId s) {
    origin_ = s;
    return *this;
}

NetworkBuilder& NetworkBuilder::add_edge(StateId from, StateId to, std::vector<double> attributes,
                                         std::vector<Quanta> costs) {
    edges_.push_back(Edge{from, to, std::move(attributes), std::move(costs)});
    return *this;
}

NetworkBuilder& NetworkBuilder::add_reset(StateId s, std::size_t dim) {
    resets_.emplace_back(s, dim);
    return *this;
}

Network NetworkBuilder::build() const {
    if (num_states_ == 0) throw InvariantError("network has no states");
    if (destination_ >= num_states_) throw InvariantError("destination is not a valid state");
    if (origin_ && *origin_ >= num_states_) throw InvariantError("origin is not a valid state");
    if (!(cost_quantum_ > 0.0) || !std::isfinite(cost_quantum_))
        throw InvariantError("cost quantum must be positive");

    Network net;
    net.num_states_ = num_states_;
    net.destination_ = destination_;
    net.origin_ = origin_;
    net.attribute_names_ = attribute_names_;
    net.constraint_arity_ = constraint_arity_;
    net.cost_quantum_ = cost_quantum_;
    net.edges_ = edges_;

    for (const auto& e : net.edges_) {
        const std::string tag = std::to_string(e.from) + "->" + std::to_string(e.to);
        if (e.from >= num_states_ || e.to >= num_states_)
            throw InvariantError("edge " + tag + " references an unknown state");
        if (e.from == destination_) throw InvariantError("destination has outgoing edge " + tag);
        if (e.attributes.size() != attribute_names_.size())
            throw InvariantError("edge " + tag + " has wrong attribute count");
        if (e.costs.size() != constraint_arity_)
            throw InvariantError("edge " + tag + " has wrong cost count");
        for (double a : e.attributes)
            if (!std::isfinite(a)) throw InvariantError("edge " + tag + " has a non-finite attribute");
    }
    std::sort(net.edges_.begin(), net.edges_.end(), [](const Edge& a, const Edge& b) {
        return a.from != b.from ? a.from < b.from : a.to < b.to;
    });
    for (std::size_t i = 1; i < net.edges_.size(); ++i)
        if (net.edges_[i].from == net.edges_[i - 1].from && net.edges_[i].to == net.edges_[i - 1].to)
            throw InvariantError("duplicate edge " + std::to_string(net.edges_[i].from) + "->" +
                                 std::to_string(net.edges_[i].to));

    net.offsets_.assign(num_states_ + 1, 0);
    for (const auto& e : net.edges_) ++net.offsets_[e.from + 1];
    for (std::size_t s = 0; s < num_states_; ++s) net.offsets_[s + 1] += net.offsets_[s];

    net.resets_.assign(num_states_ * constraint_arity_, 0);
    for (auto [s, dim] : resets_) {
        if (s >= num_states_) throw InvariantError("reset on unknown state " + std::to_string(s));
        if (dim >= constraint_arity_)
            throw InvariantError("reset dimension " + std::to_string(dim) + " out of range");
        net.resets_[static_cast<std::size_t>(s) * constraint_arity_ + dim] = 1;
    }
    net.topo_order_ = kahn_order(num_states_, net.edges_);
    return net;
}

Network load_network(std::istream& in) {
    std::optional<std::size_t> states;
    std::optional<StateId> destination;
    std::optional<StateId> origin;
    std::optional<std::vector<std::string>> attrs;
    std::size_t arity = 0;
    double quantum = 1.0;
    struct PendingEdge {
        std::size_t line;
        std::vector<std::string> tokens;
    };
    std::vector<PendingEdge> edge_lines;
    std::vector<std::pair<std::size_t, std::pair<StateId, std::size_t>>> resets;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto tok = tokenize(line);
        if (tok.empty()) continue;
        const std::string& key = tok[0];
        if (key == "states") {
            if (tok.size() != 2) throw ParseError(line_no, "usage: states <n>");
            states = parse_integer<std::size_t>(tok[1], line_no, "state count");
        } else if (key == "destination") {
            if (tok.size() != 2) throw ParseError(line_no, "usage: destination <id>");
            destination = parse_integer<StateId>(tok[1], line_no, "destination");
        } else if (key == "origin") {
            if (tok.size() != 2) throw ParseError(line_no, "usage: origin <id>");
            origin = parse_integer<StateId>(tok[1], line_no, "origin");
        } else if (key == "attrs") {
            attrs = std::vector<std::string>(tok.begin() + 1, tok.end());
        } else if (key == "constraints") {
            if (tok.size() != 4 || tok[2] != "quantum")
                throw ParseError(line_no, "usage: constraints <K> quantum <q>");
            arity = parse_integer<std::size_t>(tok[1], line_no, "constraint arity");
            quantum = parse_real(tok[3], line_no, "quantum");
            if (!(quantum > 0.0)) throw ParseError(line_no, "quantum must be positive");
        } else if (key == "reset") {
            if (tok.size() != 3) throw ParseError(line_no, "usage: reset <state> <dim>");
            resets.push_back({line_no,
                              {parse_integer<StateId>(tok[1], line_no, "reset state"),
                               parse_integer<std::size_t>(tok[2], line_no, "reset dimension")}});
        } else if (key == "edge") {
            edge_lines.push_back({line_no, std::move(tok)});
        } else {
            throw ParseError(line_no, "unknown directive '" + key + "'");
        }
    }
    if (!states) throw ParseError(line_no, "missing 'states' header");
    if (!destination) throw ParseError(line_no, "missing 'destination' header");
    if (!attrs) attrs.emplace();

    NetworkBuilder builder(*states, *destination, *attrs, arity, quantum);
    if (origin) builder.origin(*origin);
    const std::size_t n_attr = attrs->size();
    for (const auto& pe : edge_lines) {
        const auto& tok = pe.tokens;
        if (tok.size() != 3 + n_attr + arity)
            throw ParseError(pe.line, "edge expects " + std::to_string(n_attr) + " attributes and " +
                                          std::to_string(arity) + " costs");
        auto from = parse_integer<StateId>(tok[1], pe.line, "edge source");
        auto to = parse_integer<StateId>(tok[2], pe.line, "edge target");
        if (from >= *states || to >= *states)
            throw ParseError(pe.line, "edge references unknown state");
        std::vector<double> a(n_attr);
        for (std::size_t i = 0; i < n_attr; ++i) a[i] = parse_real(tok[3 + i], pe.line, "attribute");
        std::vector<Quanta> c(arity);
        for (std::size_t k = 0; k < arity; ++k)
            c[k] = parse_integer<Quanta>(tok[3 + n_attr + k], pe.line, "cost");
        builder.add_edge(from, to, std::move(a), std::move(c));
    }
    for (const auto& [ln, r] : resets) {
        if (r.first >= *states) throw ParseError(ln, "reset references unknown state");
        if (r.second >= arity) throw ParseError(ln, "reset dimension out of range");
        builder.add_reset(r.first, r.second);
    }
    return builder.build();
}

Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file: " + path);
    return load_network(in);
}

void save_network(const Network& net, std::ostream& out) {
    out << "states " << net.num_states() << '\n';
    out << "destination " << net.destination() << '\n';
    if (net.origin()) out << "origin " << *net.origin() << '\n';
    out << "attrs";
    for (const auto& name : net.attribute_names()) out << ' ' << name;
    out << '\n';
    out << "constraints " << net.constraint_arity() << " quantum "
        << std::setprecision(17) << net.cost_quantum() << '\n';
    for (StateId s = 0; s < net.num_states(); ++s)
        for (std::size_t k = 0; k < net.constraint_arity(); ++k)
            if (net.is_reset(s, k)) out << "reset " << s << ' ' << k << '\n';
    for (const auto& e : net.edges()) {
        out << "edge " << e.from << ' ' << e.to;
        for (double a : e.attributes) out << ' ' << std::setprecision(17) << a;
        for (Quanta c : e.costs) out << ' ' << c;
        out << '\n';
    }
}

std::vector<Observation> load_observations(std::istream& in) {
    std::vector<Observation> result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto tok = tokenize(line);
        if (tok.empty()) continue;
        Observation obs;
        for (const auto& t : tok) obs.path.push_back(parse_integer<StateId>(t, line_no, "state id"));
        result.push_back(std::move(obs));
    }
    return result;
}

std::vector<Observation> load_observations_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open observation file: " + path);
    return load_observations(in);
}

void save_observations(std::span<const Observation> observations, std::ostream& out) {
    for (const auto& obs : observations) {
        for (std::size_t i = 0; i < obs.path.size(); ++i) out << (i ? " " : "") << obs.path[i];
        out << '\n';
    }
}

TurnDummies classify_turn(double angle) {
    TurnDummies d;
    const double a = std::abs(angle);
    if (a >= 170.0)
        d.uturn = 1.0;
    else if (angle > 10.0)
        d.left = 1.0;
    else if (angle < -10.0)
        d.right = 1.0;
    return d;
}

Network generate_geometric_dag(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw InvariantError("geometric DAG needs at least 2 nodes");
    constexpr double kQuantum = 0.1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = unit(rng);
        y[i] = unit(rng);
    }
    const double radius = 2.0 / std::sqrt(static_cast<double>(n));
    auto dist = [&](std::size_t i, std::size_t j) { return std::hypot(x[j] - x[i], y[j] - y[i]); };

    std::vector<std::pair<std::size_t, std::size_t>> links;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (dist(i, j) < radius) links.emplace_back(i, j);

    // Edges run low->high, so a forward sweep from node 0 settles reachability.
    std::vector<char> reach(n, 0);
    reach[0] = 1;
    for (auto [i, j] : links)
        if (reach[i]) reach[j] = 1;
    if (!reach[n - 1]) links.emplace_back(0, n - 1);

    std::vector<std::pair<double, double>> incoming(n, {0.0, 0.0});
    for (auto [i, j] : links) {
        const double len = dist(i, j);
        incoming[j].first += (x[j] - x[i]) / len;
        incoming[j].second += (y[j] - y[i]) / len;
    }

    NetworkBuilder builder(n, static_cast<StateId>(n - 1), {"tt", "left", "right", "uturn"}, 1, kQuantum);
    builder.origin(0);
    for (auto [i, j] : links) {
        const double len = dist(i, j);
        const double ex = x[j] - x[i], ey = y[j] - y[i];
        auto [rx, ry] = incoming[i];
        TurnDummies turn;
        if (std::hypot(rx, ry) > 1e-12) {
            const double angle = std::atan2(rx * ey - ry * ex, rx * ex + ry * ey) * 180.0 / std::numbers::pi;
            turn = classify_turn(angle);
        }
        const auto cost = static_cast<Quanta>(std::llround(len / kQuantum));
        builder.add_edge(static_cast<StateId>(i), static_cast<StateId>(j),
                         {len, turn.left, turn.right, turn.uturn}, {cost});
    }
    return builder.build();
}

Quanta longest_path_cost(const Network& net, StateId origin, std::size_t dim) {
    if (!net.is_acyclic()) throw InvariantError("longest path is undefined on a cyclic network");
    if (dim >= net.constraint_arity()) throw InvariantError("constraint dimension out of range");
    constexpr Quanta kUnset = std::numeric_limits<Quanta>::min();
    std::vector<Quanta> best(net.num_states(), kUnset);
    best[origin] = 0;
    for (StateId s : net.topological_order()) {
        if (best[s] == kUnset) continue;
        for (const auto& e : net.out_edges(s)) best[e.to] = std::max(best[e.to], best[s] + e.costs[dim]);
    }
    if (best[net.destination()] == kUnset)
        throw InvariantError("destination is unreachable from the origin");
    return best[net.destination()];
}

double longest_travel_time(const Network& net, StateId origin, std::size_t dim) {
    return static_cast<double>(longest_path_cost(net, origin, dim)) * net.cost_quantum();
}

Quanta threshold_from_percent(const Network& net, StateId origin, double percent, std::size_t dim) {
    if (!(percent > 0.0) || !std::isfinite(percent))
        throw InvariantError("threshold percent must be positive");
    const Quanta t_max = longest_path_cost(net, origin, dim);
    return static_cast<Quanta>(std::floor(percent * static_cast<double>(t_max) + 1e-9));
}

StateId resolve_origin(const Network& net, std::optional<StateId> origin) {
    if (origin) {
        if (*origin >= net.num_states()) throw InvariantError("origin is not a valid state");
        return *origin;
    }
    if (net.origin()) return *net.origin();
    throw InvariantError("no origin given and the network does not name one");
}

}  // namespace crl
