#include "crl/value_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crl/errors.hpp"

namespace crl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct LiveIndex {
    std::vector<std::int64_t> compact;  // -1 for dead nodes
    std::vector<std::uint32_t> nodes;
};

LiveIndex index_live(const std::vector<char>& live) {
    LiveIndex idx;
    idx.compact.assign(live.size(), -1);
    for (std::size_t s = 0; s < live.size(); ++s)
        if (live[s]) {
            idx.compact[s] = static_cast<std::int64_t>(idx.nodes.size());
            idx.nodes.push_back(static_cast<std::uint32_t>(s));
        }
    return idx;
}

// log sum_i exp(a_i) over the arcs of `s`, skipping -inf terms.
template <typename TermFn>
double log_sum_exp_arcs(const ChoiceGraph& g, std::size_t s, TermFn&& term) {
    double hi = kNegInf;
    for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) hi = std::max(hi, term(a));
    if (hi == kNegInf) return kNegInf;
    if (!std::isfinite(hi)) return hi;
    double sum = 0.0;
    for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) {
        const double t = term(a);
        if (t != kNegInf) sum += std::exp(t - hi);
    }
    return hi + std::log(sum);
}

std::vector<double> backward_induction(const ChoiceGraph& g, std::span<const double> util,
                                       ScaleField mu) {
    std::vector<double> value(g.num_nodes(), kNegInf);
    for (auto it = g.topo_order.rbegin(); it != g.topo_order.rend(); ++it) {
        const std::size_t s = *it;
        if (g.terminal[s]) {
            value[s] = 0.0;
            continue;
        }
        const double m = mu.at(s);
        const double lse = log_sum_exp_arcs(g, s, [&](std::size_t a) {
            const double vt = value[g.targets[a]];
            return vt == kNegInf ? kNegInf : (util[g.edge_ids[a]] + vt) / m;
        });
        value[s] = lse == kNegInf ? kNegInf : m * lse;
    }
    return value;
}

void check_finite_values(std::span<const double> value) {
    for (double v : value)
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
            throw SolveFailure("value function overflowed");
}

std::vector<double> direct_solve(const ChoiceGraph& g, std::span<const double> util, double mu,
                                 const LiveIndex& live, const SolverOptions& opts) {
    const auto n = static_cast<Eigen::Index>(live.nodes.size());
    std::vector<Triplet> triplets;
    triplets.reserve(live.nodes.size() + g.num_arcs());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t s = live.nodes[static_cast<std::size_t>(i)];
        triplets.emplace_back(i, i, 1.0);
        if (g.terminal[s]) {
            rhs[i] = 1.0;
            continue;
        }
        for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) {
            const auto j = live.compact[g.targets[a]];
            if (j < 0) continue;
            const double m = std::exp(util[g.edge_ids[a]] / mu);
            if (!std::isfinite(m)) throw SolveFailure("transition weight overflowed");
            triplets.emplace_back(i, static_cast<Eigen::Index>(j), -m);
        }
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw SolveFailure("I - M is singular: " + lu.lastErrorMessage());
    Eigen::VectorXd z = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw SolveFailure("sparse solve of (I - M) z = b failed");

    double z_max = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(z[i])) throw SolveFailure("non-finite z in the solution of (I - M) z = b");
        if (z[i] <= 0.0)
            throw SolveFailure("non-positive z(" + std::to_string(live.nodes[static_cast<std::size_t>(i)]) +
                               ") = " + std::to_string(z[i]) + "; the system has no valid solution");
        z_max = std::max(z_max, z[i]);
    }
    const double residual = (a * z - rhs).lpNorm<Eigen::Infinity>();
    if (!(residual <= opts.residual_tolerance * std::max(1.0, z_max)))
        throw SolveFailure("residual of (I - M) z = b too large: " + std::to_string(residual));

    std::vector<double> value(g.num_nodes(), kNegInf);
    for (Eigen::Index i = 0; i < n; ++i) value[live.nodes[static_cast<std::size_t>(i)]] = mu * std::log(z[i]);
    return value;
}

std::vector<double> value_iteration(const ChoiceGraph& g, std::span<const double> util, double mu,
                                    const LiveIndex& live, const SolverOptions& opts) {
    std::vector<double> weight(g.num_arcs(), 0.0);
    for (std::size_t a = 0; a < g.num_arcs(); ++a) weight[a] = std::exp(util[g.edge_ids[a]] / mu);
    std::vector<double> z(g.num_nodes(), 0.0), next(g.num_nodes(), 0.0);
    for (std::size_t iter = 0; iter < opts.vi_max_iterations; ++iter) {
        double delta = 0.0, z_max = 0.0;
        for (std::uint32_t s : live.nodes) {
            double acc = g.terminal[s] ? 1.0 : 0.0;
            for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) acc += weight[a] * z[g.targets[a]];
            if (!std::isfinite(acc) || acc > opts.divergence_bound)
                throw SolveFailure("value iteration diverged at iteration " + std::to_string(iter));
            delta = std::max(delta, std::abs(acc - z[s]));
            z_max = std::max(z_max, acc);
            next[s] = acc;
        }
        std::swap(z, next);
        if (delta <= opts.vi_tolerance * std::max(1.0, z_max)) {
            std::vector<double> value(g.num_nodes(), kNegInf);
            for (std::uint32_t s : live.nodes) {
                if (!(z[s] > 0.0)) throw SolveFailure("value iteration produced z <= 0");
                value[s] = mu * std::log(z[s]);
            }
            return value;
        }
    }
    throw SolveFailure("value iteration did not converge within " + std::to_string(opts.vi_max_iterations) +
                       " iterations");
}

}  // namespace

void ChoiceGraph::compute_order() {
    const std::size_t n = num_nodes();
    std::vector<std::size_t> indegree(n, 0);
    for (auto t : targets) ++indegree[t];
    topo_order.clear();
    topo_order.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
        if (indegree[s] == 0) topo_order.push_back(static_cast<std::uint32_t>(s));
    for (std::size_t head = 0; head < topo_order.size(); ++head) {
        const std::size_t s = topo_order[head];
        for (std::size_t a = offsets[s]; a < offsets[s + 1]; ++a)
            if (--indegree[targets[a]] == 0) topo_order.push_back(targets[a]);
    }
    acyclic = topo_order.size() == n;
    if (!acyclic) topo_order.clear();
}

std::vector<char> ChoiceGraph::live_nodes() const {
    const std::size_t n = num_nodes();
    std::vector<std::size_t> pred_offsets(n + 1, 0);
    for (auto t : targets) ++pred_offsets[t + 1];
    for (std::size_t s = 0; s < n; ++s) pred_offsets[s + 1] += pred_offsets[s];
    std::vector<std::uint32_t> preds(targets.size());
    auto fill = pred_offsets;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = offsets[s]; a < offsets[s + 1]; ++a) preds[fill[targets[a]]++] = static_cast<std::uint32_t>(s);

    std::vector<char> live(n, 0);
    std::vector<std::uint32_t> stack;
    for (std::size_t s = 0; s < n; ++s)
        if (terminal[s]) {
            live[s] = 1;
            stack.push_back(static_cast<std::uint32_t>(s));
        }
    while (!stack.empty()) {
        const auto s = stack.back();
        stack.pop_back();
        for (std::size_t i = pred_offsets[s]; i < pred_offsets[s + 1]; ++i)
            if (!live[preds[i]]) {
                live[preds[i]] = 1;
                stack.push_back(preds[i]);
            }
    }
    return live;
}

ChoiceGraph network_choice_graph(const Network& net) {
    ChoiceGraph g;
    const std::size_t n = net.num_states();
    g.offsets.resize(n + 1);
    for (StateId s = 0; s < n; ++s) g.offsets[s] = net.first_out_edge(s);
    g.offsets[n] = net.num_edges();
    g.targets.reserve(net.num_edges());
    g.edge_ids.reserve(net.num_edges());
    for (std::size_t i = 0; i < net.num_edges(); ++i) {
        g.targets.push_back(net.edge(i).to);
        g.edge_ids.push_back(i);
    }
    g.terminal.assign(n, 0);
    g.terminal[net.destination()] = 1;
    g.compute_order();
    return g;
}

std::vector<double> solve_values(const ChoiceGraph& g, std::span<const double> edge_util, double mu,
                                 const SolverOptions& opts) {
    if (g.acyclic) {
        auto value = backward_induction(g, edge_util, ScaleField{mu});
        check_finite_values(value);
        return value;
    }
    const auto live = index_live(g.live_nodes());
    if (live.nodes.size() <= opts.direct_cutoff) return direct_solve(g, edge_util, mu, live, opts);
    return value_iteration(g, edge_util, mu, live, opts);
}

std::vector<double> solve_nested_values(const ChoiceGraph& g, std::span<const double> edge_util,
                                        ScaleField mu, const SolverOptions& opts) {
    for (std::size_t s = 0; s < g.num_nodes(); ++s)
        if (!(mu.at(s) > 0.0)) throw InvariantError("nested scale must be positive at every state");
    if (g.acyclic) {
        auto value = backward_induction(g, edge_util, mu);
        check_finite_values(value);
        return value;
    }
    const auto live = g.live_nodes();
    const double log_bound = std::log(opts.divergence_bound);
    std::vector<double> value(g.num_nodes(), kNegInf), next(g.num_nodes(), kNegInf);
    for (std::size_t s = 0; s < g.num_nodes(); ++s)
        if (g.terminal[s]) value[s] = 0.0;
    next = value;
    for (std::size_t iter = 0; iter < opts.vi_max_iterations; ++iter) {
        double delta = 0.0;
        for (std::size_t s = 0; s < g.num_nodes(); ++s) {
            if (!live[s] || g.terminal[s]) continue;
            const double m = mu.at(s);
            const double lse = log_sum_exp_arcs(g, s, [&](std::size_t a) {
                const double vt = value[g.targets[a]];
                return vt == kNegInf ? kNegInf : (edge_util[g.edge_ids[a]] + vt) / m;
            });
            if (lse > log_bound || std::isnan(lse))
                throw SolveFailure("nested value iteration diverged at iteration " + std::to_string(iter));
            const double v = lse == kNegInf ? kNegInf : m * lse;
            if (v != value[s]) delta = std::max(delta, value[s] == kNegInf ? std::abs(v) + 1.0 : std::abs(v - value[s]));
            next[s] = v;
        }
        std::swap(value, next);
        if (delta <= opts.vi_tolerance) return value;
    }
    throw SolveFailure("nested value iteration did not converge within " +
                       std::to_string(opts.vi_max_iterations) + " iterations");
}

std::vector<double> arc_probabilities(const ChoiceGraph& g, std::span<const double> edge_util,
                                      std::span<const double> values, ScaleField mu) {
    std::vector<double> prob(g.num_arcs(), 0.0);
    for (std::size_t s = 0; s < g.num_nodes(); ++s) {
        if (values[s] == kNegInf) continue;
        const double m = mu.at(s);
        for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) {
            const double vt = values[g.targets[a]];
            if (vt == kNegInf) continue;
            prob[a] = std::exp((edge_util[g.edge_ids[a]] + vt - values[s]) / m);
        }
    }
    return prob;
}

double relative_residual(const ChoiceGraph& g, std::span<const double> edge_util,
                         std::span<const double> values, double mu) {
    double v_max = kNegInf;
    for (double v : values) v_max = std::max(v_max, v);
    const double shift = std::max(v_max / mu, 0.0);
    double worst = 0.0;
    for (std::size_t s = 0; s < g.num_nodes(); ++s) {
        const double zs = values[s] == kNegInf ? 0.0 : std::exp(values[s] / mu - shift);
        double rhs = g.terminal[s] ? std::exp(-shift) : 0.0;
        for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) {
            const double vt = values[g.targets[a]];
            if (vt != kNegInf) rhs += std::exp((edge_util[g.edge_ids[a]] + vt) / mu - shift);
        }
        worst = std::max(worst, std::abs(zs - rhs));
    }
    return worst;
}

std::vector<double> arc_flows(const ChoiceGraph& g, std::span<const double> arc_probs, std::size_t origin) {
    const std::size_t n = g.num_nodes();
    std::vector<double> occupancy(n, 0.0);
    if (g.acyclic) {
        occupancy[origin] = 1.0;
        for (auto s : g.topo_order)
            for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a)
                occupancy[g.targets[a]] += occupancy[s] * arc_probs[a];
    } else {
        // Occupancy solves (I - P^T) x = e_origin.
        std::vector<Triplet> triplets;
        for (std::size_t s = 0; s < n; ++s) {
            triplets.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s), 1.0);
            for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a)
                if (arc_probs[a] != 0.0)
                    triplets.emplace_back(static_cast<Eigen::Index>(g.targets[a]), static_cast<Eigen::Index>(s),
                                          -arc_probs[a]);
        }
        SparseMatrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        a.setFromTriplets(triplets.begin(), triplets.end());
        a.makeCompressed();
        Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.analyzePattern(a);
        lu.factorize(a);
        if (lu.info() != Eigen::Success) throw SolveFailure("I - P^T is singular in the flow solve");
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        rhs[static_cast<Eigen::Index>(origin)] = 1.0;
        Eigen::VectorXd x = lu.solve(rhs);
        for (std::size_t s = 0; s < n; ++s) occupancy[s] = x[static_cast<Eigen::Index>(s)];
    }
    std::vector<double> flow(g.num_arcs(), 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) flow[a] = occupancy[s] * arc_probs[a];
    return flow;
}

std::vector<double> value_sensitivities(const ChoiceGraph& g, const Network& net,
                                        std::span<const double> arc_probs,
                                        std::span<const double> values, double mu) {
    const std::size_t n = g.num_nodes();
    const std::size_t dims = net.attribute_arity();
    std::vector<double> w(n * dims, 0.0);
    if (dims == 0) return w;

    if (g.acyclic) {
        for (auto it = g.topo_order.rbegin(); it != g.topo_order.rend(); ++it) {
            const std::size_t s = *it;
            if (g.terminal[s] || values[s] == kNegInf) continue;
            for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) {
                const double p = arc_probs[a];
                if (p == 0.0) continue;
                const auto& attrs = net.edge(g.edge_ids[a]).attributes;
                const std::size_t t = g.targets[a];
                for (std::size_t j = 0; j < dims; ++j) w[s * dims + j] += p * (attrs[j] / mu + w[t * dims + j]);
            }
        }
        return w;
    }

    std::vector<char> live(n, 0);
    for (std::size_t s = 0; s < n; ++s) live[s] = values[s] != kNegInf;
    const auto idx = index_live(live);
    const auto m = static_cast<Eigen::Index>(idx.nodes.size());
    std::vector<Triplet> triplets;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(dims));
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::size_t s = idx.nodes[static_cast<std::size_t>(i)];
        triplets.emplace_back(i, i, 1.0);
        for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) {
            const double p = arc_probs[a];
            if (p == 0.0) continue;
            const auto j = idx.compact[g.targets[a]];
            triplets.emplace_back(i, static_cast<Eigen::Index>(j), -p);
            const auto& attrs = net.edge(g.edge_ids[a]).attributes;
            for (std::size_t k = 0; k < dims; ++k) rhs(i, static_cast<Eigen::Index>(k)) += p * attrs[k] / mu;
        }
    }
    SparseMatrix a(m, m);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw SolveFailure("I - P is singular in the sensitivity solve");
    Eigen::MatrixXd sol = lu.solve(rhs);
    for (Eigen::Index i = 0; i < m; ++i)
        for (std::size_t k = 0; k < dims; ++k)
            w[idx.nodes[static_cast<std::size_t>(i)] * dims + k] = sol(i, static_cast<Eigen::Index>(k));
    return w;
}

}  // namespace crl
