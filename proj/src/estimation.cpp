#include "crl/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "crl/errors.hpp"
#include "crl/utility.hpp"

namespace crl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::size_t arc_between(const ChoiceGraph& g, std::size_t from, std::size_t to) {
    for (std::size_t a = g.offsets[from]; a < g.offsets[from + 1]; ++a)
        if (g.targets[a] == to) return a;
    throw InvariantError("lifted arc not found");
}

}  // namespace

Model parse_model(const std::string& name) {
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    if (n == "rl") return Model::RL;
    if (n == "crl") return Model::CRL;
    if (n == "cnrl") return Model::CNRL;
    throw InvariantError("unknown model '" + name + "' (expected rl, crl or cnrl)");
}

const char* model_name(Model m) {
    switch (m) {
        case Model::RL: return "RL";
        case Model::CRL: return "CRL";
        case Model::CNRL: return "CNRL";
    }
    return "?";
}

Likelihood::Likelihood(const Network& net, ModelSpec spec, std::span<const Observation> observations)
    : net_(&net), spec_(std::move(spec)), obs_count_(observations.size()) {
    if (!(spec_.mu > 0.0)) throw InvariantError("mu must be positive");
    const bool constrained = spec_.model != Model::RL;
    if (constrained && spec_.alpha.size() != net.constraint_arity())
        throw InvariantError("alpha must have one entry per constraint dimension");
    if (spec_.model == Model::CNRL && !spec_.nested) spec_.nested = NestedSpec::constant(spec_.mu);

    std::map<StateId, std::size_t> group_of;
    attr_totals_.reserve(observations.size());
    for (std::size_t i = 0; i < observations.size(); ++i) {
        net.validate(observations[i]);
        attr_totals_.push_back(path_attributes(net, observations[i].path));
        const StateId o = observations[i].origin();
        auto [it, inserted] = group_of.try_emplace(o, groups_.size());
        if (inserted) groups_.push_back(Group{o, {}, {}});
        groups_[it->second].obs.push_back(i);
    }

    if (!constrained) {
        base_graph_ = network_choice_graph(net);
        return;
    }

    std::vector<std::size_t> infeasible;
    for (Group& g : groups_) {
        auto [it, _] = spaces_.try_emplace(g.origin, build_extended(net, g.origin, spec_.alpha, spec_.build));
        const ExtendedStateSpace& xs = it->second;
        for (std::size_t i : g.obs) {
            const auto lifted = xs.lift(net, observations[i]);
            if (!lifted) {
                infeasible.push_back(i);
                continue;
            }
            if (spec_.model == Model::CNRL) {
                std::vector<std::size_t> arcs;
                for (std::size_t t = 0; t + 1 < lifted->size(); ++t)
                    arcs.push_back(arc_between(xs.graph(), (*lifted)[t], (*lifted)[t + 1]));
                g.arcs.push_back(std::move(arcs));
            }
        }
    }
    if (!infeasible.empty()) {
        std::sort(infeasible.begin(), infeasible.end());
        std::string msg = "observations violate the constraint bounds:";
        for (std::size_t k = 0; k < infeasible.size() && k < 20; ++k) msg += ' ' + std::to_string(infeasible[k]);
        if (infeasible.size() > 20) msg += " ...";
        throw InfeasibleObservation(std::move(infeasible), msg);
    }
}

const ChoiceGraph& Likelihood::graph_for(const Group& g) const {
    if (spec_.model == Model::RL) return base_graph_;
    return spaces_.at(g.origin).graph();
}

std::size_t Likelihood::origin_node(const Group& g) const {
    if (spec_.model == Model::RL) return g.origin;
    return spaces_.at(g.origin).origin_index();
}

LogLik Likelihood::evaluate(std::span<const double> beta) const {
    if (beta.size() != num_params()) throw InvariantError("beta does not match the attribute arity");
    const auto util = edge_utilities(*net_, beta);
    const double mu = spec_.mu;
    LogLik ll;
    ll.per_obs.assign(obs_count_, 0.0);

    std::vector<double> values;
    bool rl_solved = false;
    for (const Group& g : groups_) {
        const ChoiceGraph& graph = graph_for(g);
        if (spec_.model == Model::CNRL) {
            const ExtendedStateSpace& xs = spaces_.at(g.origin);
            std::vector<double> node_mu(xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) node_mu[i] = spec_.nested->scale(xs.base(i), xs.acc(i));
            values = solve_nested_values(graph, util, ScaleField{mu, node_mu}, spec_.solver);
            for (std::size_t k = 0; k < g.obs.size(); ++k) {
                double lp = 0.0;
                for (std::size_t a : g.arcs[k]) {
                    // offsets are sorted, so the source node is found by bisection
                    const auto from = static_cast<std::size_t>(
                        std::upper_bound(graph.offsets.begin(), graph.offsets.end(), a) - graph.offsets.begin() - 1);
                    lp += (util[graph.edge_ids[a]] + values[graph.targets[a]] - values[from]) / node_mu[from];
                }
                ll.per_obs[g.obs[k]] = lp;
            }
            continue;
        }
        if (spec_.model == Model::CRL || !rl_solved) {
            values = solve_values(graph, util, mu, spec_.solver);
            rl_solved = true;
        }
        const double v0 = values[origin_node(g)];
        for (std::size_t i : g.obs)
            ll.per_obs[i] = v0 == kNegInf ? kNegInf : (dot(beta, attr_totals_[i]) - v0) / mu;
    }
    for (double x : ll.per_obs) ll.total += x;
    return ll;
}

std::vector<double> Likelihood::gradient(std::span<const double> beta, GradientMode mode, double h) const {
    const std::size_t A = num_params();
    std::vector<double> grad(A, 0.0);
    if (mode == GradientMode::FiniteDifference) {
        std::vector<double> b(beta.begin(), beta.end());
        for (std::size_t j = 0; j < A; ++j) {
            const double orig = b[j];
            b[j] = orig + h;
            const double up = evaluate(b).total;
            b[j] = orig - h;
            const double down = evaluate(b).total;
            b[j] = orig;
            grad[j] = (up - down) / (2.0 * h);
        }
        return grad;
    }
    if (spec_.model == Model::CNRL) throw InvariantError("analytic gradients are not available for CNRL");
    if (beta.size() != A) throw InvariantError("beta does not match the attribute arity");

    const auto util = edge_utilities(*net_, beta);
    const double mu = spec_.mu;
    std::vector<double> w;
    bool rl_solved = false;
    for (const Group& g : groups_) {
        const ChoiceGraph& graph = graph_for(g);
        if (spec_.model == Model::CRL || !rl_solved) {
            const auto values = solve_values(graph, util, mu, spec_.solver);
            const auto probs = arc_probabilities(graph, util, values, ScaleField{mu});
            w = value_sensitivities(graph, *net_, probs, values, mu);
            rl_solved = true;
        }
        const std::size_t o = origin_node(g);
        for (std::size_t i : g.obs)
            for (std::size_t j = 0; j < A; ++j) grad[j] += attr_totals_[i][j] / mu - w[o * A + j];
    }
    return grad;
}

LogLik loglik(const Network& net, const ModelSpec& spec, std::span<const double> beta,
              std::span<const Observation> observations) {
    return Likelihood(net, spec, observations).evaluate(beta);
}

std::vector<double> loglik_gradient(const Network& net, const ModelSpec& spec, std::span<const double> beta,
                                    std::span<const Observation> observations, GradientMode mode) {
    return Likelihood(net, spec, observations).gradient(beta, mode);
}

EstimationResult estimate(const Network& net, std::span<const Observation> observations,
                          const EstimationConfig& cfg) {
    if (observations.empty()) throw InvariantError("cannot estimate from an empty observation set");
    return estimate(Likelihood(net, cfg.spec, observations), cfg);
}

EstimationResult estimate(const Likelihood& lik, const EstimationConfig& cfg) {
    const std::size_t A = lik.num_params();
    if (cfg.beta0.size() != A) throw InvariantError("beta0 does not match the attribute arity");
    if (!(cfg.tol_grad > 0.0)) throw InvariantError("tol_grad must be positive");
    if (lik.num_observations() == 0) throw InvariantError("cannot estimate from an empty observation set");
    const double n = static_cast<double>(lik.num_observations());

    EstimationResult res;
    // Minimize f = -LL / n.
    auto objective = [&](const std::vector<double>& b) -> double {
        try {
            const double ll = lik.evaluate(b).total;
            return std::isfinite(ll) ? -ll / n : std::numeric_limits<double>::infinity();
        } catch (const SolveFailure& e) {
            res.failure = e.what();
            ++res.failed_evaluations;
            return std::numeric_limits<double>::infinity();
        }
    };
    auto grad_of = [&](const std::vector<double>& b) {
        auto g = lik.gradient(b, cfg.gradient_mode);
        for (double& x : g) x = -x / n;
        return g;
    };

    std::vector<double> beta = cfg.beta0;
    double f;
    try {
        f = -lik.evaluate(beta).total / n;
    } catch (const SolveFailure& e) {
        throw SolveFailure(std::string(model_name(lik.spec().model)) + " cannot be solved at the starting beta (" +
                           e.what() + "); the constrained model keeps the value system stable");
    }
    if (!std::isfinite(f)) throw InfeasibleObservation({}, "log-likelihood is not finite at the starting beta");
    std::vector<double> g = grad_of(beta);
    res.trace.push_back(-f);

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(A));
    bool fresh = true;
    auto as_vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); };

    while (res.outer_iters < cfg.max_outer_iters) {
        if (sup_norm(g) < cfg.tol_grad) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd d = -H * as_vec(g);
        double slope = d.dot(as_vec(g));
        if (!(slope < 0.0)) {
            H.setIdentity();
            fresh = true;
            d = -as_vec(g);
            slope = d.dot(as_vec(g));
        }
        double t = 1.0;
        std::vector<double> trial(A);
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            for (std::size_t j = 0; j < A; ++j) trial[j] = beta[j] + t * d[static_cast<Eigen::Index>(j)];
            f_new = objective(trial);
            if (f_new <= f + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (fresh) break;
            H.setIdentity();
            fresh = true;
            continue;
        }
        std::vector<double> g_new = grad_of(trial);
        Eigen::VectorXd s = as_vec(trial) - as_vec(beta);
        Eigen::VectorXd y = as_vec(g_new) - as_vec(g);
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (fresh) H *= sy / y.dot(y);
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(H.rows(), H.cols());
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
            fresh = false;
        }
        beta = std::move(trial);
        f = f_new;
        g = std::move(g_new);
        ++res.outer_iters;
        res.trace.push_back(-f);
    }
    if (!res.converged && sup_norm(g) < cfg.tol_grad) res.converged = true;

    res.beta = beta;
    res.avg_loglik = -f;
    res.loglik = -f * n;

    // Numerical Hessian of the total log-likelihood from central differences of the gradient.
    Eigen::MatrixXd hess(static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(A));
    res.std_err.assign(A, std::numeric_limits<double>::quiet_NaN());
    res.t_stat.assign(A, std::numeric_limits<double>::quiet_NaN());
    try {
        std::vector<double> b = beta;
        for (std::size_t j = 0; j < A; ++j) {
            const double h = 1e-4 * std::max(1.0, std::abs(beta[j]));
            b[j] = beta[j] + h;
            const auto up = lik.gradient(b, cfg.gradient_mode);
            b[j] = beta[j] - h;
            const auto down = lik.gradient(b, cfg.gradient_mode);
            b[j] = beta[j];
            for (std::size_t i = 0; i < A; ++i)
                hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (up[i] - down[i]) / (2.0 * h);
        }
        const Eigen::MatrixXd info = -0.5 * (hess + hess.transpose());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
            for (std::size_t j = 0; j < A; ++j) {
                const double var = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
                if (var > 0.0 && std::isfinite(var)) {
                    res.std_err[j] = std::sqrt(var);
                    res.t_stat[j] = beta[j] / res.std_err[j];
                }
            }
        }
    } catch (const SolveFailure& e) {
        res.failure = e.what();
    }
    return res;
}

double percent_improve(double ll_crl, double ll_rl) {
    if (ll_rl == 0.0) throw InvariantError("percent improvement is undefined when the RL log-likelihood is 0");
    return 100.0 * (ll_crl - ll_rl) / std::abs(ll_rl);
}

}  // namespace crl
