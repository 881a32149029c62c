#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crl/crl.hpp"
#include "crl/network.hpp"
#include "crl/value_solver.hpp"

namespace crl {

enum class Model { RL, CRL, CNRL };
enum class GradientMode { Analytic, FiniteDifference };

Model parse_model(const std::string& name);
const char* model_name(Model m);

/// Everything that stays fixed while beta varies.
struct ModelSpec {
    Model model = Model::RL;
    double mu = 1.0;
    /// Bounds in quanta; ignored by RL.
    std::vector<Quanta> alpha;
    /// Dispersion field for CNRL; defaults to the constant mu.
    std::optional<NestedSpec> nested;
    SolverOptions solver;
    ExtendedBuildOptions build;
};

struct LogLik {
    double total = 0.0;
    std::vector<double> per_obs;
};

/// Log-likelihood of a fixed observation set as a function of beta. Extended
/// spaces, lifted paths and attribute totals are built once per origin; each
/// evaluation only recomputes utilities and value functions.
class Likelihood {
public:
    /// Throws InfeasibleObservation listing every observation with probability
    /// zero under the bounds, and InvariantError on invalid paths.
    Likelihood(const Network& net, ModelSpec spec, std::span<const Observation> observations);

    const Network& network() const noexcept { return *net_; }
    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t num_observations() const noexcept { return obs_count_; }
    std::size_t num_params() const noexcept { return net_->attribute_arity(); }

    /// Propagates SolveFailure from the value solve.
    LogLik evaluate(std::span<const double> beta) const;
    /// Analytic mode needs RL or CRL. Finite differences are central with step h.
    std::vector<double> gradient(std::span<const double> beta, GradientMode mode = GradientMode::Analytic,
                                 double h = 1e-5) const;

    /// Extended spaces per origin (empty for RL).
    const std::map<StateId, ExtendedStateSpace>& extended_spaces() const noexcept { return spaces_; }

private:
    struct Group {
        StateId origin = 0;
        std::vector<std::size_t> obs;          // indices into the observation list
        std::vector<std::vector<std::size_t>> arcs;  // lifted arc ids, CNRL only
    };

    const ChoiceGraph& graph_for(const Group& g) const;
    std::size_t origin_node(const Group& g) const;

    const Network* net_;
    ModelSpec spec_;
    std::size_t obs_count_ = 0;
    std::vector<std::vector<double>> attr_totals_;
    std::vector<Group> groups_;
    std::map<StateId, ExtendedStateSpace> spaces_;
    ChoiceGraph base_graph_;
};

/// Convenience wrappers building a Likelihood for one call.
LogLik loglik(const Network& net, const ModelSpec& spec, std::span<const double> beta,
              std::span<const Observation> observations);
std::vector<double> loglik_gradient(const Network& net, const ModelSpec& spec, std::span<const double> beta,
                                    std::span<const Observation> observations,
                                    GradientMode mode = GradientMode::Analytic);

struct EstimationConfig {
    ModelSpec spec;
    std::vector<double> beta0;
    GradientMode gradient_mode = GradientMode::Analytic;
    /// Bound on the sup-norm of the average log-likelihood gradient.
    double tol_grad = 1e-6;
    std::size_t max_outer_iters = 200;
};

struct EstimationResult {
    std::vector<double> beta;
    std::vector<double> std_err;
    std::vector<double> t_stat;
    double loglik = 0.0;
    double avg_loglik = 0.0;
    bool converged = false;
    std::size_t outer_iters = 0;
    /// Average log-likelihood after each accepted step, starting at beta0.
    std::vector<double> trace;
    /// Last SolveFailure met during the line search, if any.
    std::optional<std::string> failure;
    std::size_t failed_evaluations = 0;
};

/// Maximum likelihood by BFGS with Armijo backtracking. Throws SolveFailure
/// when the model cannot be solved at beta0.
EstimationResult estimate(const Network& net, std::span<const Observation> observations,
                          const EstimationConfig& cfg);

/// Same, reusing an existing Likelihood.
EstimationResult estimate(const Likelihood& lik, const EstimationConfig& cfg);

/// 100 (ll_crl - ll_rl) / |ll_rl|. Throws InvariantError when ll_rl is zero.
double percent_improve(double ll_crl, double ll_rl);

}  // namespace crl
