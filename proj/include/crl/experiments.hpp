#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crl/estimation.hpp"
#include "crl/network.hpp"

namespace crl {

/// One computed-vs-expected value with its tolerance.
struct CellCheck {
    std::string table;
    std::string row;
    std::string column;
    double expected = 0.0;
    double computed = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ToyReport {
    std::vector<CellCheck> cells;
    bool all_pass() const;
    void write_text(std::ostream& out) const;
    void write_csv(std::ostream& out) const;
};

/// Path probabilities on the two shipped toy networks against their reference
/// values (tolerance 1e-3 for the four-path network, 5e-3 for the station network).
/// Throws std::runtime_error when an asset is missing.
ToyReport run_toy_tables(const std::string& data_dir);

struct SweepSpec {
    std::vector<std::size_t> dag_sizes{20, 30, 40, 50};
    std::size_t graphs_per_size = 5;
    std::vector<double> thresholds{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t trials = 10;
    std::size_t n_insample = 3000;
    std::size_t n_outsample = 1000;
    Model generator_model = Model::CRL;
    std::vector<double> beta_true{-4.0, -0.1, -0.05, -0.3};
    std::uint64_t seed = 2024;
    /// Explicit generator seeds per size; when empty they derive from `seed`.
    std::vector<std::uint64_t> graph_seeds;
    /// Fraction of nodes turned into reset stations (recharge study only).
    double station_fraction = 0.1;

    void check() const;
};

struct SweepCell {
    std::size_t size = 0;
    std::size_t graph = 0;
    std::uint64_t graph_seed = 0;
    double threshold = 0.0;
    std::size_t trial = 0;
    Quanta alpha = 0;
    bool ok = false;
    std::string error;
    /// Whether the bound removes at least one origin-destination path.
    bool pruned = false;
    double ll_in_rl = 0.0, ll_in_crl = 0.0;
    double ll_out_rl = 0.0, ll_out_crl = 0.0;
    double improve_in = 0.0, improve_out = 0.0;
    std::vector<double> beta_rl, beta_crl;
};

struct SweepSummary {
    std::size_t size = 0;
    double threshold = 0.0;
    std::size_t cells = 0;
    std::size_t failures = 0;
    double mean_improve_in = 0.0;
    double mean_improve_out = 0.0;
};

struct SweepReport {
    std::vector<SweepCell> cells;
    std::vector<SweepSummary> summary;
    /// Cells with feasible data where in-sample CRL LL < RL LL, or equal despite pruning.
    std::size_t dominance_violations() const;
    void write_text(std::ostream& out) const;
    void write_csv(std::ostream& out) const;
};

/// Origin-destination path counts on the base network and under the bound.
struct PathCounts {
    double all = 0.0;
    double feasible = 0.0;
};
PathCounts count_paths(const Network& net, StateId origin, std::span<const Quanta> alpha);

/// Seed for graph `index` of a given size: the explicit seed when given, else
/// the index-th candidate from a seeded stream whose graph has a feasible path
/// at the tightest threshold.
std::uint64_t sweep_graph_seed(const SweepSpec& spec, std::size_t size, std::size_t index);

/// One trial: simulate in- and out-of-sample data, estimate RL and CRL, and fill
/// the log-likelihood fields. RL starts from zero and CRL from the RL estimate.
/// Failures are caught and stored in the cell.
SweepCell run_sweep_cell(const Network& net, const SweepSpec& spec, double threshold, std::size_t trial,
                         std::uint64_t data_seed);

SweepReport run_threshold_sweep(const SweepSpec& spec);

struct RechargeRow {
    std::size_t size = 0;
    std::size_t graph = 0;
    std::uint64_t graph_seed = 0;
    std::size_t trial = 0;
    std::vector<StateId> stations;
    Quanta alpha = 0;
    bool ok = false;
    std::string error;
    double ll_rl = 0.0, ll_crl = 0.0;
};

struct RechargeReport {
    std::vector<RechargeRow> rows;
    std::size_t violations() const;
    void write_text(std::ostream& out) const;
    void write_csv(std::ostream& out) const;
};

/// Copy of `net` with reset flags added in dimension `dim`.
Network with_resets(const Network& net, std::span<const StateId> stations, std::size_t dim = 0);

/// Random geometric DAGs with station_fraction of the interior nodes as resets;
/// CRL data at each threshold in spec.thresholds; RL and CRL estimated on it.
RechargeReport run_recharge_study(const SweepSpec& spec);

struct StabilitySpec {
    std::vector<double> beta{-0.5, 0.0, 1.0, -0.1, -0.05, -0.3};
    std::vector<Quanta> alphas{10, 15, 20, 25};
    std::size_t n_obs = 1000;
    std::uint64_t seed = 7;
};

struct StabilityRow {
    Quanta alpha = 0;
    bool ok = false;
    std::string error;
    double avg_ll = 0.0;
    std::vector<double> beta;
    std::size_t extended_states = 0;
};

struct StabilityReport {
    bool rl_failed = false;
    std::string rl_message;
    std::vector<StabilityRow> rows;
    /// RL fails, every CRL row succeeds, and LL strictly decreases in alpha.
    bool trend_holds() const;
    void write_text(std::ostream& out) const;
    void write_csv(std::ostream& out) const;
};

/// RL solve and estimation versus CRL estimation with link-count bounds on a
/// cyclic network. Data at each alpha is simulated from CRL at spec.beta.
StabilityReport run_stability_contrast(const Network& net, const StabilitySpec& spec);

/// Graphviz text: pen width grows linearly with probability; edges below the
/// threshold are dashed.
std::string export_dot(const Network& net, std::span<const double> edge_probs, double threshold_for_dashed);

}  // namespace crl
