#include "crl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "crl/crl.hpp"
#include "crl/errors.hpp"
#include "crl/rl.hpp"
#include "crl/simulation.hpp"

namespace crl {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto p : parts) h = splitmix(h ^ p);
    return h;
}

std::string join(std::span<const double> xs) {
    std::ostringstream out;
    out << std::setprecision(10);
    for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? " " : "") << xs[i];
    return out.str();
}

std::string path_label(std::span<const StateId> path) {
    std::string s = "[";
    for (std::size_t i = 0; i < path.size(); ++i) s += (i ? "," : "") + std::to_string(path[i]);
    return s + "]";
}

EstimationResult fit(const Likelihood& lik, std::vector<double> beta0) {
    EstimationConfig cfg;
    cfg.spec = lik.spec();
    cfg.beta0 = std::move(beta0);
    return estimate(lik, cfg);
}

}  // namespace

bool ToyReport::all_pass() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellCheck& c) { return c.pass; });
}

void ToyReport::write_text(std::ostream& out) const {
    std::string current;
    for (const auto& c : cells) {
        if (c.table != current) {
            current = c.table;
            out << "\n" << current << "\n";
            out << std::left << std::setw(20) << "path" << std::setw(10) << "column" << std::right << std::setw(10)
                << "expected" << std::setw(10) << "computed" << "  result\n";
        }
        out << std::left << std::setw(20) << c.row << std::setw(10) << c.column << std::right << std::fixed
            << std::setprecision(3) << std::setw(10) << c.expected << std::setw(10) << c.computed << "  "
            << (c.pass ? "pass" : "FAIL") << "\n";
    }
    out.unsetf(std::ios::fixed);
}

void ToyReport::write_csv(std::ostream& out) const {
    out << "table,path,column,expected,computed,tolerance,pass\n" << std::setprecision(12);
    for (const auto& c : cells)
        out << '"' << c.table << "\",\"" << c.row << "\"," << c.column << ',' << c.expected << ',' << c.computed
            << ',' << c.tolerance << ',' << (c.pass ? 1 : 0) << '\n';
}

ToyReport run_toy_tables(const std::string& data_dir) {
    ToyReport report;
    auto add = [&](const std::string& table, const Observation& obs, const std::string& col, double expected,
                   double computed, double tol) {
        report.cells.push_back(CellCheck{table, path_label(obs.path), col, expected, computed, tol,
                                         std::abs(expected - computed) <= tol});
    };

    {
        const Network net = load_network_file(data_dir + "/toy_four_path.net");
        const UtilitySpec u{{-2.0}, 1.0};
        const std::vector<Observation> paths{{{1, 2}}, {{1, 3, 5, 2}}, {{1, 3, 4, 5, 2}}, {{1, 3, 4, 6, 2}}};
        const double rl_expected[] = {0.083, 0.610, 0.224, 0.083};
        const double crl_expected[] = {0.000, 0.731, 0.269, 0.000};
        const auto vt = solve_rl(net, u);
        const Quanta alpha[] = {5};
        const auto xs = build_extended(net, 1, alpha);
        const auto evt = solve_erl(xs, net, u);
        for (std::size_t i = 0; i < paths.size(); ++i) {
            add("four-path network", paths[i], "RL", rl_expected[i], path_prob_rl(net, u, vt, paths[i]), 1e-3);
            add("four-path network", paths[i], "CRL a=2.5", crl_expected[i],
                path_prob_crl(xs, net, u, evt, paths[i]), 1e-3);
        }
    }
    {
        const Network net = load_network_file(data_dir + "/toy_stations.net");
        const UtilitySpec u{{-2.0}, 1.0};
        const std::vector<Observation> paths{{{1, 2}}, {{1, 3, 4, 5, 2}}, {{1, 3, 4, 5, 6, 7, 2}}, {{1, 3, 6, 7, 2}}};
        const struct {
            Quanta alpha;
            const char* label;
            double expected[4];
        } columns[] = {{10, "a=5", {0.644, 0.237, 0.032, 0.087}},
                       {8, "a=4", {0.0, 0.665, 0.090, 0.245}},
                       {6, "a=3", {0.0, 0.0, 1.0, 0.0}}};
        for (const auto& col : columns) {
            const Quanta alpha[] = {col.alpha};
            const auto xs = build_extended(net, 1, alpha);
            const auto evt = solve_erl(xs, net, u);
            for (std::size_t i = 0; i < paths.size(); ++i)
                add("station network", paths[i], col.label, col.expected[i],
                    path_prob_crl(xs, net, u, evt, paths[i]), 5e-3);
        }
    }
    return report;
}

void SweepSpec::check() const {
    if (dag_sizes.empty() || graphs_per_size == 0 || thresholds.empty() || trials == 0 || n_insample == 0 ||
        n_outsample == 0)
        throw InvariantError("sweep counts must be positive");
    for (double t : thresholds)
        if (!(t > 0.0 && t <= 1.0)) throw InvariantError("thresholds must lie in (0, 1]");
    if (!(station_fraction >= 0.0 && station_fraction < 1.0)) throw InvariantError("station fraction must lie in [0, 1)");
    if (beta_true.size() != 4) throw InvariantError("the geometric DAG has 4 attributes");
}

PathCounts count_paths(const Network& net, StateId origin, std::span<const Quanta> alpha) {
    if (!net.is_acyclic()) throw InvariantError("path counts are infinite on a cyclic network");
    PathCounts pc;
    std::vector<double> ways(net.num_states(), 0.0);
    ways[origin] = 1.0;
    for (StateId s : net.topological_order())
        if (s != net.destination())
            for (const auto& e : net.out_edges(s)) ways[e.to] += ways[s];
    pc.all = ways[net.destination()];

    const auto xs = build_extended(net, origin, alpha);
    const auto& g = xs.graph();
    std::vector<double> xways(xs.size(), 0.0);
    xways[xs.origin_index()] = 1.0;
    for (auto s : g.topo_order)
        for (std::size_t a = g.offsets[s]; a < g.offsets[s + 1]; ++a) xways[g.targets[a]] += xways[s];
    for (std::size_t d : xs.destination_indices()) pc.feasible += xways[d];
    return pc;
}

std::uint64_t sweep_graph_seed(const SweepSpec& spec, std::size_t size, std::size_t index) {
    if (index < spec.graph_seeds.size()) return spec.graph_seeds[index];
    const double tightest = *std::min_element(spec.thresholds.begin(), spec.thresholds.end());
    std::size_t accepted = 0;
    for (std::uint64_t k = 0; k < 10000; ++k) {
        const std::uint64_t seed = mix({spec.seed, size, k});
        const Network net = generate_geometric_dag(size, seed);
        const StateId o = resolve_origin(net, std::nullopt);
        const std::vector<Quanta> alpha{threshold_from_percent(net, o, tightest)};
        if (count_paths(net, o, alpha).feasible < 1.0) continue;
        if (accepted++ == index) return seed;
    }
    throw InvariantError("no generated graph is feasible at the tightest threshold");
}

SweepCell run_sweep_cell(const Network& net, const SweepSpec& spec, double threshold, std::size_t trial,
                         std::uint64_t data_seed) {
    SweepCell cell;
    cell.threshold = threshold;
    cell.trial = trial;
    try {
        const StateId o = resolve_origin(net, std::nullopt);
        cell.alpha = threshold_from_percent(net, o, threshold);
        const std::vector<Quanta> alpha{cell.alpha};
        const auto counts = count_paths(net, o, alpha);
        if (counts.feasible == 0.0) throw InfeasibleObservation({}, "no path satisfies the bound");
        cell.pruned = counts.feasible < counts.all;

        const UtilitySpec truth{spec.beta_true, 1.0};
        SimConfig sim;
        sim.model = spec.generator_model;
        sim.rejection = spec.generator_model == Model::RL;
        sim.n_obs = spec.n_insample;
        sim.seed = mix({data_seed, trial, 1});
        const auto in_sample = simulate(net, truth, alpha, sim, o);
        sim.n_obs = spec.n_outsample;
        sim.seed = mix({data_seed, trial, 2});
        const auto out_sample = simulate(net, truth, alpha, sim, o);

        const ModelSpec rl_spec{Model::RL, 1.0, {}, std::nullopt, {}, {}};
        const ModelSpec crl_spec{Model::CRL, 1.0, alpha, std::nullopt, {}, {}};
        const Likelihood rl_in(net, rl_spec, in_sample), crl_in(net, crl_spec, in_sample);
        const auto rl = fit(rl_in, std::vector<double>(spec.beta_true.size(), 0.0));
        const auto crl = fit(crl_in, rl.beta);
        cell.beta_rl = rl.beta;
        cell.beta_crl = crl.beta;
        cell.ll_in_rl = rl.avg_loglik;
        cell.ll_in_crl = crl.avg_loglik;
        const double n_out = static_cast<double>(out_sample.size());
        cell.ll_out_rl = Likelihood(net, rl_spec, out_sample).evaluate(rl.beta).total / n_out;
        cell.ll_out_crl = Likelihood(net, crl_spec, out_sample).evaluate(crl.beta).total / n_out;
        cell.improve_in = percent_improve(cell.ll_in_crl, cell.ll_in_rl);
        cell.improve_out = percent_improve(cell.ll_out_crl, cell.ll_out_rl);
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.error = e.what();
    }
    return cell;
}

std::size_t SweepReport::dominance_violations() const {
    std::size_t bad = 0;
    for (const auto& c : cells) {
        if (!c.ok) continue;
        if (c.ll_in_crl < c.ll_in_rl || (c.pruned && !(c.ll_in_crl > c.ll_in_rl))) ++bad;
    }
    return bad;
}

void SweepReport::write_text(std::ostream& out) const {
    out << std::left << std::setw(6) << "size" << std::setw(11) << "threshold" << std::right << std::setw(7) << "cells"
        << std::setw(9) << "failed" << std::setw(14) << "%Improve in" << std::setw(15) << "%Improve out\n";
    for (const auto& s : summary)
        out << std::left << std::setw(6) << s.size << std::setw(11) << s.threshold << std::right << std::setw(7)
            << s.cells << std::setw(9) << s.failures << std::fixed << std::setprecision(3) << std::setw(14)
            << s.mean_improve_in << std::setw(14) << s.mean_improve_out << "\n"
            << std::defaultfloat;
    out << "dominance violations: " << dominance_violations() << "\n";
}

void SweepReport::write_csv(std::ostream& out) const {
    out << "size,graph,graph_seed,threshold,trial,alpha,ok,pruned,ll_in_rl,ll_in_crl,ll_out_rl,ll_out_crl,"
           "improve_in,improve_out,beta_rl,beta_crl,error\n"
        << std::setprecision(12);
    for (const auto& c : cells)
        out << c.size << ',' << c.graph << ',' << c.graph_seed << ',' << c.threshold << ',' << c.trial << ','
            << c.alpha << ',' << c.ok << ',' << c.pruned << ',' << c.ll_in_rl << ',' << c.ll_in_crl << ','
            << c.ll_out_rl << ',' << c.ll_out_crl << ',' << c.improve_in << ',' << c.improve_out << ",\""
            << join(c.beta_rl) << "\",\"" << join(c.beta_crl) << "\",\"" << c.error << "\"\n";
}

SweepReport run_threshold_sweep(const SweepSpec& spec) {
    spec.check();
    SweepReport report;
    for (std::size_t size : spec.dag_sizes) {
        for (std::size_t g = 0; g < spec.graphs_per_size; ++g) {
            const std::uint64_t gseed = sweep_graph_seed(spec, size, g);
            const Network net = generate_geometric_dag(size, gseed);
            for (double th : spec.thresholds)
                for (std::size_t t = 0; t < spec.trials; ++t) {
                    const auto dseed = mix({gseed, static_cast<std::uint64_t>(std::llround(th * 1e6))});
                    SweepCell cell = run_sweep_cell(net, spec, th, t, dseed);
                    cell.size = size;
                    cell.graph = g;
                    cell.graph_seed = gseed;
                    report.cells.push_back(std::move(cell));
                }
        }
        for (double th : spec.thresholds) {
            SweepSummary s;
            s.size = size;
            s.threshold = th;
            for (const auto& c : report.cells) {
                if (c.size != size || c.threshold != th) continue;
                if (!c.ok) {
                    ++s.failures;
                    continue;
                }
                ++s.cells;
                s.mean_improve_in += c.improve_in;
                s.mean_improve_out += c.improve_out;
            }
            if (s.cells) {
                s.mean_improve_in /= static_cast<double>(s.cells);
                s.mean_improve_out /= static_cast<double>(s.cells);
            }
            report.summary.push_back(s);
        }
    }
    return report;
}

Network with_resets(const Network& net, std::span<const StateId> stations, std::size_t dim) {
    if (dim >= net.constraint_arity()) throw InvariantError("reset dimension out of range");
    NetworkBuilder b(net.num_states(), net.destination(), net.attribute_names(), net.constraint_arity(),
                     net.cost_quantum());
    if (net.origin()) b.origin(*net.origin());
    for (const auto& e : net.edges()) b.add_edge(e.from, e.to, e.attributes, e.costs);
    for (StateId s = 0; s < net.num_states(); ++s)
        for (std::size_t k = 0; k < net.constraint_arity(); ++k)
            if (net.is_reset(s, k)) b.add_reset(s, k);
    for (StateId s : stations) b.add_reset(s, dim);
    return b.build();
}

std::size_t RechargeReport::violations() const {
    std::size_t bad = 0;
    for (const auto& r : rows)
        if (r.ok && r.ll_crl < r.ll_rl - 1e-12 * std::abs(r.ll_rl)) ++bad;
    return bad;
}

void RechargeReport::write_text(std::ostream& out) const {
    out << std::left << std::setw(6) << "size" << std::setw(7) << "graph" << std::setw(7) << "trial" << std::setw(7)
        << "alpha" << std::right << std::setw(12) << "LL RL" << std::setw(12) << "LL CRL" << "  stations\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(6) << r.size << std::setw(7) << r.graph << std::setw(7) << r.trial
            << std::setw(7) << r.alpha << std::right;
        if (r.ok)
            out << std::fixed << std::setprecision(4) << std::setw(12) << r.ll_rl << std::setw(12) << r.ll_crl
                << std::defaultfloat;
        else
            out << std::setw(12) << "-" << std::setw(12) << "-";
        out << " ";
        for (StateId s : r.stations) out << ' ' << s;
        if (!r.ok) out << "  (" << r.error << ")";
        out << "\n";
    }
    out << "instances with CRL below RL: " << violations() << "\n";
}

void RechargeReport::write_csv(std::ostream& out) const {
    out << "size,graph,graph_seed,trial,alpha,stations,ok,ll_rl,ll_crl,error\n" << std::setprecision(12);
    for (const auto& r : rows) {
        out << r.size << ',' << r.graph << ',' << r.graph_seed << ',' << r.trial << ',' << r.alpha << ",\"";
        for (std::size_t i = 0; i < r.stations.size(); ++i) out << (i ? " " : "") << r.stations[i];
        out << "\"," << r.ok << ',' << r.ll_rl << ',' << r.ll_crl << ",\"" << r.error << "\"\n";
    }
}

RechargeReport run_recharge_study(const SweepSpec& spec) {
    spec.check();
    RechargeReport report;
    for (std::size_t size : spec.dag_sizes) {
        for (std::size_t g = 0; g < spec.graphs_per_size; ++g) {
            const std::uint64_t gseed = sweep_graph_seed(spec, size, g);
            const Network base = generate_geometric_dag(size, gseed);
            std::vector<StateId> interior(size - 2);
            std::iota(interior.begin(), interior.end(), StateId{1});
            std::mt19937_64 rng(mix({gseed, 0x5eedULL}));
            std::shuffle(interior.begin(), interior.end(), rng);
            const auto count = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(spec.station_fraction * static_cast<double>(size))));
            std::vector<StateId> stations(interior.begin(), interior.begin() + std::min(count, interior.size()));
            std::sort(stations.begin(), stations.end());
            const Network net = with_resets(base, stations);
            const StateId o = resolve_origin(net, std::nullopt);

            for (double th : spec.thresholds)
                for (std::size_t t = 0; t < spec.trials; ++t) {
                    RechargeRow row;
                    row.size = size;
                    row.graph = g;
                    row.graph_seed = gseed;
                    row.trial = t;
                    row.stations = stations;
                    try {
                        row.alpha = threshold_from_percent(net, o, th);
                        const std::vector<Quanta> alpha{row.alpha};
                        SimConfig sim;
                        sim.model = Model::CRL;
                        sim.n_obs = spec.n_insample;
                        sim.seed = mix({gseed, static_cast<std::uint64_t>(std::llround(th * 1e6)), t});
                        const auto data = simulate(net, UtilitySpec{spec.beta_true, 1.0}, alpha, sim, o);
                        const Likelihood rl_lik(net, ModelSpec{Model::RL, 1.0, {}, std::nullopt, {}, {}}, data);
                        const Likelihood crl_lik(net, ModelSpec{Model::CRL, 1.0, alpha, std::nullopt, {}, {}}, data);
                        const auto rl = fit(rl_lik, std::vector<double>(spec.beta_true.size(), 0.0));
                        const auto crl = fit(crl_lik, rl.beta);
                        row.ll_rl = rl.avg_loglik;
                        row.ll_crl = crl.avg_loglik;
                        row.ok = true;
                    } catch (const std::exception& e) {
                        row.error = e.what();
                    }
                    report.rows.push_back(std::move(row));
                }
        }
    }
    return report;
}

bool StabilityReport::trend_holds() const {
    if (!rl_failed || rows.empty()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].ok) return false;
        if (i > 0 && !(rows[i].avg_ll < rows[i - 1].avg_ll)) return false;
    }
    return true;
}

void StabilityReport::write_text(std::ostream& out) const {
    out << "RL: " << (rl_failed ? "-  (" + rl_message + ")" : "solved") << "\n";
    out << std::setw(6) << "alpha" << std::setw(14) << "CRL avg LL" << std::setw(12) << "states" << "  beta\n";
    for (const auto& r : rows) {
        out << std::setw(6) << r.alpha;
        if (r.ok)
            out << std::fixed << std::setprecision(4) << std::setw(14) << r.avg_ll << std::defaultfloat
                << std::setw(12) << r.extended_states << "  " << join(r.beta);
        else
            out << std::setw(14) << "-" << std::setw(12) << "-" << "  " << r.error;
        out << "\n";
    }
    out << "trend: " << (trend_holds() ? "holds" : "does not hold") << "\n";
}

void StabilityReport::write_csv(std::ostream& out) const {
    out << "model,alpha,ok,avg_ll,extended_states,beta,error\n" << std::setprecision(12);
    out << "RL,,0,,,,\"" << rl_message << "\"\n";
    for (const auto& r : rows)
        out << "CRL," << r.alpha << ',' << r.ok << ',' << r.avg_ll << ',' << r.extended_states << ",\""
            << join(r.beta) << "\",\"" << r.error << "\"\n";
}

StabilityReport run_stability_contrast(const Network& net, const StabilitySpec& spec) {
    if (net.constraint_arity() != 1) throw InvariantError("stability contrast needs one link-count dimension");
    StabilityReport report;
    const StateId o = resolve_origin(net, std::nullopt);
    const UtilitySpec truth{spec.beta, 1.0};
    std::vector<std::vector<Observation>> data(spec.alphas.size());
    for (std::size_t i = 0; i < spec.alphas.size(); ++i) {
        StabilityRow row;
        row.alpha = spec.alphas[i];
        try {
            const std::vector<Quanta> alpha{row.alpha};
            SimConfig sim;
            sim.model = Model::CRL;
            sim.n_obs = spec.n_obs;
            sim.seed = mix({spec.seed, static_cast<std::uint64_t>(row.alpha)});
            data[i] = simulate(net, truth, alpha, sim, o);
            const Likelihood lik(net, ModelSpec{Model::CRL, 1.0, alpha, std::nullopt, {}, {}}, data[i]);
            row.extended_states = lik.extended_spaces().begin()->second.size();
            const auto res = fit(lik, spec.beta);
            row.avg_ll = res.avg_loglik;
            row.beta = res.beta;
            row.ok = true;
            if (!res.converged) row.error = "did not converge";
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }

    // RL estimation on the first data set that could be generated.
    auto it = std::find_if(data.begin(), data.end(), [](const auto& d) { return !d.empty(); });
    try {
        if (it == data.end()) {
            solve_rl(net, truth);
        } else {
            EstimationConfig cfg;
            cfg.spec = ModelSpec{Model::RL, 1.0, {}, std::nullopt, {}, {}};
            cfg.beta0 = spec.beta;
            estimate(net, *it, cfg);
        }
        report.rl_message = "RL solved";
    } catch (const SolveFailure& e) {
        report.rl_failed = true;
        report.rl_message = e.what();
    }
    return report;
}

std::string export_dot(const Network& net, std::span<const double> edge_probs, double threshold_for_dashed) {
    if (edge_probs.size() != net.num_edges()) throw InvariantError("one probability per edge is required");
    std::ostringstream out;
    out << "digraph network {\n  rankdir=LR;\n  node [shape=circle];\n";
    for (std::size_t i = 0; i < net.num_edges(); ++i) {
        const Edge& e = net.edge(i);
        const double p = std::clamp(edge_probs[i], 0.0, 1.0);
        out << "  " << e.from << " -> " << e.to << " [penwidth=" << std::setprecision(4) << 0.5 + 4.5 * p
            << ", label=\"" << std::fixed << std::setprecision(3) << p << "\"" << std::defaultfloat;
        if (p < threshold_for_dashed) out << ", style=dashed";
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace crl
