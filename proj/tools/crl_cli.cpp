#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crl/crl.hpp"
#include "crl/errors.hpp"
#include "crl/estimation.hpp"
#include "crl/experiments.hpp"
#include "crl/path_oracle.hpp"
#include "crl/rl.hpp"
#include "crl/simulation.hpp"

#ifndef CRL_DATA_DIR
#define CRL_DATA_DIR "data"
#endif

namespace {

using namespace crl;

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::istringstream in(item);
        T v;
        if (!(in >> v) || !(in >> std::ws).eof()) throw InvariantError("cannot parse list entry '" + item + "'");
        out.push_back(v);
    }
    return out;
}

struct Common {
    std::string net_file;
    std::string beta = "";
    double mu = 1.0;
    std::optional<StateId> origin;
    std::string alpha;
    std::string alpha_units;

    void add_net(CLI::App* app) { app->add_option("network", net_file, "network file")->required(); }
    void add_beta(CLI::App* app, bool required = true) {
        auto* o = app->add_option("--beta", beta, "comma-separated coefficients");
        if (required) o->required();
        app->add_option("--mu", mu, "scale parameter");
    }
    void add_origin(CLI::App* app) { app->add_option("--origin", origin, "origin state (default from file)"); }
    void add_alpha(CLI::App* app) {
        app->add_option("--alpha", alpha, "bounds in cost quanta, comma-separated");
        app->add_option("--alpha-units", alpha_units, "bounds in cost units, comma-separated");
    }

    Network network() const { return load_network_file(net_file); }
    UtilitySpec utility() const { return UtilitySpec{parse_list<double>(beta), mu}; }
    std::vector<Quanta> bounds(const Network& net, bool required) const {
        if (!alpha.empty()) return parse_list<Quanta>(alpha);
        if (!alpha_units.empty()) {
            std::vector<Quanta> q;
            for (double a : parse_list<double>(alpha_units))
                q.push_back(static_cast<Quanta>(std::floor(a / net.cost_quantum() + 1e-9)));
            return q;
        }
        if (required) throw InvariantError("--alpha or --alpha-units is required");
        return {};
    }
};

std::string path_text(std::span<const StateId> p) {
    std::string s;
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? " " : "") + std::to_string(p[i]);
    return s;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

template <typename Report>
void emit_report(const Report& r, const std::string& out_dir, const std::string& name) {
    r.write_text(std::cout);
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/" + name + ".csv");
    r.write_csv(csv);
    std::ofstream txt(out_dir + "/" + name + ".txt");
    r.write_text(txt);
}

// "state=mu,..." into per-state local scales; unlisted states keep the global mu
NestedSpec parse_nested(const Network& net, const std::string& text, double mu) {
    std::vector<double> table(net.num_states(), 0.0);
    for (const auto& item : parse_list<std::string>(text)) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvariantError("--nested-mu expects state=mu");
        table.at(std::stoul(item.substr(0, eq))) = std::stod(item.substr(eq + 1));
    }
    return NestedSpec::per_base(std::move(table), mu);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained recursive logit route choice toolkit"};
    app.require_subcommand(1);
    int status = 0;

    // paths
    Common pc;
    std::size_t max_paths = 100000;
    std::optional<std::size_t> hop_limit;
    auto* paths = app.add_subcommand("paths", "enumerate routes and their logit probabilities");
    pc.add_net(paths);
    pc.add_beta(paths);
    pc.add_origin(paths);
    pc.add_alpha(paths);
    paths->add_option("--max-paths", max_paths);
    paths->add_option("--hop-limit", hop_limit);
    paths->callback([&] {
        const Network net = pc.network();
        const auto u = pc.utility();
        u.check(net);
        const StateId o = resolve_origin(net, pc.origin);
        const auto ps = enumerate_paths(net, o, u.beta, EnumerateOptions{max_paths, hop_limit});
        const auto alpha = pc.bounds(net, false);
        const auto probs = mnl_over(ps, u.mu);
        std::optional<PathSet> feas;
        std::vector<double> fprobs;
        if (!alpha.empty()) {
            feas = restrict_stepwise(net, ps, alpha);
            if (!feas->empty()) fprobs = mnl_over(*feas, u.mu);
        }
        std::cout << std::setw(12) << "utility" << std::setw(10) << "P" << (feas ? "     P(a)" : "") << "  path\n";
        for (std::size_t i = 0; i < ps.size(); ++i) {
            std::cout << std::fixed << std::setprecision(4) << std::setw(12) << ps.utilities[i] << std::setw(10)
                      << probs[i];
            if (feas) {
                const auto k = find_path(*feas, ps.paths[i]);
                std::cout << std::setw(9) << (k ? fprobs[*k] : 0.0);
            }
            std::cout << "  " << path_text(ps.paths[i].path) << "\n";
        }
    });

    // solve / probs (unconstrained)
    Common sc;
    auto* solve = app.add_subcommand("solve", "solve the unconstrained value function");
    sc.add_net(solve);
    sc.add_beta(solve);
    solve->callback([&] {
        const Network net = sc.network();
        const auto vt = solve_rl(net, sc.utility());
        std::cout << "state        V            z\n" << std::setprecision(10);
        for (std::size_t s = 0; s < net.num_states(); ++s)
            std::cout << std::setw(5) << s << "  " << std::setw(12) << vt.value[s] << "  " << vt.z[s] << "\n";
    });

    Common lc;
    auto* probs = app.add_subcommand("probs", "unconstrained link choice probabilities");
    lc.add_net(probs);
    lc.add_beta(probs);
    probs->callback([&] {
        const Network net = lc.network();
        const auto u = lc.utility();
        const auto p = link_probs(net, u, solve_rl(net, u));
        for (std::size_t i = 0; i < net.num_edges(); ++i)
            std::cout << net.edge(i).from << " -> " << net.edge(i).to << "  " << std::setprecision(10) << p[i] << "\n";
    });

    // crl solve / probs / pathprob
    auto* crl_cmd = app.add_subcommand("crl", "constrained model on the extended state space");
    crl_cmd->require_subcommand(1);
    Common cc;
    std::string nested_mu;
    std::string path_arg, obs_file;
    auto add_crl_common = [&](CLI::App* sub) {
        cc.add_net(sub);
        cc.add_beta(sub);
        cc.add_origin(sub);
        cc.add_alpha(sub);
        sub->add_option("--nested-mu", nested_mu, "state=mu pairs giving local scales, comma-separated");
    };
    auto solve_ext = [&](const Network& net, const ExtendedStateSpace& xs) {
        const auto u = cc.utility();
        if (nested_mu.empty()) return solve_erl(xs, net, u);
        return solve_nested(xs, net, u, parse_nested(net, nested_mu, u.mu));
    };
    auto* crl_solve = crl_cmd->add_subcommand("solve", "extended space statistics and origin value");
    add_crl_common(crl_solve);
    crl_solve->callback([&] {
        const Network net = cc.network();
        const auto xs = build_extended(net, resolve_origin(net, cc.origin), cc.bounds(net, true));
        const auto evt = solve_ext(net, xs);
        std::cout << "extended states   " << xs.size() << "\n"
                  << "extended arcs     " << xs.graph().num_arcs() << "\n"
                  << "destinations      " << xs.destination_indices().size() << "\n"
                  << "acyclic           " << (xs.acyclic() ? "yes" : "no") << "\n"
                  << std::setprecision(12) << "V(origin)         " << evt.value[xs.origin_index()] << "\n"
                  << "z(origin)         " << evt.z[xs.origin_index()] << "\n";
    });
    auto* crl_probs = crl_cmd->add_subcommand("probs", "per-edge usage probabilities under the bounds");
    add_crl_common(crl_probs);
    crl_probs->callback([&] {
        const Network net = cc.network();
        const auto xs = build_extended(net, resolve_origin(net, cc.origin), cc.bounds(net, true));
        const auto evt = solve_ext(net, xs);
        const auto arcs = arc_probabilities(xs.graph(), edge_utilities(net, cc.utility().beta), evt.value, evt.scale());
        const auto flows = aggregate_edge_flows(xs, net, arcs);
        for (std::size_t i = 0; i < net.num_edges(); ++i)
            std::cout << net.edge(i).from << " -> " << net.edge(i).to << "  " << std::setprecision(10) << flows[i]
                      << "\n";
    });
    auto* crl_pp = crl_cmd->add_subcommand("pathprob", "probability of given routes");
    add_crl_common(crl_pp);
    crl_pp->add_option("--path", path_arg, "route as comma-separated states");
    crl_pp->add_option("--observations", obs_file, "file with one route per line");
    crl_pp->callback([&] {
        const Network net = cc.network();
        std::vector<Observation> obs;
        if (!path_arg.empty()) obs.push_back(Observation{parse_list<StateId>(path_arg)});
        if (!obs_file.empty()) {
            auto more = load_observations_file(obs_file);
            obs.insert(obs.end(), more.begin(), more.end());
        }
        if (obs.empty()) throw InvariantError("give --path or --observations");
        const StateId o = cc.origin ? *cc.origin : obs.front().origin();
        const auto xs = build_extended(net, o, cc.bounds(net, true));
        const auto evt = solve_ext(net, xs);
        const auto u = cc.utility();
        for (const auto& ob : obs)
            std::cout << std::setprecision(10) << path_prob_crl(xs, net, u, evt, ob) << "  " << path_text(ob.path)
                      << "\n";
    });

    // estimate
    Common ec;
    std::string est_obs, model = "crl", beta0, gradient = "analytic", kv_out;
    double tol = 1e-6;
    std::size_t max_iters = 200;
    auto* est = app.add_subcommand("estimate", "maximum likelihood estimation");
    ec.add_net(est);
    est->add_option("observations", est_obs, "observation file")->required();
    est->add_option("--model", model, "rl, crl or cnrl");
    est->add_option("--beta0", beta0, "starting coefficients (default zeros)");
    est->add_option("--mu", ec.mu, "fixed scale parameter");
    ec.add_alpha(est);
    est->add_option("--gradient", gradient, "analytic or fd");
    est->add_option("--tol", tol, "gradient tolerance");
    est->add_option("--max-iters", max_iters);
    est->add_option("--out", kv_out, "key=value result file");
    est->add_option("--nested-mu", nested_mu, "cnrl: state=mu pairs giving local scales, comma-separated");
    est->callback([&] {
        const Network net = ec.network();
        const auto obs = load_observations_file(est_obs);
        EstimationConfig cfg;
        cfg.spec.model = parse_model(model);
        cfg.spec.mu = ec.mu;
        if (cfg.spec.model != Model::RL) cfg.spec.alpha = ec.bounds(net, true);
        cfg.beta0 = beta0.empty() ? std::vector<double>(net.attribute_arity(), 0.0) : parse_list<double>(beta0);
        cfg.gradient_mode = gradient == "fd" ? GradientMode::FiniteDifference : GradientMode::Analytic;
        if (cfg.spec.model == Model::CNRL && !nested_mu.empty()) cfg.spec.nested = parse_nested(net, nested_mu, ec.mu);
        if (cfg.spec.model == Model::CNRL) cfg.gradient_mode = GradientMode::FiniteDifference;
        cfg.tol_grad = tol;
        cfg.max_outer_iters = max_iters;
        const auto res = estimate(net, obs, cfg);
        std::cout << "model " << model_name(cfg.spec.model) << ", " << obs.size() << " observations, "
                  << (res.converged ? "converged" : "NOT converged") << " after " << res.outer_iters
                  << " iterations\n\n";
        std::cout << std::left << std::setw(12) << "" << std::right << std::setw(12) << "estimate" << std::setw(12)
                  << "Std. Err." << std::setw(14) << "t-test(0)" << "\n";
        for (std::size_t j = 0; j < res.beta.size(); ++j)
            std::cout << std::left << std::setw(12) << net.attribute_names()[j] << std::right << std::fixed
                      << std::setprecision(4) << std::setw(12) << res.beta[j] << std::setw(12) << res.std_err[j]
                      << std::setw(14) << res.t_stat[j] << "\n";
        std::cout << "\navg LL " << std::setprecision(6) << res.avg_loglik << std::defaultfloat << "\n";
        if (!kv_out.empty()) {
            std::ostringstream kv;
            kv << std::setprecision(17) << "model=" << model_name(cfg.spec.model) << "\nconverged="
               << res.converged << "\nouter_iters=" << res.outer_iters << "\nn_obs=" << obs.size()
               << "\nloglik=" << res.loglik << "\navg_loglik=" << res.avg_loglik << "\n";
            for (std::size_t j = 0; j < res.beta.size(); ++j) {
                const auto& n = net.attribute_names()[j];
                kv << "beta." << n << "=" << res.beta[j] << "\nstd_err." << n << "=" << res.std_err[j] << "\nt_stat."
                   << n << "=" << res.t_stat[j] << "\n";
            }
            write_file(kv_out, kv.str());
        }
        if (!res.converged) status = 2;
    });

    // simulate
    Common simc;
    std::string sim_model = "crl", sim_out;
    SimConfig sim_cfg;
    auto* sim = app.add_subcommand("simulate", "sample routes");
    simc.add_net(sim);
    simc.add_beta(sim);
    simc.add_origin(sim);
    simc.add_alpha(sim);
    sim->add_option("--model", sim_model, "rl, crl or cnrl");
    sim->add_option("-n,--count", sim_cfg.n_obs, "number of routes");
    sim->add_option("--seed", sim_cfg.seed);
    sim->add_flag("--rejection", sim_cfg.rejection, "RL draws, discarding routes that break the bounds");
    sim->add_option("--max-hops", sim_cfg.max_hops);
    sim->add_option("-o,--out", sim_out, "output file (default stdout)");
    sim->add_option("--nested-mu", nested_mu, "cnrl: state=mu pairs giving local scales, comma-separated");
    sim->callback([&] {
        const Network net = simc.network();
        sim_cfg.model = parse_model(sim_model);
        if (sim_cfg.model == Model::CNRL && !nested_mu.empty()) sim_cfg.nested = parse_nested(net, nested_mu, simc.mu);
        const bool needs_alpha = sim_cfg.model != Model::RL || sim_cfg.rejection;
        const auto alpha = simc.bounds(net, needs_alpha);
        SimStats stats;
        const auto obs = simulate(net, simc.utility(), alpha, sim_cfg, simc.origin, &stats);
        if (sim_out.empty()) {
            save_observations(obs, std::cout);
        } else {
            std::ofstream out(sim_out);
            save_observations(obs, out);
        }
        std::cerr << stats.draws << " draws, " << stats.rejected << " rejected\n";
    });

    // repro
    auto* repro = app.add_subcommand("repro", "scripted studies");
    repro->require_subcommand(1);
    std::string data_dir = CRL_DATA_DIR, out_dir;
    auto add_dirs = [&](CLI::App* sub) {
        sub->add_option("--data-dir", data_dir, "directory holding the shipped networks");
        sub->add_option("--out-dir", out_dir, "write text and CSV reports here");
    };
    auto* toy = repro->add_subcommand("toy", "toy network probability tables");
    add_dirs(toy);
    toy->callback([&] {
        const auto r = run_toy_tables(data_dir);
        emit_report(r, out_dir, "toy_tables");
        if (!r.all_pass()) status = 1;
    });
    SweepSpec sweep_spec;
    std::string sizes, thresholds, seeds, generator = "crl";
    auto add_sweep_options = [&](CLI::App* sub) {
        add_dirs(sub);
        sub->add_option("--sizes", sizes, "DAG sizes, comma-separated");
        sub->add_option("--graphs", sweep_spec.graphs_per_size, "graphs per size");
        sub->add_option("--thresholds", thresholds, "fractions of the longest travel time, comma-separated");
        sub->add_option("--trials", sweep_spec.trials);
        sub->add_option("--n-in", sweep_spec.n_insample);
        sub->add_option("--n-out", sweep_spec.n_outsample);
        sub->add_option("--seed", sweep_spec.seed);
        sub->add_option("--graph-seeds", seeds, "explicit generator seeds, comma-separated");
        sub->add_option("--station-fraction", sweep_spec.station_fraction);
    };
    auto finish_spec = [&] {
        if (!sizes.empty()) sweep_spec.dag_sizes = parse_list<std::size_t>(sizes);
        if (!thresholds.empty()) sweep_spec.thresholds = parse_list<double>(thresholds);
        if (!seeds.empty()) sweep_spec.graph_seeds = parse_list<std::uint64_t>(seeds);
        sweep_spec.generator_model = parse_model(generator);
    };
    auto* sweep = repro->add_subcommand("sweep", "threshold sweep on random DAGs");
    add_sweep_options(sweep);
    sweep->add_option("--generator", generator, "rl (with rejection) or crl");
    sweep->callback([&] {
        finish_spec();
        const auto r = run_threshold_sweep(sweep_spec);
        emit_report(r, out_dir, "threshold_sweep");
        for (const auto& c : r.cells)
            if (!c.ok) status = 1;
        if (r.dominance_violations() > 0) status = 1;
    });
    auto* recharge = repro->add_subcommand("recharge", "random DAGs with charging stations");
    add_sweep_options(recharge);
    recharge->callback([&] {
        if (thresholds.empty()) thresholds = "0.5";
        if (sizes.empty()) sizes = "20";
        finish_spec();
        const auto r = run_recharge_study(sweep_spec);
        emit_report(r, out_dir, "recharge");
        for (const auto& row : r.rows)
            if (!row.ok) status = 1;
        if (r.violations() > 0) status = 1;
    });
    StabilitySpec stab;
    std::string stab_net, stab_alphas, stab_beta;
    auto* stability = repro->add_subcommand("stability", "unconstrained vs constrained model on a cyclic network");
    add_dirs(stability);
    stability->add_option("--network", stab_net, "cyclic network (default: shipped Sioux Falls)");
    stability->add_option("--alphas", stab_alphas, "link-count bounds, comma-separated");
    stability->add_option("--beta", stab_beta, "coefficients");
    stability->add_option("-n,--count", stab.n_obs, "observations per bound");
    stability->add_option("--seed", stab.seed);
    stability->callback([&] {
        if (!stab_alphas.empty()) stab.alphas = parse_list<Quanta>(stab_alphas);
        if (!stab_beta.empty()) stab.beta = parse_list<double>(stab_beta);
        const Network net = load_network_file(stab_net.empty() ? data_dir + "/sioux_falls.net" : stab_net);
        const auto r = run_stability_contrast(net, stab);
        emit_report(r, out_dir, "stability");
        if (!r.trend_holds()) status = 1;
    });

    // export dot
    auto* exp = app.add_subcommand("export", "export helpers");
    exp->require_subcommand(1);
    Common dc;
    double dash = 1e-9;
    std::string dot_out;
    auto* dot = exp->add_subcommand("dot", "Graphviz view of edge usage probabilities");
    dc.add_net(dot);
    dc.add_beta(dot);
    dc.add_origin(dot);
    dc.add_alpha(dot);
    dot->add_option("--dashed-below", dash, "edges with smaller probability are dashed");
    dot->add_option("-o,--out", dot_out);
    dot->callback([&] {
        const Network net = dc.network();
        const auto u = dc.utility();
        const StateId o = resolve_origin(net, dc.origin);
        const auto alpha = dc.bounds(net, false);
        std::vector<double> usage;
        if (alpha.empty()) {
            const auto g = network_choice_graph(net);
            const auto util = edge_utilities(net, u.beta);
            const auto values = solve_values(g, util, u.mu);
            const auto flows = arc_flows(g, arc_probabilities(g, util, values, ScaleField{u.mu}), o);
            usage.assign(net.num_edges(), 0.0);
            for (std::size_t a = 0; a < flows.size(); ++a) usage[g.edge_ids[a]] += flows[a];
        } else {
            const auto xs = build_extended(net, o, alpha);
            const auto evt = solve_erl(xs, net, u);
            usage = aggregate_edge_flows(xs, net, erl_link_probs(xs, net, u, evt));
        }
        const auto text = export_dot(net, usage, dash);
        if (dot_out.empty())
            std::cout << text;
        else
            write_file(dot_out, text);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return status;
}
