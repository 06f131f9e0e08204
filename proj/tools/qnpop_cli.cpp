// qnpop command-line driver: exact simulation, fluid flows, slow-manifold
// charts, the limiting diffusion, verification experiments, and the model zoo.
//
// Exit codes: 0 success / all verdicts pass, 1 verdict failure, 2 bad
// configuration or arguments.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "qnpop/diffusion.hpp"
#include "qnpop/errors.hpp"
#include "qnpop/experiments.hpp"
#include "qnpop/io.hpp"
#include "qnpop/manifold.hpp"
#include "qnpop/zoo.hpp"

using namespace qnpop;

namespace {

Vector parse_point(const std::string& s) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    Vector v(static_cast<Eigen::Index>(vals.size()));
    for (size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
    return v;
}

uint64_t seed_from_env_or(uint64_t fallback) {
    // QN_SEED is the lowest-priority seed source
    if (const char* env = std::getenv("QN_SEED")) {
        try {
            return static_cast<uint64_t>(std::stoull(env));
        } catch (...) {
        }
    }
    return fallback;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qnpop: competitive density-dependent population processes"};
    app.set_config("--config", "", "key = value configuration file (INI sections supported)");
    app.fallthrough(true); // let --config appear after the subcommand
    app.allow_config_extras(false);
    app.require_subcommand(1);

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "exact jump-chain simulation");
    std::string sim_model = "neutral_logistic";
    std::string sim_x0 = "0.3,0.3";
    int64_t sim_n = 1000;
    double sim_horizon = 5.0;
    double sim_dt = 0.05;
    int64_t sim_seed = -1;
    std::string sim_out = "path.jsonl";
    std::string sim_events;
    sim->add_option("--model", sim_model, "zoo name or @model.json");
    sim->add_option("--x0", sim_x0, "initial density, comma separated");
    sim->add_option("--n", sim_n, "system size N");
    sim->add_option("--horizon", sim_horizon, "process-time horizon");
    sim->add_option("--snapshot-dt", sim_dt, "snapshot grid spacing");
    sim->add_option("--seed", sim_seed, "rng seed (env QN_SEED is the fallback)");
    sim->add_option("--out", sim_out, "JSONL output path");
    sim->add_option("--events-csv", sim_events, "also write the event log as CSV");

    // ---- fluid ----
    auto* fl = app.add_subcommand("fluid", "fluid-limit flow and structure checks");
    std::string fl_model = "neutral_logistic";
    std::string fl_x0 = "0.3,0.3";
    double fl_t = 1.0;
    bool fl_backward = false, fl_fund = false, fl_structure = false;
    std::string fl_trace, fl_report;
    int fl_trace_points = 100;
    fl->add_option("--model", fl_model, "zoo name or @model.json");
    fl->add_option("--x0", fl_x0, "start point");
    fl->add_option("--t", fl_t, "flow time (signed)");
    fl->add_flag("--backward", fl_backward, "flow the transversal field backwards");
    fl->add_flag("--fundamental", fl_fund, "co-integrate the variational matrix");
    fl->add_flag("--structure", fl_structure, "run the structural-condition probes");
    fl->add_option("--trace", fl_trace, "write the trajectory as CSV t,x1..xK");
    fl->add_option("--trace-points", fl_trace_points, "rows in the trace CSV");
    fl->add_option("--report", fl_report, "write the structure report JSON here");

    // ---- manifold ----
    auto* mf = app.add_subcommand("manifold", "slow-manifold chart at a point");
    std::string mf_model = "neutral_logistic";
    std::string mf_point = "0.15,0.15";
    bool mf_d2 = false;
    std::string mf_out;
    mf->add_option("--model", mf_model, "zoo name or @model.json");
    mf->add_option("--point", mf_point, "query point");
    mf->add_flag("--d2pi", mf_d2, "include second derivatives of the projection");
    mf->add_option("--out", mf_out, "write the chart JSON here (default stdout)");

    // ---- diffusion ----
    auto* df = app.add_subcommand("diffusion", "limiting diffusion on the manifold");
    std::string df_model = "neutral_logistic";
    std::string df_point = "0.5,0.5";
    double df_T = 1.0, df_dt = 0.01;
    int64_t df_seed = -1;
    bool df_coeff = false;
    std::string df_out = "diffusion.jsonl";
    df->add_option("--model", df_model, "zoo name or @model.json");
    df->add_option("--pi0", df_point, "start point on the manifold");
    df->add_option("--T", df_T, "diffusion-time horizon");
    df->add_option("--dt", df_dt, "Euler-Maruyama step");
    df->add_option("--seed", df_seed, "rng seed");
    df->add_flag("--coefficients", df_coeff, "print generator coefficients at pi0 and exit");
    df->add_option("--out", df_out, "JSONL output path");

    // ---- verify ----
    auto* vf = app.add_subcommand("verify", "limit-theorem verification experiments");
    std::string vf_exp = "lln";
    std::string vf_model = "neutral_logistic";
    std::vector<int64_t> vf_n = {100, 1000};
    int vf_replicas = 50;
    double vf_horizon = 5.0;
    int64_t vf_seed = -1;
    std::string vf_out = "qnpop_report";
    int vf_threads = 1;
    bool vf_quiet = false;
    double vf_h = 0.05;
    int vf_oracle_replicas = 20000;
    double vf_delta = 0.2;
    double vf_warmup_c = 0.0;
    vf->add_option("--experiment", vf_exp, "lln|tau_decay|generator_check|wf_reduction|moment_compare");
    vf->add_option("--model", vf_model, "zoo name or @model.json");
    vf->add_option("--n", vf_n, "system sizes, comma separated, increasing")->delimiter(',');
    vf->add_option("--replicas", vf_replicas, "replica count");
    vf->add_option("--horizon", vf_horizon, "horizon (process time for lln, diffusion time otherwise)");
    vf->add_option("--seed", vf_seed, "master seed");
    vf->add_option("--out-dir", vf_out, "report directory");
    vf->add_option("--threads", vf_threads, "worker threads");
    vf->add_option("--oracle-h", vf_h, "moment-oracle burst horizon (diffusion time)");
    vf->add_option("--oracle-replicas", vf_oracle_replicas, "moment-oracle bursts");
    vf->add_option("--delta", vf_delta, "collapse threshold exponent");
    vf->add_option("--warmup-c", vf_warmup_c, "off-manifold warm-up constant (x ln N process time)");
    double vf_slope_lo = -0.65, vf_slope_hi = -0.35, vf_zmax = 3.0, vf_r2 = 0.99,
           vf_exceed = 0.05;
    vf->add_option("--slope-lo", vf_slope_lo, "lln verdict band, lower edge");
    vf->add_option("--slope-hi", vf_slope_hi, "lln verdict band, upper edge");
    vf->add_option("--z-max", vf_zmax, "z-score verdict threshold");
    vf->add_option("--r2-min", vf_r2, "wf_reduction fit threshold");
    vf->add_option("--exceedance-max", vf_exceed, "tau_decay verdict threshold");
    vf->add_flag("--quiet", vf_quiet, "suppress progress output");

    // ---- zoo ----
    auto* zo = app.add_subcommand("zoo", "ready-made model families");
    bool zo_list = false, zo_check = false;
    std::string zo_describe;
    zo->add_flag("--list", zo_list, "list families and parameter schemas");
    zo->add_option("--describe", zo_describe, "echo the parameters of a preset");
    zo->add_flag("--check", zo_check, "re-run the registration facts of --describe");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (sim->parsed()) {
            const ZooEntry entry = resolve_model(sim_model);
            const uint64_t seed = sim_seed >= 0 ? static_cast<uint64_t>(sim_seed)
                                                : seed_from_env_or(12345);
            SimOptions so;
            so.log_events = !sim_events.empty();
            const PopulationPath path = simulate_path(entry.spec, parse_point(sim_x0), sim_n,
                                                      sim_horizon, seed, sim_dt, so);
            write_path_jsonl(sim_out, entry.spec, path, seed);
            if (!sim_events.empty()) write_events_csv(sim_events, entry.spec, path);
            std::cout << "wrote " << sim_out << " (" << path.n_events << " events"
                      << (path.absorbed ? ", absorbed" : "")
                      << (path.escaped ? ", escaped" : "") << ")\n";
            return 0;
        }
        if (fl->parsed()) {
            const ZooEntry entry = resolve_model(fl_model);
            if (fl_structure) {
                std::vector<Vector> pts;
                RngStream rng(7, 0);
                for (int i = 0; i < 25; ++i) {
                    Vector x(entry.spec.K);
                    for (int k = 0; k < entry.spec.K; ++k)
                        x[k] = entry.spec.box_lo[k] +
                               (entry.spec.box_hi[k] - entry.spec.box_lo[k]) *
                                   (0.05 + 0.9 * rng.uniform());
                    pts.push_back(x);
                }
                const StructureReport srep = check_structure(entry.spec, pts);
                const json j = structure_to_json(srep);
                if (fl_report.empty())
                    std::cout << j.dump(2) << "\n";
                else
                    write_text(fl_report, j.dump(2) + "\n");
                return srep.all_pass ? 0 : 1;
            }
            const Vector x0 = parse_point(fl_x0);
            const auto dir = fl_backward ? FlowDirection::Backward : FlowDirection::Forward;
            if (!fl_trace.empty()) {
                std::vector<double> ts;
                std::vector<Vector> xs;
                Vector y = x0;
                const double step = fl_t / fl_trace_points;
                ts.push_back(0.0);
                xs.push_back(y);
                for (int k = 1; k <= fl_trace_points; ++k) {
                    y = flow(entry.spec, y, step, false, dir).endpoint;
                    ts.push_back(step * k);
                    xs.push_back(y);
                }
                write_flow_trace_csv(fl_trace, ts, xs);
            }
            const FlowResult res = flow(entry.spec, x0, fl_t, fl_fund, dir);
            json j = {{"endpoint", vector_to_json(res.endpoint)}, {"t", res.t},
                      {"steps", res.steps}};
            if (res.fundamental) j["fundamental"] = matrix_to_json_rowmajor(*res.fundamental);
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (mf->parsed()) {
            const ZooEntry entry = resolve_model(mf_model);
            ChartOptions copts;
            copts.with_d2pi = mf_d2;
            const ManifoldChart ch = chart(entry.spec, parse_point(mf_point), copts);
            const json j = chart_to_json(ch);
            if (mf_out.empty())
                std::cout << j.dump(2) << "\n";
            else
                write_text(mf_out, j.dump(2) + "\n");
            return 0;
        }
        if (df->parsed()) {
            const ZooEntry entry = resolve_model(df_model);
            const Vector pi0 = parse_point(df_point);
            if (df_coeff) {
                const GeneratorCoefficients gc = generator_coefficients(entry.spec, pi0);
                std::cout << coefficients_to_json(gc).dump(2) << "\n";
                return 0;
            }
            const uint64_t seed = df_seed >= 0 ? static_cast<uint64_t>(df_seed)
                                               : seed_from_env_or(12345);
            const DiffusionPath path = simulate_diffusion(entry.spec, pi0, df_T, df_dt, seed);
            write_diffusion_jsonl(df_out, path);
            std::cout << "wrote " << df_out << " (" << path.points.size() << " points)\n";
            return 0;
        }
        if (vf->parsed()) {
            ExperimentConfig cfg;
            cfg.experiment = experiment_from_name(vf_exp);
            cfg.model = vf_model;
            cfg.N_list = vf_n;
            if (cfg.N_list.empty()) throw QnError("empty N list");
            for (size_t i = 1; i < cfg.N_list.size(); ++i)
                if (cfg.N_list[i] <= cfg.N_list[i - 1])
                    throw QnError("N list must be increasing");
            if (vf_replicas < 1) throw QnError("replicas must be >= 1");
            cfg.replicas = vf_replicas;
            cfg.horizon = vf_horizon;
            cfg.seed = vf_seed >= 0 ? static_cast<uint64_t>(vf_seed) : seed_from_env_or(12345);
            cfg.output_dir = vf_out;
            cfg.threads = vf_threads;
            cfg.oracle_h = vf_h;
            cfg.oracle_replicas = vf_oracle_replicas;
            cfg.collapse_exponent = vf_delta;
            cfg.warmup_c = vf_warmup_c;
            cfg.slope_band_lo = vf_slope_lo;
            cfg.slope_band_hi = vf_slope_hi;
            cfg.z_max = vf_zmax;
            cfg.r2_min = vf_r2;
            cfg.exceedance_max = vf_exceed;
            const ExperimentReport rep = run_experiment(cfg);
            write_report(cfg, rep);
            if (!vf_quiet) {
                std::cout << "experiment " << vf_exp << ": " << (rep.pass ? "PASS" : "FAIL")
                          << " (" << rep.wall_seconds << " s, " << rep.total_events
                          << " events)\n";
                std::cout << rep.summary.dump(2) << "\n";
            }
            return rep.pass ? 0 : 1;
        }
        if (zo->parsed()) {
            if (zo_list) {
                json j = {{"presets", zoo_names()}, {"families", zoo_schemas()}};
                std::cout << j.dump(2) << "\n";
                return 0;
            }
            if (!zo_describe.empty()) {
                const ZooEntry e = zoo_make(zo_describe, zo_check);
                json facts = json::array();
                for (const auto& f : e.facts) facts.push_back({{"name", f.name}, {"tol", f.tol}});
                json j = {{"name", e.name}, {"params", e.params}, {"known_facts", facts},
                          {"model", model_to_json(e.spec)}};
                std::cout << j.dump(2) << "\n";
                return 0;
            }
            std::cerr << "zoo: use --list or --describe NAME\n";
            return 2;
        }
    } catch (const QnError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
