#include "qnpop/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qnpop/errors.hpp"
#include "qnpop/parallel.hpp"
#include "qnpop/stats.hpp"

namespace qnpop {

namespace {

constexpr const char* kConstantsNote =
    "The qualitative decay/exponent claims are tested; the Lipschitz and attraction "
    "constants entering the formal bounds are not estimable for opaque rate functions.";

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

// a point on the slow manifold with the given frequency vector
Vector manifold_point(const ModelSpec& model, const Vector& p) {
    return effective_density(model, p) * p;
}

Vector default_lln_start(const ModelSpec& model) {
    const int K = model.K;
    Vector p = Vector::Constant(K, 1.0 / K);
    if (model.quasi_neutral) return 0.3 * manifold_point(model, p);
    return 0.3 * Vector(0.5 * (model.box_lo + model.box_hi));
}

std::string fmt_z(double z) { return csv_double(z); }

} // namespace

std::string experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Lln: return "lln";
        case ExperimentKind::TauDecay: return "tau_decay";
        case ExperimentKind::GeneratorCheck: return "generator_check";
        case ExperimentKind::WfReduction: return "wf_reduction";
        case ExperimentKind::MomentCompare: return "moment_compare";
    }
    return "?";
}

ExperimentKind experiment_from_name(const std::string& name) {
    if (name == "lln") return ExperimentKind::Lln;
    if (name == "tau_decay") return ExperimentKind::TauDecay;
    if (name == "generator_check") return ExperimentKind::GeneratorCheck;
    if (name == "wf_reduction") return ExperimentKind::WfReduction;
    if (name == "moment_compare") return ExperimentKind::MomentCompare;
    throw QnError("unknown experiment: " + name);
}

ZooEntry resolve_model(const std::string& name) {
    if (!name.empty() && name[0] == '@') {
        std::ifstream in(name.substr(1));
        if (!in) throw QnError("cannot read model file " + name.substr(1));
        json j = json::parse(in);
        ZooEntry e;
        e.name = j.value("name", "inline");
        e.spec = model_from_json(j);
        e.params = {{"source", name.substr(1)}};
        return e;
    }
    return zoo_make(name, /*check=*/false);
}

json config_to_json(const ExperimentConfig& c) {
    return {{"experiment", experiment_name(c.experiment)},
            {"model", c.model},
            {"N_list", c.N_list},
            {"replicas", c.replicas},
            {"horizon", c.horizon},
            {"seed", c.seed},
            {"threads", c.threads},
            {"x0", c.x0},
            {"grid_points", c.grid_points},
            {"slope_band", {c.slope_band_lo, c.slope_band_hi}},
            {"collapse_exponent", c.collapse_exponent},
            {"exceedance_max", c.exceedance_max},
            {"oracle_h", c.oracle_h},
            {"oracle_replicas", c.oracle_replicas},
            {"oracle_increments", c.oracle_increments},
            {"z_max", c.z_max},
            {"freq_points", c.freq_points},
            {"freq_grid", c.freq_grid},
            {"r2_min", c.r2_min},
            {"warmup_c", c.warmup_c},
            {"off_omega_offset", c.off_omega_offset},
            {"version", kArtifactVersion}};
}

json ExperimentReport::to_json() const {
    json files = json::array();
    for (const auto& [name, _] : csv_files) files.push_back(name);
    return {{"config", config_echo}, {"summary", summary},   {"pass", pass},
            {"notes", notes},        {"wall_seconds", wall_seconds},
            {"total_events", total_events}, {"csv_files", files}};
}

// ---------------------------------------------------------------------------

ExperimentReport run_lln(const ExperimentConfig& config) {
    const double t0 = now_seconds();
    ExperimentReport rep;
    rep.config_echo = config_to_json(config);
    rep.notes.push_back(kConstantsNote);

    const ZooEntry entry = resolve_model(config.model);
    const ModelSpec& model = entry.spec;
    const Vector x0 = config.x0.empty() ? default_lln_start(model) : to_vector(config.x0);
    const double T = config.horizon;
    const int grid = config.grid_points;
    const double dt = T / grid;

    // deterministic reference trajectory on the comparison grid
    std::vector<Vector> ref(static_cast<size_t>(grid + 1));
    {
        FlowOptions fo;
        fo.rtol = 1e-10;
        ref[0] = x0;
        Vector y = x0;
        for (int k = 1; k <= grid; ++k) {
            y = flow(model, y, dt, false, FlowDirection::Forward, fo).endpoint;
            ref[static_cast<size_t>(k)] = y;
        }
    }

    struct Row {
        int64_t N;
        int replica;
        double sup_err;
        bool absorbed;
        uint64_t events;
    };
    std::vector<Row> rows;
    json per_n = json::array();
    std::vector<double> log_n, log_med;
    std::vector<double> medians;

    for (size_t ni = 0; ni < config.N_list.size(); ++ni) {
        const int64_t N = config.N_list[ni];
        std::vector<Row> slot(static_cast<size_t>(config.replicas));
        parallel_for(config.threads, config.replicas, [&](int64_t r) {
            SimOptions so;
            so.log_events = false;
            so.stream = (static_cast<uint64_t>(ni) << 32) | static_cast<uint64_t>(r);
            const PopulationPath path = simulate_path(model, x0, N, T, config.seed, dt, so);
            double sup = 0.0;
            const size_t n_cmp = std::min(path.snapshots.size(), ref.size());
            for (size_t k = 0; k < n_cmp; ++k)
                sup = std::max(sup, (path.snapshots[k].x - ref[k]).norm());
            slot[static_cast<size_t>(r)] = {N, static_cast<int>(r), sup,
                                            path.absorbed || path.escaped, path.n_events};
        });
        std::vector<double> errs;
        for (const auto& row : slot) {
            rows.push_back(row);
            errs.push_back(row.sup_err);
            rep.total_events += row.events;
        }
        const double med = median_of(errs);
        medians.push_back(med);
        per_n.push_back({{"N", N},
                         {"median_sup_err", med},
                         {"q25", quantile_of(errs, 0.25)},
                         {"q75", quantile_of(errs, 0.75)}});
        log_n.push_back(std::log(static_cast<double>(N)));
        log_med.push_back(std::log(std::max(med, 1e-300)));
    }

    const LineFit fit = fit_line(log_n, log_med);
    const bool slope_ok = fit.slope >= config.slope_band_lo && fit.slope <= config.slope_band_hi;
    // monotonicity probe: medians non-increasing in N (one small inversion tolerated)
    int inversions = 0;
    for (size_t i = 1; i < medians.size(); ++i)
        if (medians[i] > medians[i - 1]) ++inversions;
    const bool mono_ok = inversions <= 1;

    rep.summary = {{"per_N", per_n},
                   {"fitted_slope", fit.slope},
                   {"slope_se", fit.slope_se},
                   {"slope_band", {config.slope_band_lo, config.slope_band_hi}},
                   {"slope_in_band", slope_ok},
                   {"monotone_decrease", mono_ok},
                   {"x0", vector_to_json(x0)}};
    rep.pass = slope_ok && mono_ok;

    std::ostringstream csv;
    csv << "N,replica,sup_err,absorbed\n";
    for (const auto& r : rows)
        csv << r.N << "," << r.replica << "," << csv_double(r.sup_err) << ","
            << (r.absorbed ? 1 : 0) << "\n";
    rep.csv_files.emplace_back("lln.csv", csv.str());
    rep.wall_seconds = now_seconds() - t0;
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport run_tau_decay(const ExperimentConfig& config) {
    const double t0 = now_seconds();
    ExperimentReport rep;
    rep.config_echo = config_to_json(config);
    rep.notes.push_back(kConstantsNote);
    rep.notes.push_back("collapse_exponent is the threshold exponent (tau > N^-delta); the "
                        "sup is tracked on the diffusion-time grid");

    const ZooEntry entry = resolve_model(config.model);
    const ModelSpec& model = entry.spec;
    if (!model.quasi_neutral) throw QnError("tau_decay requires a quasi-neutral model");

    // start on the manifold at equal frequencies
    const Vector p0 = Vector::Constant(model.K, 1.0 / model.K);
    const Vector x0 = manifold_point(model, p0);
    const int samples = 50;

    struct Row {
        int64_t N;
        int replica;
        double sup_tau;
        bool exceeded;
        bool flagged;
        uint64_t events;
    };
    std::vector<Row> rows;
    json per_n = json::array();
    std::vector<double> medians;
    std::vector<double> exceed_frac;

    for (size_t ni = 0; ni < config.N_list.size(); ++ni) {
        const int64_t N = config.N_list[ni];
        const double process_T = 0.5 * static_cast<double>(N) * config.horizon;
        const double snap_dt = process_T / samples;
        const double threshold =
            std::pow(static_cast<double>(N), -config.collapse_exponent);
        std::vector<Row> slot(static_cast<size_t>(config.replicas));
        parallel_for(config.threads, config.replicas, [&](int64_t r) {
            SimOptions so;
            so.log_events = false;
            so.stream = (static_cast<uint64_t>(ni) << 32) | static_cast<uint64_t>(r);
            const PopulationPath path = simulate_path(model, x0, N, process_T, config.seed, snap_dt, so);
            ProjectOptions po;
            po.verify_pitau = false;
            double sup = 0.0;
            bool flagged = path.escaped;
            for (const auto& snap : path.snapshots) {
                try {
                    sup = std::max(sup, std::abs(project_and_time(model, snap.x, po).tau));
                } catch (const QnError&) {
                    flagged = true; // outside the basin counts as an excursion
                    sup = std::max(sup, 1.0);
                }
            }
            slot[static_cast<size_t>(r)] = {N, static_cast<int>(r), sup,
                                            sup > threshold, flagged, path.n_events};
        });
        std::vector<double> sups;
        int exceeded = 0;
        for (const auto& row : slot) {
            rows.push_back(row);
            sups.push_back(row.sup_tau);
            exceeded += row.exceeded ? 1 : 0;
            rep.total_events += row.events;
        }
        const double frac = static_cast<double>(exceeded) / config.replicas;
        medians.push_back(median_of(sups));
        exceed_frac.push_back(frac);
        per_n.push_back({{"N", N},
                         {"threshold", threshold},
                         {"exceedance_fraction", frac},
                         {"median_sup_tau", medians.back()}});
    }

    bool medians_decreasing = true;
    for (size_t i = 1; i < medians.size(); ++i)
        medians_decreasing = medians_decreasing && medians[i] < medians[i - 1];
    const bool frac_ok = exceed_frac.empty() ? false : exceed_frac.back() <= config.exceedance_max;
    rep.summary = {{"per_N", per_n},
                   {"exceedance_max", config.exceedance_max},
                   {"final_exceedance_ok", frac_ok},
                   {"median_strictly_decreasing", medians_decreasing}};
    rep.pass = frac_ok && (config.N_list.size() < 2 || medians_decreasing);

    std::ostringstream csv;
    csv << "N,replica,sup_tau,exceeded\n";
    for (const auto& r : rows)
        csv << r.N << "," << r.replica << "," << csv_double(r.sup_tau) << ","
            << (r.exceeded ? 1 : 0) << "\n";
    rep.csv_files.emplace_back("tau_decay.csv", csv.str());
    rep.wall_seconds = now_seconds() - t0;
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct ZTable {
    json rows = json::array();
    double worst = 0.0;
    std::string csv;
};

ZTable compare_moments(const GeneratorCoefficients& gc, const MomentEstimate& est,
                       int point_index) {
    ZTable zt;
    std::ostringstream csv;
    const int K = static_cast<int>(gc.drift.size());
    auto zval = [](double diff, double se) {
        if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return diff / se;
    };
    for (int i = 0; i < K; ++i) {
        const double z = zval(est.b_hat[i] - gc.drift[i], est.b_se[i]);
        zt.worst = std::max(zt.worst, std::abs(z));
        zt.rows.push_back({{"stat", "b"}, {"i", i}, {"generator", gc.drift[i]},
                           {"oracle", est.b_hat[i]}, {"se", est.b_se[i]}, {"z", z}});
        csv << point_index << ",b," << i << ",," << csv_double(gc.drift[i]) << ","
            << csv_double(est.b_hat[i]) << "," << csv_double(est.b_se[i]) << "," << fmt_z(z)
            << "\n";
    }
    for (int i = 0; i < K; ++i)
        for (int j = i; j < K; ++j) {
            const double z = zval(est.a_hat(i, j) - gc.diffusion(i, j), est.a_se(i, j));
            zt.worst = std::max(zt.worst, std::abs(z));
            zt.rows.push_back({{"stat", "a"}, {"i", i}, {"j", j},
                               {"generator", gc.diffusion(i, j)}, {"oracle", est.a_hat(i, j)},
                               {"se", est.a_se(i, j)}, {"z", z}});
            csv << point_index << ",a," << i << "," << j << ","
                << csv_double(gc.diffusion(i, j)) << "," << csv_double(est.a_hat(i, j)) << ","
                << csv_double(est.a_se(i, j)) << "," << fmt_z(z) << "\n";
        }
    zt.csv = csv.str();
    return zt;
}

} // namespace

ExperimentReport run_generator_check(const ExperimentConfig& config) {
    const double t0 = now_seconds();
    ExperimentReport rep;
    rep.config_echo = config_to_json(config);
    rep.notes.push_back(kConstantsNote);

    const ZooEntry entry = resolve_model(config.model);
    const ModelSpec& model = entry.spec;
    const int64_t N = config.N_list.back();

    json points = json::array();
    double worst_z = 0.0;
    std::ostringstream csv;
    csv << "point,stat,i,j,generator,oracle,se,z\n";

    for (size_t pi_idx = 0; pi_idx < config.freq_points.size(); ++pi_idx) {
        const double p1 = config.freq_points[pi_idx];
        Vector p(model.K);
        if (model.K == 2) {
            p << p1, 1.0 - p1;
        } else {
            p = Vector::Constant(model.K, (1.0 - p1) / (model.K - 1));
            p[0] = p1;
        }
        const Vector point = manifold_point(model, p);
        const GeneratorCoefficients gc = generator_coefficients(model, point);

        OracleOptions oo;
        oo.n_increments = config.oracle_increments;
        oo.seed = config.seed + static_cast<uint64_t>(pi_idx) * 1000003ull;
        oo.threads = config.threads;
        Vector start = point;
        if (config.off_omega_offset != 0.0) {
            start = (1.0 + config.off_omega_offset) * point;
            oo.warmup_process_time = config.warmup_c * std::log(static_cast<double>(N));
        }
        // the oracle projects onto the manifold, so an off-manifold start plus
        // a warm-up window reproduces the post-transient comparison
        MomentEstimate est = jump_moment_oracle(model, start, N, config.oracle_replicas,
                                                config.oracle_h, oo);
        rep.total_events += est.total_events;
        const ZTable zt = compare_moments(gc, est, static_cast<int>(pi_idx));
        worst_z = std::max(worst_z, zt.worst);
        csv << zt.csv;
        points.push_back({{"point", vector_to_json(point)},
                          {"invalid_replicas", est.n_invalid},
                          {"rows", zt.rows},
                          {"worst_abs_z", zt.worst}});
    }

    rep.summary = {{"N", N}, {"points", points}, {"worst_abs_z", worst_z},
                   {"z_max", config.z_max}};
    rep.pass = worst_z <= config.z_max;
    rep.csv_files.emplace_back("generator_check.csv", csv.str());
    rep.wall_seconds = now_seconds() - t0;
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport run_wf_reduction(const ExperimentConfig& config) {
    const double t0 = now_seconds();
    ExperimentReport rep;
    rep.config_echo = config_to_json(config);
    rep.notes.push_back(kConstantsNote);

    const ZooEntry entry = resolve_model(config.model);
    const ModelSpec& model = entry.spec;
    if (model.K != 2) throw QnError("wf_reduction requires a K=2 model");
    const int64_t N = config.N_list.back();

    std::vector<double> grid = config.freq_grid;
    if (grid.empty())
        for (int k = 1; k <= 9; ++k) grid.push_back(0.1 * k);

    std::vector<double> c_hat(grid.size()), c_se(grid.size()), b_freq(grid.size()),
        b_freq_se(grid.size()), predicted(grid.size());
    std::ostringstream csv;
    csv << "p,c_hat,c_se,drift_hat,drift_se,predicted_scale\n";

    for (size_t gi = 0; gi < grid.size(); ++gi) {
        const double pfreq = grid[gi];
        Vector p(2);
        p << pfreq, 1.0 - pfreq;
        const Vector point = manifold_point(model, p);
        OracleOptions oo;
        oo.n_increments = config.oracle_increments;
        oo.seed = config.seed + 7919ull * static_cast<uint64_t>(gi);
        oo.threads = config.threads;
        const MomentEstimate est =
            jump_moment_oracle(model, point, N, config.oracle_replicas, config.oracle_h, oo);
        rep.total_events += est.total_events;

        // project the density-coordinate moments onto the frequency coordinate
        const RadialProjection rp = radial_projection(point);
        const Vector drho1 = rp.drho.row(0).transpose();
        c_hat[gi] = drho1.dot(est.a_hat * drho1);
        double se2 = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                const double wgt = drho1[i] * drho1[j];
                se2 += wgt * wgt * est.a_se(i, j) * est.a_se(i, j);
            }
        c_se[gi] = std::sqrt(se2);
        b_freq[gi] = drho1.dot(est.b_hat);
        double bse2 = 0.0;
        for (int i = 0; i < 2; ++i) bse2 += drho1[i] * drho1[i] * est.b_se[i] * est.b_se[i];
        b_freq_se[gi] = std::sqrt(bse2);

        const double ne = effective_density(model, rp.rho);
        const Vector bb = model.beta_bar(point), bc = model.beta_check(point);
        predicted[gi] = 0.5 * (bb[0] + bc[0]) / ne;
        csv << csv_double(pfreq) << "," << csv_double(c_hat[gi]) << "," << csv_double(c_se[gi])
            << "," << csv_double(b_freq[gi]) << "," << csv_double(b_freq_se[gi]) << ","
            << csv_double(predicted[gi]) << "\n";
    }

    // least squares for c in  a_p = c * p(1-p)
    double num = 0.0, den = 0.0;
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        const double g = grid[gi] * (1.0 - grid[gi]);
        num += g * c_hat[gi];
        den += g * g;
    }
    const double c_fit = num / den;
    double ss_res = 0.0, ss_tot = 0.0;
    const double cbar = mean_of(c_hat);
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        const double g = grid[gi] * (1.0 - grid[gi]);
        ss_res += (c_hat[gi] - c_fit * g) * (c_hat[gi] - c_fit * g);
        ss_tot += (c_hat[gi] - cbar) * (c_hat[gi] - cbar);
    }
    const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

    // neutral-family drift should vanish in the frequency coordinate
    double worst_drift_z = 0.0;
    for (size_t gi = 0; gi < grid.size(); ++gi)
        if (b_freq_se[gi] > 0.0)
            worst_drift_z = std::max(worst_drift_z, std::abs(b_freq[gi]) / b_freq_se[gi]);

    rep.summary = {{"N", N},
                   {"grid", grid},
                   {"c_hat", c_hat},
                   {"fitted_c", c_fit},
                   {"r2", r2},
                   {"r2_min", config.r2_min},
                   {"predicted_scale_mean", mean_of(predicted)},
                   {"worst_freq_drift_z", worst_drift_z}};
    rep.pass = r2 >= config.r2_min;
    rep.csv_files.emplace_back("wf_reduction.csv", csv.str());
    rep.wall_seconds = now_seconds() - t0;
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport run_moment_compare(const ExperimentConfig& config) {
    const double t0 = now_seconds();
    ExperimentReport rep;
    rep.config_echo = config_to_json(config);
    rep.notes.push_back(kConstantsNote);

    const ZooEntry entry = resolve_model(config.model);
    const ModelSpec& model = entry.spec;
    Vector p = Vector::Constant(model.K, 1.0 / model.K);
    if (!config.freq_points.empty() && model.K == 2)
        p << config.freq_points.front(), 1.0 - config.freq_points.front();
    const Vector point = manifold_point(model, p);

    std::vector<MomentEstimate> ests;
    for (size_t ni = 0; ni < config.N_list.size(); ++ni) {
        OracleOptions oo;
        oo.n_increments = config.oracle_increments;
        oo.seed = config.seed + 104729ull * static_cast<uint64_t>(ni);
        oo.threads = config.threads;
        ests.push_back(jump_moment_oracle(model, point, config.N_list[ni],
                                          config.oracle_replicas, config.oracle_h, oo));
        rep.total_events += ests.back().total_events;
    }

    double worst_z = 0.0;
    json pairs = json::array();
    std::ostringstream csv;
    csv << "N1,N2,stat,i,j,est1,est2,z\n";
    for (size_t a = 0; a + 1 < ests.size(); ++a) {
        const auto& e1 = ests[a];
        const auto& e2 = ests[a + 1];
        for (int i = 0; i < model.K; ++i) {
            const double se = std::sqrt(e1.b_se[i] * e1.b_se[i] + e2.b_se[i] * e2.b_se[i]);
            const double z = se > 0.0 ? (e1.b_hat[i] - e2.b_hat[i]) / se : 0.0;
            worst_z = std::max(worst_z, std::abs(z));
            csv << config.N_list[a] << "," << config.N_list[a + 1] << ",b," << i << ",,"
                << csv_double(e1.b_hat[i]) << "," << csv_double(e2.b_hat[i]) << "," << fmt_z(z)
                << "\n";
        }
        for (int i = 0; i < model.K; ++i)
            for (int j = i; j < model.K; ++j) {
                const double se = std::sqrt(e1.a_se(i, j) * e1.a_se(i, j) +
                                            e2.a_se(i, j) * e2.a_se(i, j));
                const double z = se > 0.0 ? (e1.a_hat(i, j) - e2.a_hat(i, j)) / se : 0.0;
                worst_z = std::max(worst_z, std::abs(z));
                csv << config.N_list[a] << "," << config.N_list[a + 1] << ",a," << i << "," << j
                    << "," << csv_double(e1.a_hat(i, j)) << "," << csv_double(e2.a_hat(i, j))
                    << "," << fmt_z(z) << "\n";
            }
        pairs.push_back({{"N1", config.N_list[a]}, {"N2", config.N_list[a + 1]}});
    }

    rep.summary = {{"point", vector_to_json(point)}, {"pairs", pairs},
                   {"worst_abs_z", worst_z}, {"z_max", config.z_max}};
    rep.pass = worst_z <= config.z_max;
    rep.csv_files.emplace_back("moment_compare.csv", csv.str());
    rep.wall_seconds = now_seconds() - t0;
    return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    switch (config.experiment) {
        case ExperimentKind::Lln: return run_lln(config);
        case ExperimentKind::TauDecay: return run_tau_decay(config);
        case ExperimentKind::GeneratorCheck: return run_generator_check(config);
        case ExperimentKind::WfReduction: return run_wf_reduction(config);
        case ExperimentKind::MomentCompare: return run_moment_compare(config);
    }
    throw QnError("run_experiment: bad kind");
}

void write_report(const ExperimentConfig& config, const ExperimentReport& report) {
    if (config.output_dir.empty()) return;
    std::filesystem::create_directories(config.output_dir);
    const auto dir = std::filesystem::path(config.output_dir);
    write_text((dir / "report.json").string(), report.to_json().dump(2) + "\n");
    for (const auto& [name, content] : report.csv_files)
        write_text((dir / name).string(), content);
}

} // namespace qnpop
