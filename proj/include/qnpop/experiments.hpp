#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qnpop/io.hpp"
#include "qnpop/zoo.hpp"

namespace qnpop {

enum class ExperimentKind { Lln, TauDecay, GeneratorCheck, WfReduction, MomentCompare };

std::string experiment_name(ExperimentKind k);
ExperimentKind experiment_from_name(const std::string& name);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Lln;
    std::string model = "neutral_logistic";
    std::vector<int64_t> N_list = {100, 1000, 10000};
    int replicas = 200;
    double horizon = 5.0; // lln: process time; tau_decay: diffusion time
    uint64_t seed = 12345;
    std::string output_dir;
    int threads = 1;

    // shared / per-experiment knobs
    std::vector<double> x0;          // lln start (empty = default off-manifold start)
    int grid_points = 100;           // comparison grid size along a path
    double slope_band_lo = -0.65;    // lln verdict band for the error exponent
    double slope_band_hi = -0.35;
    double collapse_exponent = 0.2;  // tau_decay: threshold N^{-delta}
    double exceedance_max = 0.05;
    double oracle_h = 0.05;
    int oracle_replicas = 20000;
    int oracle_increments = 10;
    double z_max = 3.0;
    std::vector<double> freq_points = {0.3, 0.5, 0.7}; // generator_check points on the manifold
    std::vector<double> freq_grid;                     // wf grid (empty = 0.1..0.9)
    double r2_min = 0.99;
    double warmup_c = 0.0;           // generator_check: warm-up = warmup_c * ln N process time
    double off_omega_offset = 0.0;   // generator_check: start at (1 + offset) * pi
};

struct ExperimentReport {
    json config_echo;
    json summary;
    bool pass = false;
    std::vector<std::string> notes;
    double wall_seconds = 0.0;
    uint64_t total_events = 0;
    // (filename, content) pairs; byte-identical for identical (config, seed)
    std::vector<std::pair<std::string, std::string>> csv_files;

    json to_json() const;
};

ExperimentReport run_lln(const ExperimentConfig& config);
ExperimentReport run_tau_decay(const ExperimentConfig& config);
ExperimentReport run_generator_check(const ExperimentConfig& config);
ExperimentReport run_wf_reduction(const ExperimentConfig& config);
ExperimentReport run_moment_compare(const ExperimentConfig& config);

ExperimentReport run_experiment(const ExperimentConfig& config);

// resolves a zoo name or "@file.json" into a model
ZooEntry resolve_model(const std::string& name);

// writes report.json and the CSV tables into config.output_dir (created if
// missing); no-op when output_dir is empty
void write_report(const ExperimentConfig& config, const ExperimentReport& report);

json config_to_json(const ExperimentConfig& config);

} // namespace qnpop
