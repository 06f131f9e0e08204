#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qnpop/model.hpp"
#include "qnpop/rng.hpp"

namespace qnpop {

struct PopulationState {
    std::vector<int64_t> counts;
    double time = 0.0;
    int64_t system_size = 1;
    bool absorbed = false;
    bool escaped = false;

    Vector density() const {
        Vector x(static_cast<Eigen::Index>(counts.size()));
        for (size_t i = 0; i < counts.size(); ++i)
            x[static_cast<Eigen::Index>(i)] =
                static_cast<double>(counts[i]) / static_cast<double>(system_size);
        return x;
    }
};

// Event channels: [0, n_clutches) are births by clutch index, then K deaths.
struct PathEvent {
    double time;
    int32_t channel;
};

struct Snapshot {
    double t;
    Vector x;
};

struct PopulationPath {
    PopulationState initial;
    PopulationState final_state;
    std::vector<PathEvent> events;     // present when event logging is on
    std::vector<Snapshot> snapshots;   // present when snapshot_dt > 0
    uint64_t n_events = 0;
    bool rounded_x0 = false;           // N*x0 was not integer; rounded to nearest
    bool absorbed = false;             // all rates vanished before the horizon
    bool escaped = false;              // density left the domain box (path flagged, not an error)
    // per-channel tallies (when enabled): event counts and compensator integrals
    std::vector<uint64_t> channel_counts;
    std::vector<double> channel_compensators;
};

struct RateTable {
    std::vector<double> rates; // clutch channels then death channels
    double total = 0.0;
};

struct SimOptions {
    bool log_events = true;
    bool tally_channels = false;
    uint64_t stream = 0;               // rng stream id (replica index)
    uint64_t max_events = std::numeric_limits<uint64_t>::max();
};

// Absolute event rates at a state; exact evaluation, nothing cached.
// Throws DomainEscape / NegativeRate / RateOverflow.
RateTable total_rates(const ModelSpec& model, const PopulationState& state);

// Exact simulation of the jump chain (direct method): next event time is
// exponential in the total rate, the event is chosen proportionally to its
// rate. Identical (seed, stream, inputs) give a bit-identical path.
PopulationPath simulate_path(const ModelSpec& model, const Vector& x0, int64_t N,
                             double horizon, uint64_t rng_seed, double snapshot_dt,
                             const SimOptions& options = {});

// Replays the event log from the initial state; used by tests to pin the
// path representation.
PopulationState replay_events(const ModelSpec& model, const PopulationPath& path);

std::string channel_label(const ModelSpec& model, int32_t channel);

// --- model assumption validation (report-only) ---

struct AssumptionCheck {
    std::string name;
    bool pass = true;
    bool applicable = true;
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    double worst_value = 0.0;
    int worst_point = -1;
    std::string classification; // exact / o(1/N) / O(1/N) / slower
    std::string note;
};

struct AssumptionReport {
    AssumptionCheck a1, a2, a3, a4;
    std::vector<double> n_list;
};

// Empirical N-scaling checks of the clutch-moment and convergence assumptions
// at user-supplied sample points. Rate functions are opaque callables, so this
// fits scaling exponents rather than proving limits.
AssumptionReport validate_assumptions(const ModelSpec& model,
                                      const std::vector<Vector>& sample_points,
                                      const std::vector<double>& N_list);

} // namespace qnpop
