#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace qnpop {

using OdeRhs = std::function<void(const std::vector<double>&, std::vector<double>&, double)>;
// called after each accepted step; return false to stop the integration
using OdeObserver = std::function<bool(const std::vector<double>&, double)>;

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    uint64_t max_steps = 50'000'000;
    double init_dt = 0.0; // 0 = auto
};

struct OdeOutcome {
    std::vector<double> y;
    double t = 0.0;
    uint64_t steps = 0;
    bool stopped_early = false;
};

// Adaptive Dormand-Prince 5(4) (Boost.odeint controlled stepper) from t0 to
// t1; t1 < t0 integrates in reverse. Throws IntegratorBlowup when the step
// size underflows or the step budget is exhausted.
OdeOutcome integrate_ode(const OdeRhs& rhs, std::vector<double> y0, double t0, double t1,
                         const OdeOptions& opts = {}, const OdeObserver& observer = nullptr);

} // namespace qnpop
