#include "qnpop/ode.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "qnpop/errors.hpp"

namespace qnpop {

namespace ode = boost::numeric::odeint;

OdeOutcome integrate_ode(const OdeRhs& rhs, std::vector<double> y0, double t0, double t1,
                         const OdeOptions& opts, const OdeObserver& observer) {
    OdeOutcome out;
    out.y = std::move(y0);
    out.t = t0;
    if (t1 == t0) return out;

    const double dir = (t1 > t0) ? 1.0 : -1.0;
    auto stepper =
        ode::make_controlled(opts.atol, opts.rtol, ode::runge_kutta_dopri5<std::vector<double>>());

    auto sys = [&rhs](const std::vector<double>& y, std::vector<double>& dydt, double t) {
        rhs(y, dydt, t);
    };

    double dt = opts.init_dt != 0.0 ? dir * std::abs(opts.init_dt)
                                    : dir * std::min(1e-4, std::abs(t1 - t0));
    while (dir * (t1 - out.t) > 0.0) {
        if (dir * (out.t + dt) > dir * t1) dt = t1 - out.t;
        const double dt_before = dt;
        const auto res = stepper.try_step(sys, out.y, out.t, dt);
        if (res == ode::success) {
            ++out.steps;
            if (out.steps > opts.max_steps)
                throw IntegratorBlowup("integrate_ode: step budget exhausted");
            if (observer && !observer(out.y, out.t)) {
                out.stopped_early = true;
                return out;
            }
        } else {
            if (std::abs(dt) < 1e-14 * std::max(1.0, std::abs(out.t)))
                throw IntegratorBlowup("integrate_ode: step size underflow at t=" +
                                       std::to_string(out.t));
            (void)dt_before;
        }
    }
    return out;
}

} // namespace qnpop
