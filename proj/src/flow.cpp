#include "qnpop/flow.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <queue>

#include "qnpop/errors.hpp"

namespace qnpop {

Vector drift_F(const ModelSpec& model, const Vector& x, double consistency_tol) {
    Vector f = model.drift(x);
    if (model.quasi_neutral) {
        const Vector script_f = model.qn_field(x);
        const double r = model.R_at(x);
        for (int i = 0; i < model.K; ++i) {
            const double alt = script_f[i] * r;
            const double scale = std::max({1.0, std::abs(f[i]), std::abs(alt)});
            if (std::abs(f[i] - alt) > consistency_tol * scale)
                throw QuasiNeutralMismatch(
                    "drift_F: F_i != gamma_i x_i R at component " + std::to_string(i) +
                    " (" + std::to_string(f[i]) + " vs " + std::to_string(alt) + ")");
        }
    }
    return f;
}

Matrix jacobian_DF(const ModelSpec& model, const Vector& x) {
    if (model.drift_jacobian) return (*model.drift_jacobian)(x);
    const int K = model.K;
    const double h0 = std::cbrt(std::numeric_limits<double>::epsilon()) *
                      std::max(1.0, x.cwiseAbs().maxCoeff());
    Matrix j(K, K);
    Vector xp = x, xm = x;
    for (int col = 0; col < K; ++col) {
        xp[col] = x[col] + h0;
        xm[col] = x[col] - h0;
        j.col(col) = (model.drift(xp) - model.drift(xm)) / (2.0 * h0);
        xp[col] = x[col];
        xm[col] = x[col];
    }
    return j;
}

namespace {

// Jacobian of the backward field -gamma_i(x) x_i
Matrix backward_jacobian(const ModelSpec& model, const Vector& x) {
    return -model.qn_field_jacobian(x);
}

} // namespace

FlowResult flow(const ModelSpec& model, const Vector& x0, double t, bool want_fundamental,
                FlowDirection direction, const FlowOptions& opts) {
    const int K = model.K;
    if (direction == FlowDirection::Backward && !model.quasi_neutral)
        throw QnError("flow: backward direction requires a quasi-neutral model");

    const size_t dim = static_cast<size_t>(K) + (want_fundamental ? static_cast<size_t>(K * K) : 0);
    std::vector<double> y0(dim, 0.0);
    for (int i = 0; i < K; ++i) y0[static_cast<size_t>(i)] = x0[i];
    if (want_fundamental)
        for (int i = 0; i < K; ++i) y0[static_cast<size_t>(K + i * K + i)] = 1.0; // M(0) = I

    OdeRhs rhs = [&model, K, want_fundamental, direction](const std::vector<double>& y,
                                                          std::vector<double>& dydt, double) {
        Vector x(K);
        for (int i = 0; i < K; ++i) x[i] = y[static_cast<size_t>(i)];
        const Vector f = (direction == FlowDirection::Forward) ? model.drift(x)
                                                               : Vector(-model.qn_field(x));
        dydt.resize(y.size());
        for (int i = 0; i < K; ++i) dydt[static_cast<size_t>(i)] = f[i];
        if (want_fundamental) {
            const Matrix jac = (direction == FlowDirection::Forward)
                                   ? jacobian_DF(model, x)
                                   : backward_jacobian(model, x);
            Eigen::Map<const Matrix> m(y.data() + K, K, K);
            Eigen::Map<Matrix> md(dydt.data() + K, K, K);
            md = jac * m;
        }
    };

    OdeOptions oopts;
    oopts.rtol = opts.rtol;
    oopts.atol = opts.atol;
    oopts.max_steps = opts.max_steps;

    OdeObserver obs = nullptr;
    if (opts.check_box) {
        obs = [&model, K](const std::vector<double>& y, double tt) {
            for (int i = 0; i < K; ++i) {
                const double slack = 1e-9 * std::max(1.0, std::abs(y[static_cast<size_t>(i)]));
                if (y[static_cast<size_t>(i)] < model.box_lo[i] - slack ||
                    y[static_cast<size_t>(i)] > model.box_hi[i] + slack)
                    throw DomainEscape("flow: trajectory left the domain box at t=" +
                                       std::to_string(tt));
            }
            return true;
        };
    }

    const OdeOutcome o = integrate_ode(rhs, std::move(y0), 0.0, t, oopts, obs);

    FlowResult res;
    res.t = t;
    res.steps = o.steps;
    res.est_error = opts.rtol;
    res.endpoint = Vector(K);
    for (int i = 0; i < K; ++i) res.endpoint[i] = o.y[static_cast<size_t>(i)];
    if (want_fundamental) {
        Matrix m(K, K);
        for (int c = 0; c < K; ++c)
            for (int r = 0; r < K; ++r) m(r, c) = o.y[static_cast<size_t>(K + c * K + r)];
        if (m.determinant() <= 0.0)
            throw IntegratorBlowup("flow: fundamental matrix lost orientation (det <= 0)");
        res.fundamental = std::move(m);
    }
    return res;
}

namespace {

// per-capita growth g_i = beta_bar_i - delta_i and its FD Jacobian
Vector growth(const ModelSpec& model, const Vector& x) {
    Vector g(model.K);
    for (int i = 0; i < model.K; ++i) g[i] = model.beta_bar(i, x) - model.death(i, x);
    return g;
}

Matrix growth_jacobian(const ModelSpec& model, const Vector& x) {
    const int K = model.K;
    const double h0 = std::cbrt(std::numeric_limits<double>::epsilon()) *
                      std::max(1.0, x.cwiseAbs().maxCoeff());
    Matrix j(K, K);
    Vector xp = x, xm = x;
    for (int col = 0; col < K; ++col) {
        xp[col] = x[col] + h0;
        xm[col] = x[col] - h0;
        j.col(col) = (growth(model, xp) - growth(model, xm)) / (2.0 * h0);
        xp[col] = x[col];
        xm[col] = x[col];
    }
    return j;
}

bool strongly_connected(const Matrix& adj) {
    const int n = static_cast<int>(adj.rows());
    auto reach = [&](bool transpose) {
        std::vector<bool> seen(static_cast<size_t>(n), false);
        std::queue<int> q;
        q.push(0);
        seen[0] = true;
        int count = 1;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v = 0; v < n; ++v) {
                const double w = transpose ? adj(v, u) : adj(u, v);
                if (!seen[static_cast<size_t>(v)] && (w != 0.0 || u == v)) {
                    seen[static_cast<size_t>(v)] = true;
                    ++count;
                    q.push(v);
                }
            }
        }
        return count == n;
    };
    return reach(false) && reach(true);
}

std::string point_str(const Vector& x) {
    std::string s = "(";
    for (int i = 0; i < x.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(x[i]);
    }
    return s + ")";
}

} // namespace

StructureReport check_structure(const ModelSpec& model, const std::vector<Vector>& sample_points,
                                double probe_horizon) {
    StructureReport rep;
    const int K = model.K;

    // competitiveness: off-diagonal partials of per-capita growth <= 0
    {
        StructureCondition c{"competitive", "pass", ""};
        for (const auto& x : sample_points) {
            const Matrix jg = growth_jacobian(model, x);
            for (int i = 0; i < K && c.verdict == "pass"; ++i)
                for (int j = 0; j < K; ++j)
                    if (i != j && jg(i, j) > 1e-10) {
                        c.verdict = "fail";
                        c.witness = "d_j(growth_i) = " + std::to_string(jg(i, j)) + " at " +
                                    point_str(x) + " (i=" + std::to_string(i) +
                                    ", j=" + std::to_string(j) + ")";
                        break;
                    }
            if (c.verdict == "fail") break;
        }
        rep.conditions.push_back(c);
    }

    // irreducibility of the interaction matrix at each sample point
    {
        StructureCondition c{"irreducible", "pass", ""};
        for (const auto& x : sample_points) {
            Matrix adj = growth_jacobian(model, x);
            for (int i = 0; i < K; ++i)
                for (int j = 0; j < K; ++j)
                    if (std::abs(adj(i, j)) < 1e-12) adj(i, j) = 0.0;
            if (!strongly_connected(adj)) {
                c.verdict = K == 1 ? "pass" : "fail";
                c.witness = "interaction pattern not irreducible at " + point_str(x);
                if (K > 1) break;
            }
        }
        rep.conditions.push_back(c);
    }

    // source at origin: DF(0) = diag(growth_i(0)); eigenvalues are the
    // diagonal entries
    {
        StructureCondition c{"origin_source", "pass", ""};
        const Vector g0 = growth(model, Vector::Zero(K));
        for (int i = 0; i < K; ++i)
            if (!(g0[i] > 0.0)) {
                c.verdict = "fail";
                c.witness = "growth_" + std::to_string(i) + "(0) = " + std::to_string(g0[i]);
                break;
            }
        rep.conditions.push_back(c);
    }

    // strict off-diagonal negativity at nonzero equilibria, located by a
    // long-horizon flow probe from the sample points
    {
        StructureCondition c{"equilibria_strict", "pass", ""};
        std::vector<Vector> equilibria;
        FlowOptions fopts;
        fopts.rtol = 1e-9;
        for (const auto& x : sample_points) {
            try {
                const Vector y = flow(model, x, probe_horizon, false, FlowDirection::Forward, fopts).endpoint;
                if (model.drift(y).norm() > 1e-6 || y.norm() < 1e-8) continue;
                bool fresh = true;
                for (const auto& e : equilibria) fresh = fresh && (e - y).norm() > 1e-6;
                if (!fresh) continue;
                equilibria.push_back(y);
                const Matrix jg = growth_jacobian(model, y);
                for (int i = 0; i < K && c.verdict == "pass"; ++i)
                    for (int j = 0; j < K; ++j)
                        if (i != j && !(jg(i, j) < -1e-10)) {
                            c.verdict = "fail";
                            c.witness = "equilibrium " + point_str(y) + " has d_j(growth_i) = " +
                                        std::to_string(jg(i, j));
                            break;
                        }
            } catch (const QnError&) {
                if (c.verdict == "pass") c.verdict = "indeterminate";
            }
        }
        if (equilibria.empty() && c.verdict == "pass") {
            c.verdict = "indeterminate";
            c.witness = "probe found no nonzero equilibria from the sample points";
        }
        c.name = "equilibria_strict (probe)";
        rep.conditions.push_back(c);
    }

    // dissipativity probe: trajectories from box corners stay bounded
    {
        StructureCondition c{"dissipative (probe)", "pass", ""};
        const double diam = (model.box_hi - model.box_lo).norm();
        const int corners = K <= 6 ? (1 << K) : 64;
        FlowOptions fopts;
        fopts.rtol = 1e-8;
        fopts.check_box = false;
        for (int mask = 0; mask < corners; ++mask) {
            Vector x(K);
            for (int i = 0; i < K; ++i)
                x[i] = (mask >> i) & 1 ? model.box_hi[i] : std::max(model.box_lo[i], 1e-3);
            try {
                double worst = 0.0;
                const auto obs_model = model;
                // bounded if the trajectory stays within 10 box diameters
                OdeRhs rhs = [&obs_model, K](const std::vector<double>& y,
                                             std::vector<double>& dydt, double) {
                    Vector xx(K);
                    for (int i = 0; i < K; ++i) xx[i] = y[static_cast<size_t>(i)];
                    const Vector f = obs_model.drift(xx);
                    dydt.resize(y.size());
                    for (int i = 0; i < K; ++i) dydt[static_cast<size_t>(i)] = f[i];
                };
                std::vector<double> y0(static_cast<size_t>(K));
                for (int i = 0; i < K; ++i) y0[static_cast<size_t>(i)] = x[i];
                OdeOptions oo;
                oo.rtol = 1e-8;
                integrate_ode(rhs, y0, 0.0, probe_horizon, oo,
                              [&](const std::vector<double>& y, double) {
                                  double norm = 0.0;
                                  for (int i = 0; i < K; ++i)
                                      norm += y[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
                                  worst = std::max(worst, std::sqrt(norm));
                                  return worst <= 10.0 * std::max(diam, 1.0);
                              });
                if (worst > 10.0 * std::max(diam, 1.0)) {
                    c.verdict = "fail";
                    c.witness = "trajectory from corner " + point_str(x) + " reached norm " +
                                std::to_string(worst);
                    break;
                }
            } catch (const QnError&) {
                c.verdict = "indeterminate";
                c.witness = "integrator gave up from corner " + point_str(x);
            }
        }
        rep.conditions.push_back(c);
    }

    for (const auto& c : rep.conditions) rep.all_pass = rep.all_pass && c.verdict == "pass";
    return rep;
}

} // namespace qnpop
