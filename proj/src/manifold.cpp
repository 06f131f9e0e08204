#include "qnpop/manifold.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "qnpop/errors.hpp"

namespace qnpop {

RadialProjection radial_projection(const Vector& x) {
    const int K = static_cast<int>(x.size());
    const double s = x.sum();
    if (!(s > 0.0)) throw ZeroTotal("radial_projection: sum(x) must be positive");
    RadialProjection rp;
    rp.rho = x / s;
    rp.drho.resize(K, K);
    for (int k = 0; k < K; ++k)
        for (int i = 0; i < K; ++i)
            rp.drho(k, i) = ((i == k ? 1.0 : 0.0) - rp.rho[k]) / s;
    rp.d2rho.resize(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        Matrix h(K, K);
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
                h(i, j) = -((i == k ? 1.0 : 0.0) + (j == k ? 1.0 : 0.0) - 2.0 * rp.rho[k]) / (s * s);
        rp.d2rho[static_cast<size_t>(k)] = std::move(h);
    }
    return rp;
}

double effective_density(const ModelSpec& model, const Vector& p, double tol) {
    if (!model.quasi_neutral) throw QnError("effective_density: model is not quasi-neutral");
    const auto& R = model.quasi_neutral->R;
    auto f = [&](double t) { return R(Vector(t * p)); };

    // R(0) = 1 > 0; expand the ray until the sign flips
    double lo = 0.0, hi = 1.0;
    double f_hi = f(hi);
    int guard = 0;
    while (f_hi > 0.0) {
        lo = hi;
        hi *= 2.0;
        f_hi = f(hi);
        if (++guard > 64)
            throw NoBracket("effective_density: R does not change sign along the ray");
    }
    if (f_hi == 0.0) return hi;

    // safeguarded Newton (d/dt R(tp) = DR . p < 0, strictly monotone)
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double ft = f(t);
        if (std::abs(ft) <= tol) return t;
        if (ft > 0.0) lo = t; else hi = t;
        const double dft = R.grad(Vector(t * p)).dot(p);
        double t_next = (dft < 0.0) ? t - ft / dft : 0.5 * (lo + hi);
        if (!(t_next > lo && t_next < hi)) t_next = 0.5 * (lo + hi);
        t = t_next;
    }
    if (std::abs(f(t)) <= 10.0 * tol) return t;
    throw NoBracket("effective_density: root refinement stalled");
}

double lambda_at(const ModelSpec& model, const Vector& x, bool verify_on_manifold) {
    if (!model.quasi_neutral) throw QnError("lambda_at: model is not quasi-neutral");
    const double lam = model.grad_R(x).dot(model.qn_field(x));
    if (verify_on_manifold && std::abs(model.R_at(x)) <= 1e-8) {
        const Matrix df = jacobian_DF(model, x);
        const Eigen::EigenSolver<Matrix> es(df);
        double best = std::numeric_limits<double>::infinity();
        double nonzero = 0.0;
        for (int i = 0; i < model.K; ++i) {
            const double re = es.eigenvalues()[i].real();
            const double d = std::abs(re - lam) + std::abs(es.eigenvalues()[i].imag());
            if (d < best) {
                best = d;
                nonzero = re;
            }
        }
        if (std::abs(nonzero - lam) > 1e-6 * std::max(1.0, std::abs(lam)))
            throw QuasiNeutralMismatch("lambda_at: DR . F-field disagrees with the DF eigenvalue");
    }
    return lam;
}

namespace {

// one-dimensional Newton along the transversal field to land on {R = 0}
Vector polish_onto_manifold(const ModelSpec& model, Vector y, int iters = 3) {
    for (int it = 0; it < iters; ++it) {
        const double r = model.R_at(y);
        if (r == 0.0) break;
        const Vector f = model.qn_field(y);
        const double lam = model.grad_R(y).dot(f);
        if (lam == 0.0) break;
        y -= (r / lam) * f;
    }
    for (int i = 0; i < y.size(); ++i)
        if (y[i] < 0.0 && y[i] > -1e-13) y[i] = 0.0;
    return y;
}

} // namespace

ProjectResult project_and_time(const ModelSpec& model, const Vector& x,
                               const ProjectOptions& opts) {
    if (!model.quasi_neutral) throw QnError("project_and_time: model is not quasi-neutral");
    const int K = model.K;
    ProjectResult res;

    Vector y = x;
    double tau_partial = 0.0;
    uint64_t steps = 0;
    double r = model.R_at(y);

    if (std::abs(r) > opts.eps_switch) {
        // forward flow with the quadrature of R carried as an extra state
        OdeRhs rhs = [&model, K](const std::vector<double>& s, std::vector<double>& ds, double) {
            Vector xx(K);
            for (int i = 0; i < K; ++i) xx[i] = s[static_cast<size_t>(i)];
            const Vector f = model.drift(xx);
            ds.resize(s.size());
            for (int i = 0; i < K; ++i) ds[static_cast<size_t>(i)] = f[i];
            ds[static_cast<size_t>(K)] = model.R_at(xx);
        };
        std::vector<double> state(static_cast<size_t>(K + 1), 0.0);
        for (int i = 0; i < K; ++i) state[static_cast<size_t>(i)] = x[i];

        OdeOptions oo;
        oo.rtol = opts.rtol;
        oo.atol = opts.atol;

        // integrate in horizon chunks sized from the local attraction rate;
        // basin membership is detected (|R| must keep decaying), not assumed
        int epoch = 0;
        int stalled = 0;
        bool converged = false;
        while (!converged) {
            Vector xx(K);
            for (int i = 0; i < K; ++i) xx[i] = state[static_cast<size_t>(i)];
            const double r_before = std::abs(model.R_at(xx));
            const double lam_loc = std::abs(model.grad_R(xx).dot(model.qn_field(xx)));
            const double t_needed = std::log(std::max(r_before / opts.eps_switch, 2.0)) /
                                    std::max(lam_loc, 1e-3);
            const double chunk = std::min(std::max(t_needed, 1e-2), 1e4);

            bool hit = false;
            const OdeOutcome out = integrate_ode(
                rhs, state, 0.0, chunk, oo,
                [&](const std::vector<double>& s, double) {
                    Vector xy(K);
                    for (int i = 0; i < K; ++i) xy[i] = s[static_cast<size_t>(i)];
                    if (std::abs(model.R_at(xy)) <= opts.eps_switch) {
                        hit = true;
                        return false;
                    }
                    return true;
                });
            state = out.y;
            steps += out.steps;
            if (hit) {
                converged = true;
                break;
            }
            for (int i = 0; i < K; ++i) xx[i] = state[static_cast<size_t>(i)];
            const double r_after = std::abs(model.R_at(xx));
            if (r_after > 0.5 * r_before) ++stalled; else stalled = 0;
            if (stalled >= 2)
                throw NotConverging("project_and_time: |R| fails to decay over doubling horizons"
                                    " (|R|=" + std::to_string(r_after) + ")");
            if (++epoch > opts.max_doublings)
                throw NotConverging("project_and_time: horizon budget exhausted, |R|=" +
                                    std::to_string(r_after));
        }
        for (int i = 0; i < K; ++i) y[i] = state[static_cast<size_t>(i)];
        tau_partial = state[static_cast<size_t>(K)];
        r = model.R_at(y);
    }

    const double lam_end = model.grad_R(y).dot(model.qn_field(y));
    if (!(lam_end < 0.0))
        throw NotConverging("project_and_time: nonnegative lambda near the manifold");
    // exponential-decay closure of the tau tail; error O(R^2)
    const double tau_tail = r / std::abs(lam_end);
    res.tau = tau_partial + tau_tail;
    res.pi = polish_onto_manifold(model, y);
    res.r_residual = std::abs(model.R_at(res.pi));
    res.lambda_pi = model.grad_R(res.pi).dot(model.qn_field(res.pi));
    res.steps = steps;

    if (opts.verify_pitau) {
        FlowOptions fo;
        fo.rtol = opts.rtol;
        fo.atol = opts.atol;
        const Vector back = flow(model, res.pi, res.tau, false, FlowDirection::Backward, fo).endpoint;
        const double defect = (back - x).norm();
        if (defect > opts.pitau_tol)
            throw PitauViolation("project_and_time: back-flow check missed x by " +
                                 std::to_string(defect));
    }
    return res;
}

DpiDtau dpi_dtau(const ModelSpec& model, const Vector& x, const ProjectOptions& opts) {
    DpiDtau out;
    out.proj = project_and_time(model, x, opts);
    const int K = model.K;

    Matrix m = Matrix::Identity(K, K);
    if (out.proj.tau != 0.0) {
        FlowOptions fo;
        fo.rtol = opts.rtol;
        fo.atol = opts.atol;
        const FlowResult fr = flow(model, x, -out.proj.tau, true, FlowDirection::Backward, fo);
        m = *fr.fundamental;
    }
    const Vector& pi = out.proj.pi;
    const double lam = out.proj.lambda_pi;
    if (lam == 0.0) throw LambdaZero("dpi_dtau: lambda vanishes at the projection");
    const Vector grad_r = model.grad_R(pi);
    const Matrix df_pi = jacobian_DF(model, pi);

    out.dtau = -(1.0 / lam) * (m.transpose() * grad_r);
    out.dpi = (Matrix::Identity(K, K) - df_pi / lam) * m;
    return out;
}

D2Pi d2pi(const ModelSpec& model, const Vector& x, double h_rel) {
    const int K = model.K;
    const double h = h_rel * std::max(1.0, x.cwiseAbs().maxCoeff());
    ProjectOptions tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    tight.verify_pitau = false;

    // raw[j] = d_j(Dpi): Dpi evaluated by central differences along e_j
    std::vector<Matrix> raw(static_cast<size_t>(K));
    Vector xp = x, xm = x;
    for (int j = 0; j < K; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        const Matrix dp = dpi_dtau(model, xp, tight).dpi;
        const Matrix dm = dpi_dtau(model, xm, tight).dpi;
        raw[static_cast<size_t>(j)] = (dp - dm) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }

    D2Pi out;
    out.d2pi.resize(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        Matrix h_k(K, K);
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
                h_k(i, j) = raw[static_cast<size_t>(j)](k, i); // d_j d_i pi_k
        const Matrix sym = 0.5 * (h_k + h_k.transpose());
        out.symmetry_defect = std::max(out.symmetry_defect, (h_k - h_k.transpose()).cwiseAbs().maxCoeff());
        out.d2pi[static_cast<size_t>(k)] = sym;
    }
    return out;
}

ManifoldChart chart(const ModelSpec& model, const Vector& x, const ChartOptions& opts) {
    ManifoldChart ch;
    ch.x = x;
    const DpiDtau dd = dpi_dtau(model, x, opts.project);
    ch.pi = dd.proj.pi;
    ch.tau = dd.proj.tau;
    ch.lambda_at_pi = lambda_at(model, ch.pi, opts.enforce_invariants);
    ch.dpi = dd.dpi;
    ch.dtau = dd.dtau;
    ch.r_at_pi = std::abs(model.R_at(ch.pi));
    ch.n_e = effective_density(model, radial_projection(x).rho);

    const Vector f = model.drift(x);
    const double r = model.R_at(x);
    ch.dpi_f_defect = (ch.dpi * f).norm() / std::max(f.norm(), 1e-300);
    ch.dtau_f_defect = std::abs(ch.dtau.dot(f) + r);
    ch.dr_dpi_defect = (model.grad_R(ch.pi).transpose() * ch.dpi).norm();
    {
        FlowOptions fo;
        fo.rtol = opts.project.rtol;
        fo.atol = opts.project.atol;
        const Vector back = flow(model, ch.pi, ch.tau, false, FlowDirection::Backward, fo).endpoint;
        ch.pitau_defect = (back - x).norm();
    }
    if (opts.with_d2pi) ch.d2pi = d2pi(model, x).d2pi;

    if (opts.enforce_invariants) {
        if (ch.r_at_pi > 1e-8)
            throw PitauViolation("chart: projection left the manifold, |R(pi)|=" +
                                 std::to_string(ch.r_at_pi));
        if (ch.pitau_defect > opts.project.pitau_tol)
            throw PitauViolation("chart: x = phi_tau(pi) violated by " +
                                 std::to_string(ch.pitau_defect));
        if (ch.dr_dpi_defect > 1e-6)
            throw QnError("chart: DR(pi) Dpi != 0 (defect " + std::to_string(ch.dr_dpi_defect) + ")");
        if (ch.dpi_f_defect > 1e-8)
            throw QnError("chart: Dpi F != 0 (relative defect " + std::to_string(ch.dpi_f_defect) + ")");
        if (ch.dtau_f_defect > 1e-8)
            throw QnError("chart: Dtau . F + R != 0 (defect " + std::to_string(ch.dtau_f_defect) + ")");
    }
    return ch;
}

} // namespace qnpop
