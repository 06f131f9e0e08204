#pragma once

#include <optional>
#include <vector>

#include "qnpop/flow.hpp"
#include "qnpop/model.hpp"

namespace qnpop {

struct RadialProjection {
    Vector rho;                 // x / sum(x)
    Matrix drho;                // drho(k, i) = d_i rho_k
    std::vector<Matrix> d2rho;  // d2rho[k](i, j) = d_i d_j rho_k
};

// Radial projection onto the unit simplex with its closed-form first and
// second derivatives. Throws ZeroTotal when sum(x) = 0.
RadialProjection radial_projection(const Vector& x);

// Effective density: the unique ray multiplier n_e with R(n_e * p) = 0.
// Monotone in the multiplier (DR < 0), so a bracketed Newton/bisection solve;
// |R| <= 1e-12 at the root. Throws NoBracket when R never changes sign on the
// ray (compactness of {R >= 0} violated).
double effective_density(const ModelSpec& model, const Vector& p, double tol = 1e-12);

struct ProjectOptions {
    double eps_switch = 1e-8; // |R| level at which the flow is truncated
    double rtol = 1e-10;
    double atol = 1e-12;
    bool verify_pitau = true; // flow back from pi over tau and compare with x
    double pitau_tol = 1e-6;
    int max_doublings = 48;
};

struct ProjectResult {
    Vector pi;        // projection onto the slow manifold
    double tau = 0.0; // time change: integral of R along the forward flow
    double lambda_pi = 0.0;
    double r_residual = 0.0; // |R(pi)| after polish
    uint64_t steps = 0;
};

// Projection pi(x) and time change tau(x): integrate the forward flow until
// |R| <= eps_switch accumulating the quadrature of R on the integrator's own
// grid, close the tail with R/|lambda| (R decays exponentially at rate lambda
// near the manifold, so the closure error is O(R^2)), then polish the
// endpoint onto {R = 0} with a one-dimensional Newton step along the
// transversal direction gamma_i x_i. Throws NotConverging when |R| fails to
// decay, PitauViolation when the backward-flow verification misses x.
ProjectResult project_and_time(const ModelSpec& model, const Vector& x,
                               const ProjectOptions& opts = {});

// lambda(x) = DR(x) . (gamma_i(x) x_i): the transversal eigenvalue.
// With verify_on_manifold and R(x) ~ 0, checks lambda against the unique
// nonzero eigenvalue of DF(x).
double lambda_at(const ModelSpec& model, const Vector& x, bool verify_on_manifold = false);

struct DpiDtau {
    Matrix dpi;
    Vector dtau;
    ProjectResult proj;
};

// First derivatives of pi and tau assembled from the backward variational
// matrix M over flow time -tau:
//   Dtau = -(1/lambda(pi)) DR(pi) M,   Dpi = (I - DF(pi)/lambda(pi)) M.
DpiDtau dpi_dtau(const ModelSpec& model, const Vector& x, const ProjectOptions& opts = {});

struct D2Pi {
    std::vector<Matrix> d2pi; // d2pi[k](i, j) = d_i d_j pi_k, symmetrized
    double symmetry_defect = 0.0;
};

// Second derivatives by central differences of the analytic Dpi
// (step h = 1e-5 * max(1, |x|)), symmetrized over the last two indices.
D2Pi d2pi(const ModelSpec& model, const Vector& x, double h_rel = 1e-5);

struct ManifoldChart {
    Vector x;
    Vector pi;
    double tau = 0.0;
    double lambda_at_pi = 0.0;
    double n_e = 0.0;
    Matrix dpi;
    Vector dtau;
    std::optional<std::vector<Matrix>> d2pi;
    // invariant residuals, recorded for auditability
    double r_at_pi = 0.0;
    double pitau_defect = 0.0;  // |phi_tau(pi) - x|
    double dr_dpi_defect = 0.0; // |DR(pi) . Dpi|
    double dpi_f_defect = 0.0;  // |Dpi F| / |F|
    double dtau_f_defect = 0.0; // |Dtau . F + R|
};

struct ChartOptions {
    ProjectOptions project;
    bool with_d2pi = false;
    bool enforce_invariants = true;
};

// Bundles (pi, tau, lambda, n_e, Dpi, Dtau) at a query point and checks the
// chart identities at their stated tolerances.
ManifoldChart chart(const ModelSpec& model, const Vector& x, const ChartOptions& opts = {});

} // namespace qnpop
