#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qnpop/model.hpp"
#include "qnpop/ode.hpp"

namespace qnpop {

enum class FlowDirection { Forward, Backward };

struct FlowResult {
    Vector endpoint;
    double t = 0.0;
    std::optional<Matrix> fundamental; // M(t): variational matrix, M(0) = I
    uint64_t steps = 0;
    double est_error = 0.0; // controller tolerance actually applied
};

struct FlowOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    uint64_t max_steps = 50'000'000;
    bool check_box = true;
};

// Limit vector field F_i = (beta_bar_i - delta_i) x_i. For quasi-neutral
// models the factorization F = gamma_i x_i R is cross-checked and a
// QuasiNeutralMismatch is raised if the two parameterizations disagree.
Vector drift_F(const ModelSpec& model, const Vector& x, double consistency_tol = 1e-10);

// Jacobian of F: analytic when supplied, otherwise central differences with
// step cbrt(eps) * max(1, |x|).
Matrix jacobian_DF(const ModelSpec& model, const Vector& x);

// Integrates the forward field F or the backward field -gamma_i x_i (the same
// trajectories traversed away from the slow manifold). Negative t integrates
// the chosen field in reverse. The fundamental matrix solves Mdot = J M on the
// same step grid (J = DF forward, -D of the backward field otherwise); the
// matrix-exponential form in the usual derivations only holds for commuting
// Jacobians, so the variational system is integrated instead.
FlowResult flow(const ModelSpec& model, const Vector& x0, double t, bool want_fundamental,
                FlowDirection direction, const FlowOptions& opts = {});

struct StructureCondition {
    std::string name;
    std::string verdict; // pass / fail / indeterminate
    std::string witness;
};

struct StructureReport {
    std::vector<StructureCondition> conditions;
    bool all_pass = true;
};

// Numerical probes of the standing structural conditions: competitiveness,
// irreducible interactions, source at the origin, off-diagonal strictness at
// nonzero equilibria, and a boundedness probe for dissipativity. Probes, not
// proofs; rate functions are opaque.
StructureReport check_structure(const ModelSpec& model, const std::vector<Vector>& sample_points,
                                double probe_horizon = 50.0);

} // namespace qnpop
