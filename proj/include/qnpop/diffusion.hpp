#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qnpop/manifold.hpp"
#include "qnpop/model.hpp"

namespace qnpop {

// Labeled breakdown of the limiting-generator coefficients. The values are on
// the diffusion clock t -> X((N/2) t) / N and sum exactly to (drift,
// diffusion); printed_scale carries the same terms on the X(Nt)/N clock on
// which the closed-form generator expression is usually written (a factor 2,
// and the quadratic-variation drift an additional Ito 1/2).
struct GeneratorTerms {
    Vector mutation_direct;
    Vector mutation_projection;
    Vector selection_direct;
    Vector selection_projection;
    Vector qv_drift;
    Matrix qv_diffusion;
    Vector printed_mutation_direct;
    Vector printed_mutation_projection;
    Vector printed_selection;
    Vector printed_qv_drift;
    Matrix printed_qv_diffusion;
};

struct GeneratorCoefficients {
    Vector point;     // pi on the slow manifold
    Vector drift;     // b
    Matrix diffusion; // a (PSD-floored); generator = b . grad f + (1/2) a : hess f
    GeneratorTerms terms;
    double lambda = 0.0;
    double dr_dot_b = 0.0;       // DR(pi) . b
    double dr_a_dr = 0.0;        // DR(pi) a DR(pi)
    double tangency_defect = 0.0; // |DR.b + (1/2) D2R : a|, second-order tangency
    std::vector<std::string> notes;
};

struct GeneratorOptions {
    double manifold_tol = 1e-8;
    double psd_floor = 1e-10; // relative eigenvalue floor before erroring
};

// Drift b(pi) and diffusion a(pi) of the limiting diffusion of the projected
// process on the slow manifold, term by term, with the audit breakdown.
// Requires |R(pi)| <= manifold_tol and lambda(pi) < 0; throws LambdaZero for
// |lambda| < 1e-12.
GeneratorCoefficients generator_coefficients(const ModelSpec& model, const Vector& pi,
                                             const GeneratorOptions& opts = {});

struct MomentEstimate {
    Vector point;
    Vector b_hat, b_se;
    Matrix a_hat, a_se;
    int n_replicas = 0;
    int n_increments = 0;
    int n_invalid = 0; // replicas whose projection failed
    uint64_t total_events = 0;
};

struct OracleOptions {
    int n_increments = 10;  // burst subdivision; the covariance uses the first slot
    uint64_t seed = 20240901;
    int threads = 0;        // 0 = hardware
    double warmup_process_time = 0.0; // discarded before measuring
    double project_eps = 1e-8;
};

// Independent Monte Carlo check of the generator coefficients: short bursts of
// the exact chain over diffusion time h (process time N h / 2), projected onto
// the manifold. b_hat = E[pi(Z(h)) - pi(Z(0))]/h; a_hat is the replica
// covariance of the first h/n_increments sub-increment (curvature smearing of
// the later sub-increments would bias the covariance downward; the first slot
// starts from the shared deterministic point, leaving only the O(h/m)
// within-slot bias at no cost in relative standard error).
MomentEstimate jump_moment_oracle(const ModelSpec& model, const Vector& pi, int64_t N,
                                  int n_replicas, double h, const OracleOptions& opts = {});

struct DiffusionPath {
    std::vector<double> times;
    std::vector<Vector> points;
    uint64_t seed = 0;
    std::vector<std::pair<double, int>> absorptions; // (time, type) boundary hits
    std::vector<std::string> notes;
};

struct DiffusionOptions {
    double retract_tol = 1e-9;
    uint64_t stream = 0;
};

// Euler-Maruyama on the slow manifold: pi += b dt + L sqrt(dt) xi with L a
// PSD-floored factor of a, followed by a Newton retraction along the
// transversal field. Extinct coordinates are frozen at zero (sub-face
// dynamics; extinction is absorbing for the finite-N chain).
DiffusionPath simulate_diffusion(const ModelSpec& model, const Vector& pi0, double T, double dt,
                                 uint64_t seed, const DiffusionOptions& opts = {});

struct FrequencyCoefficients {
    Vector drift_p;
    Matrix diffusion_p;
    double n_e = 0.0;
};

// Exact second-order change of variables p = rho(pi) through the radial
// projection: drift_p = Drho b + (1/2) D2rho : a, diffusion_p = Drho a Drho^T.
FrequencyCoefficients pushforward_frequency(const ModelSpec& model,
                                            const GeneratorCoefficients& coeffs);

} // namespace qnpop
