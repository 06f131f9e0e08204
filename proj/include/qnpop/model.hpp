#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "qnpop/rates.hpp"

namespace qnpop {

// One reproduction channel: an individual of `type_index` produces the clutch
// `offspring` (offspring[j] of type j) at per-capita rate `rate`.
struct ClutchRate {
    int type_index = 0;
    Eigen::VectorXi offspring;
    NRate rate;

    int total_offspring() const { return offspring.sum(); }
    // true when the clutch is n·e_i for the parent type
    bool same_type() const {
        for (Eigen::Index j = 0; j < offspring.size(); ++j)
            if (j != type_index && offspring[j] != 0) return false;
        return offspring[type_index] > 0;
    }
};

// Quasi-neutral structure: the limit vector field factors as
// F_i(x) = gamma_i(x) x_i R(x), with R(0)=1, DR < 0 componentwise and
// {R >= 0} compact. Omega = {R = 0} is the slow manifold.
struct QuasiNeutral {
    std::vector<RateExpr> gamma;
    RateExpr R;
};

struct ModelSpec {
    std::string name;
    int K = 0;
    std::vector<ClutchRate> clutches;
    std::vector<NRate> deaths;                    // delta_i, size K
    std::vector<RateExpr> sigma;                  // empty, or size K: 1/N net-reproduction correction
    std::vector<std::vector<RateExpr>> theta;     // empty, or K x K rescaled mutation, theta_ii = 0
    std::optional<QuasiNeutral> quasi_neutral;
    std::optional<std::function<Matrix(const Vector&)>> drift_jacobian; // analytic DF
    Vector box_lo, box_hi;                        // declared valid domain of all rate functions
    double rate_cap = 1e15;

    bool in_box(const Vector& x) const {
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (x[i] < box_lo[i] || x[i] > box_hi[i]) return false;
        return true;
    }

    // first/second same-type clutch moments of the limit rates
    double beta_bar(int i, const Vector& x) const;
    double beta_check(int i, const Vector& x) const;
    Vector beta_bar(const Vector& x) const;
    Vector beta_check(const Vector& x) const;
    double death(int i, const Vector& x) const { return deaths[static_cast<size_t>(i)].limit(x); }

    double sigma_at(int i, const Vector& x) const {
        return sigma.empty() ? 0.0 : sigma[static_cast<size_t>(i)](x);
    }
    double theta_at(int i, int j, const Vector& x) const {
        return theta.empty() ? 0.0 : theta[static_cast<size_t>(i)][static_cast<size_t>(j)](x);
    }

    // limit vector field F_i = (beta_bar_i - delta_i) x_i
    Vector drift(const Vector& x) const;
    // script-F field of the quasi-neutral factorization: gamma_i(x) x_i
    Vector qn_field(const Vector& x) const;
    Matrix qn_field_jacobian(const Vector& x) const;
    double R_at(const Vector& x) const { return quasi_neutral->R(x); }
    Vector grad_R(const Vector& x) const { return quasi_neutral->R.grad(x); }

    // throws on structural violations (sizes, empty clutches, R(0) != 1, ...)
    void validate() const;
};

// Expected-offspring bookkeeping at finite N.
struct OffspringMoments {
    Vector beta_hat_N;   // expected total reproductive output per capita
    Matrix mu_N;         // off-type offspring fraction; 0 where beta_hat_N = 0
    Vector beta_bar;     // same-type first moment of the limit rates
    Vector beta_check;   // same-type second moment
    std::vector<bool> mu_undefined; // beta_hat_N_i = 0 flagged
};

OffspringMoments mean_offspring_and_mutation(const ModelSpec& model, const Vector& x, double N);

} // namespace qnpop
