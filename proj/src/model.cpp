#include "qnpop/model.hpp"

#include <cmath>
#include <stdexcept>

#include "qnpop/errors.hpp"

namespace qnpop {

double ModelSpec::beta_bar(int i, const Vector& x) const {
    double s = 0.0;
    for (const auto& c : clutches)
        if (c.type_index == i && c.same_type())
            s += static_cast<double>(c.offspring[i]) * c.rate.limit(x);
    return s;
}

double ModelSpec::beta_check(int i, const Vector& x) const {
    double s = 0.0;
    for (const auto& c : clutches)
        if (c.type_index == i && c.same_type()) {
            const double n = static_cast<double>(c.offspring[i]);
            s += n * n * c.rate.limit(x);
        }
    return s;
}

Vector ModelSpec::beta_bar(const Vector& x) const {
    Vector v(K);
    for (int i = 0; i < K; ++i) v[i] = beta_bar(i, x);
    return v;
}

Vector ModelSpec::beta_check(const Vector& x) const {
    Vector v(K);
    for (int i = 0; i < K; ++i) v[i] = beta_check(i, x);
    return v;
}

Vector ModelSpec::drift(const Vector& x) const {
    Vector f(K);
    for (int i = 0; i < K; ++i) f[i] = (beta_bar(i, x) - death(i, x)) * x[i];
    return f;
}

Vector ModelSpec::qn_field(const Vector& x) const {
    const auto& qn = *quasi_neutral;
    Vector f(K);
    for (int i = 0; i < K; ++i) f[i] = qn.gamma[static_cast<size_t>(i)](x) * x[i];
    return f;
}

Matrix ModelSpec::qn_field_jacobian(const Vector& x) const {
    const auto& qn = *quasi_neutral;
    Matrix j = Matrix::Zero(K, K);
    for (int i = 0; i < K; ++i) {
        const auto& g = qn.gamma[static_cast<size_t>(i)];
        j.row(i) = (g.grad(x) * x[i]).transpose();
        j(i, i) += g(x);
    }
    return j;
}

void ModelSpec::validate() const {
    if (K < 1) throw QnError("ModelSpec: K must be >= 1");
    if (static_cast<int>(deaths.size()) != K) throw QnError("ModelSpec: deaths must have size K");
    if (box_lo.size() != K || box_hi.size() != K) throw QnError("ModelSpec: domain box must have size K");
    for (int i = 0; i < K; ++i)
        if (!(box_lo[i] <= box_hi[i])) throw QnError("ModelSpec: empty domain box");
    for (const auto& c : clutches) {
        if (c.type_index < 0 || c.type_index >= K) throw QnError("ModelSpec: clutch type out of range");
        if (c.offspring.size() != K) throw QnError("ModelSpec: clutch vector must have size K");
        if (c.offspring.minCoeff() < 0) throw QnError("ModelSpec: negative clutch entry");
        if (c.offspring.sum() < 1) throw QnError("ModelSpec: empty clutch (pure deaths are carried by delta)");
    }
    if (!sigma.empty() && static_cast<int>(sigma.size()) != K)
        throw QnError("ModelSpec: sigma must be empty or size K");
    if (!theta.empty()) {
        if (static_cast<int>(theta.size()) != K) throw QnError("ModelSpec: theta must be K x K");
        for (const auto& row : theta)
            if (static_cast<int>(row.size()) != K) throw QnError("ModelSpec: theta must be K x K");
        const Vector mid = 0.5 * (box_lo + box_hi);
        for (int i = 0; i < K; ++i) {
            if (std::abs(theta[static_cast<size_t>(i)][static_cast<size_t>(i)](mid)) != 0.0)
                throw QnError("ModelSpec: theta_ii must vanish");
            for (int j = 0; j < K; ++j) {
                const double t = theta[static_cast<size_t>(i)][static_cast<size_t>(j)](mid);
                if (!(t >= 0.0) || !std::isfinite(t))
                    throw QnError("ModelSpec: theta must be finite and non-negative");
            }
        }
    }
    if (quasi_neutral) {
        const auto& qn = *quasi_neutral;
        if (static_cast<int>(qn.gamma.size()) != K)
            throw QnError("ModelSpec: quasi-neutral gamma must have size K");
        const Vector zero = Vector::Zero(K);
        const double r0 = qn.R(zero);
        if (std::abs(r0 - 1.0) > 1e-12)
            throw QnError("ModelSpec: quasi-neutral R(0) must equal 1, got " + std::to_string(r0));
        const Vector mid = 0.5 * (box_lo + box_hi);
        for (int i = 0; i < K; ++i)
            if (!(qn.gamma[static_cast<size_t>(i)](mid) > 0.0))
                throw QnError("ModelSpec: quasi-neutral gamma must be positive on the domain box");
    }
}

OffspringMoments mean_offspring_and_mutation(const ModelSpec& model, const Vector& x, double N) {
    const int K = model.K;
    OffspringMoments m;
    m.beta_hat_N = Vector::Zero(K);
    m.mu_N = Matrix::Zero(K, K);
    m.beta_bar = model.beta_bar(x);
    m.beta_check = model.beta_check(x);
    m.mu_undefined.assign(static_cast<size_t>(K), false);

    Matrix off_mass = Matrix::Zero(K, K); // off-type type-j offspring rate of type-i parents
    for (const auto& c : model.clutches) {
        const int i = c.type_index;
        const double r = c.rate.at(x, N);
        m.beta_hat_N[i] += static_cast<double>(c.total_offspring()) * r;
        if (!c.same_type())
            for (int j = 0; j < K; ++j)
                off_mass(i, j) += static_cast<double>(c.offspring[j]) * r;
    }
    for (int i = 0; i < K; ++i) {
        if (m.beta_hat_N[i] == 0.0) {
            bool any = false;
            for (int j = 0; j < K; ++j) any = any || off_mass(i, j) != 0.0;
            if (any) m.mu_undefined[static_cast<size_t>(i)] = true;
            continue; // mu row stays 0
        }
        m.mu_N.row(i) = off_mass.row(i) / m.beta_hat_N[i];
    }
    return m;
}

} // namespace qnpop
