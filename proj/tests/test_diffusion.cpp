#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "qnpop/diffusion.hpp"
#include "qnpop/errors.hpp"
#include "qnpop/manifold.hpp"
#include "qnpop/zoo.hpp"

using namespace qnpop;

namespace {

// geometric route to the generator, independent of the term-by-term
// transcription: push the chain moments through Dpi and D2pi on the manifold
struct GeometricGenerator {
    Vector drift;
    Matrix diffusion;
};

GeometricGenerator geometric_generator(const ModelSpec& model, const Vector& pi) {
    const int K = model.K;
    const Vector bb = model.beta_bar(pi);
    const Vector bc = model.beta_check(pi);
    Vector v(K);
    for (int i = 0; i < K; ++i) v[i] = (bb[i] + bc[i]) * pi[i];

    ProjectOptions po;
    po.verify_pitau = false;
    const Matrix dpi = dpi_dtau(model, pi, po).dpi;
    const auto d2 = d2pi(model, pi);

    // mutation and selection drift of the density process (X(Nt)/N clock)
    Vector mut = Vector::Zero(K);
    if (!model.theta.empty())
        for (int l = 0; l < K; ++l)
            for (int j = 0; j < K; ++j)
                mut[l] += model.theta_at(j, l, pi) * bb[j] * pi[j] -
                          model.theta_at(l, j, pi) * bb[l] * pi[l];
    Vector sel = Vector::Zero(K);
    for (int i = 0; i < K; ++i) sel[i] = model.sigma_at(i, pi) * pi[i];

    GeometricGenerator g;
    g.drift = 0.5 * (dpi * (mut + sel));
    for (int i = 0; i < K; ++i) {
        double ito = 0.0;
        for (int j = 0; j < K; ++j) ito += d2.d2pi[static_cast<size_t>(i)](j, j) * v[j];
        g.drift[i] += 0.25 * ito;
    }
    g.diffusion = 0.5 * (dpi * v.asDiagonal() * dpi.transpose());
    return g;
}

// quasi-neutral test model with a curved manifold (quadratic R) and mutation:
// exercises the DR-ratio derivatives and the mutation projection sign
ModelSpec curved_model(double eps, double theta) {
    ModelSpec m;
    m.name = "curved";
    m.K = 2;
    m.box_lo = Vector::Zero(2);
    m.box_hi = Vector::Constant(2, 3.0);
    auto r_fn = [eps](const Vector& x) {
        return 1.0 - x[0] - x[1] - eps * x[0] * x[0];
    };
    for (int i = 0; i < 2; ++i) {
        ClutchRate c;
        c.type_index = i;
        c.offspring = Eigen::VectorXi::Zero(2);
        c.offspring[i] = 1;
        c.rate = NRate(RateExpr::constant(1.0));
        m.clutches.push_back(std::move(c));
        // delta_i = 1 - R(x) keeps beta_bar - delta = R
        m.deaths.push_back(NRate(RateExpr::custom([r_fn](const Vector& x) {
            return 1.0 - r_fn(x);
        })));
    }
    if (theta > 0.0) {
        for (int i = 0; i < 2; ++i) {
            const int j = 1 - i;
            ClutchRate c;
            c.type_index = i;
            c.offspring = Eigen::VectorXi::Zero(2);
            c.offspring[j] = 1;
            c.rate = NRate(RateExpr::constant(0.0), RateExpr::constant(theta), 1.0);
            m.clutches.push_back(std::move(c));
        }
        m.theta.assign(2, std::vector<RateExpr>(2));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                m.theta[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    RateExpr::constant(i == j ? 0.0 : theta);
        m.sigma.assign(2, RateExpr::constant(theta));
    }
    QuasiNeutral qn;
    qn.gamma.assign(2, RateExpr::constant(1.0));
    qn.R = RateExpr::custom(r_fn);
    m.quasi_neutral = std::move(qn);
    m.validate();
    return m;
}

Vector on_manifold(const ModelSpec& model, double p1) {
    Vector p(2);
    p << p1, 1.0 - p1;
    return effective_density(model, p) * p;
}

} // namespace

TEST_CASE("generator matches the geometric pushforward on the zoo") {
    for (const char* name : {"neutral_logistic", "neutral_logistic_mut",
                             "gause_lotka_volterra_qn", "double_monod"}) {
        const ZooEntry e = zoo_make(name, false);
        for (double p1 : {0.3, 0.5, 0.7}) {
            const Vector pi = on_manifold(e.spec, p1);
            const GeneratorCoefficients gc = generator_coefficients(e.spec, pi);
            const GeometricGenerator gg = geometric_generator(e.spec, pi);
            CAPTURE(name);
            CAPTURE(p1);
            CHECK((gc.diffusion - gg.diffusion).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((gc.drift - gg.drift).cwiseAbs().maxCoeff() < 2e-5); // d2pi is FD-limited
        }
    }
}

TEST_CASE("generator matches the geometric pushforward on a curved manifold") {
    const ModelSpec m = curved_model(0.4, 0.8);
    for (double p1 : {0.25, 0.5, 0.65}) {
        const Vector pi = on_manifold(m, p1);
        const GeneratorCoefficients gc = generator_coefficients(m, pi);
        const GeometricGenerator gg = geometric_generator(m, pi);
        CAPTURE(p1);
        CHECK((gc.diffusion - gg.diffusion).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((gc.drift - gg.drift).cwiseAbs().maxCoeff() < 2e-5);
    }
}

TEST_CASE("generator terms: audit sums and symmetry") {
    const ZooEntry e = zoo_make("neutral_logistic_mut", false);
    const Vector pi = on_manifold(e.spec, 0.3);
    const GeneratorCoefficients gc = generator_coefficients(e.spec, pi);

    const Vector sum = gc.terms.mutation_direct + gc.terms.mutation_projection +
                       gc.terms.selection_direct + gc.terms.selection_projection +
                       gc.terms.qv_drift;
    CHECK((sum - gc.drift).cwiseAbs().maxCoeff() <= 1e-12 * gc.drift.cwiseAbs().maxCoeff());
    CHECK((gc.diffusion - gc.terms.qv_diffusion).cwiseAbs().maxCoeff() <=
          1e-12 * gc.diffusion.cwiseAbs().maxCoeff());
    CHECK((gc.diffusion - gc.diffusion.transpose()).cwiseAbs().maxCoeff() < 1e-14);

    Eigen::SelfAdjointEigenSolver<Matrix> es(gc.diffusion);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());

    // exchange symmetry at equal frequencies: b_1 = b_2 for the neutral model
    const ZooEntry en = zoo_make("neutral_logistic", false);
    const GeneratorCoefficients gn =
        generator_coefficients(en.spec, on_manifold(en.spec, 0.5));
    CHECK(gn.drift[0] == doctest::Approx(gn.drift[1]).epsilon(1e-12));
}

TEST_CASE("generator: mutation term hand values") {
    // symmetric mutation at equal frequencies vanishes; at p != 1/2 the
    // direct term is theta (pi_j - pi_i) on the printed clock
    const ZooEntry e = zoo_make("neutral_logistic_mut", false);
    {
        const GeneratorCoefficients gc = generator_coefficients(e.spec, on_manifold(e.spec, 0.5));
        CHECK(std::abs(gc.terms.printed_mutation_direct[0]) < 1e-14);
    }
    {
        const GeneratorCoefficients gc = generator_coefficients(e.spec, on_manifold(e.spec, 0.3));
        CHECK(gc.terms.printed_mutation_direct[0] == doctest::Approx(0.4).epsilon(1e-10));
        CHECK(gc.terms.printed_mutation_direct[1] == doctest::Approx(-0.4).epsilon(1e-10));
        // equal DR components: the mutation projection vanishes for this geometry
        CHECK(gc.terms.mutation_projection.cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("generator: diffusion diagonal leading term as printed") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    Vector pi(2);
    pi << 0.3, 0.7;
    const GeneratorCoefficients gc = generator_coefficients(e.spec, pi);
    // printed delta_ij block: pi_i (beta_check_i + beta_bar_i) = 2 pi_i
    const double lead0 = pi[0] * (e.spec.beta_check(0, pi) + e.spec.beta_bar(0, pi));
    const double lead1 = pi[1] * (e.spec.beta_check(1, pi) + e.spec.beta_bar(1, pi));
    CHECK(lead0 == doctest::Approx(0.6));
    CHECK(lead1 == doctest::Approx(1.4));
    // and the assembled quadratic variation is the projected one
    CHECK(gc.terms.printed_qv_diffusion(0, 0) ==
          doctest::Approx(2.0 * pi[0] * (1.0 - pi[0])).epsilon(1e-12));
}

TEST_CASE("generator: second-order tangency and off-manifold guard") {
    const ModelSpec m = curved_model(0.4, 0.0);
    const Vector pi = on_manifold(m, 0.35);
    const GeneratorCoefficients gc = generator_coefficients(m, pi);
    // DR.b = -(1/2) D2R : a on a curved manifold
    CHECK(gc.tangency_defect < 1e-10);
    CHECK(gc.dr_dot_b != 0.0); // curvature makes the raw first-order product nonzero

    const ZooEntry e = zoo_make("neutral_logistic", false);
    Vector off(2);
    off << 0.4, 0.4; // R = 0.2, off the manifold
    CHECK_THROWS_AS((void)generator_coefficients(e.spec, off), QnError);
}

TEST_CASE("jump moment oracle: zero-rate model gives exact zeros") {
    ModelSpec m;
    m.name = "null";
    m.K = 2;
    m.box_lo = Vector::Zero(2);
    m.box_hi = Vector::Constant(2, 2.0);
    for (int i = 0; i < 2; ++i) {
        ClutchRate c;
        c.type_index = i;
        c.offspring = Eigen::VectorXi::Zero(2);
        c.offspring[i] = 1;
        c.rate = NRate(RateExpr::constant(0.0));
        m.clutches.push_back(std::move(c));
        m.deaths.push_back(NRate(RateExpr::constant(0.0)));
    }
    QuasiNeutral qn;
    qn.gamma.assign(2, RateExpr::constant(1.0));
    qn.R = RateExpr::affine(1.0, Vector::Constant(2, -1.0));
    m.quasi_neutral = std::move(qn);
    m.validate();

    Vector pi(2);
    pi << 0.5, 0.5;
    const MomentEstimate est = jump_moment_oracle(m, pi, 100, 50, 0.05);
    CHECK(est.b_hat.cwiseAbs().maxCoeff() == 0.0);
    CHECK(est.a_hat.cwiseAbs().maxCoeff() == 0.0);
    CHECK(est.total_events == 0);
}

TEST_CASE("euler-maruyama diffusion: retraction invariant and reproducibility") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    Vector pi0(2);
    pi0 << 0.4, 0.6;
    const DiffusionPath path = simulate_diffusion(e.spec, pi0, 0.5, 0.01, 99);
    for (const auto& p : path.points) CHECK(std::abs(e.spec.R_at(p)) <= 1e-6);
    const DiffusionPath path2 = simulate_diffusion(e.spec, pi0, 0.5, 0.01, 99);
    CHECK((path.points.back() - path2.points.back()).cwiseAbs().maxCoeff() == 0.0);
    const DiffusionPath path3 = simulate_diffusion(e.spec, pi0, 0.5, 0.01, 100);
    CHECK((path.points.back() - path3.points.back()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("euler-maruyama diffusion: neutral frequency martingale") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    Vector pi0(2);
    pi0 << 0.3, 0.7;
    const int n_paths = 4000;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < n_paths; ++r) {
        DiffusionOptions dopts;
        dopts.stream = static_cast<uint64_t>(r);
        const DiffusionPath path = simulate_diffusion(e.spec, pi0, 0.25, 0.005, 5150, dopts);
        const double pfin = path.points.back()[0] / path.points.back().sum();
        sum += pfin;
        sum2 += pfin * pfin;
    }
    const double mean = sum / n_paths;
    const double var = (sum2 - n_paths * mean * mean) / (n_paths - 1);
    const double se = std::sqrt(var / n_paths);
    CHECK(std::abs(mean - 0.3) <= 3.0 * se);
}

TEST_CASE("pushforward to frequencies") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    SUBCASE("neutral diffusion is p(1-p) and drift vanishes") {
        for (double p1 : {0.2, 0.5, 0.8}) {
            const GeneratorCoefficients gc =
                generator_coefficients(e.spec, on_manifold(e.spec, p1));
            const FrequencyCoefficients fc = pushforward_frequency(e.spec, gc);
            CHECK(fc.drift_p.cwiseAbs().maxCoeff() < 1e-12);
            CHECK(fc.diffusion_p(0, 0) == doctest::Approx(p1 * (1 - p1)).epsilon(1e-10));
            CHECK(fc.n_e == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("equal gamma and equal sigma leave no selection trace in frequencies") {
        ModelSpec m = curved_model(0.3, 0.0);
        const Vector pi = on_manifold(m, 0.4);
        const GeneratorCoefficients gc_plain = generator_coefficients(m, pi);
        m.sigma.assign(2, RateExpr::constant(0.7)); // sigma_1 = sigma_2
        const GeneratorCoefficients gc_sel = generator_coefficients(m, pi);
        const FrequencyCoefficients fc_plain = pushforward_frequency(m, gc_plain);
        const FrequencyCoefficients fc_sel = pushforward_frequency(m, gc_sel);
        CHECK((fc_sel.drift_p - fc_plain.drift_p).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("vertex: the extinct row and column vanish") {
        Vector vertex(2);
        vertex << 1.0, 0.0;
        const GeneratorCoefficients gc = generator_coefficients(e.spec, vertex);
        const FrequencyCoefficients fc = pushforward_frequency(e.spec, gc);
        CHECK(std::abs(fc.diffusion_p(0, 1)) < 1e-14);
        CHECK(std::abs(fc.diffusion_p(1, 1)) < 1e-14);
    }
}

TEST_CASE("oracle agrees with the generator on the neutral model (small run)") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    const Vector pi = on_manifold(e.spec, 0.5);
    const GeneratorCoefficients gc = generator_coefficients(e.spec, pi);
    OracleOptions oo;
    oo.seed = 777;
    oo.threads = 2;
    const MomentEstimate est = jump_moment_oracle(e.spec, pi, 500, 1500, 0.05, oo);
    for (int i = 0; i < 2; ++i) {
        const double z = (est.b_hat[i] - gc.drift[i]) / est.b_se[i];
        CHECK(std::abs(z) <= 4.0);
    }
    for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
            const double z = (est.a_hat(i, j) - gc.diffusion(i, j)) / est.a_se(i, j);
            CHECK(std::abs(z) <= 4.0);
        }
}
