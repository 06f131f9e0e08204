#include <doctest.h>

#include <cmath>

#include "qnpop/errors.hpp"
#include "qnpop/manifold.hpp"
#include "qnpop/rng.hpp"
#include "qnpop/zoo.hpp"

using namespace qnpop;

TEST_CASE("registration runs every known fact") {
    for (const auto& name : zoo_names()) {
        CAPTURE(name);
        CHECK_NOTHROW((void)zoo_make(name, true));
    }
}

TEST_CASE("neutral logistic: b = 2 doubles lambda and halves tau") {
    const ZooEntry e1 = neutral_logistic(2, 1.0, 0.0, 1, false);
    const ZooEntry e2 = neutral_logistic(2, 2.0, 0.0, 1, false);
    Vector x(2);
    x << 0.2, 0.2;
    CHECK(lambda_at(e2.spec, x) == doctest::Approx(2.0 * lambda_at(e1.spec, x)).epsilon(1e-12));
    ProjectOptions po;
    po.verify_pitau = false;
    const double tau1 = project_and_time(e1.spec, x, po).tau;
    const double tau2 = project_and_time(e2.spec, x, po).tau;
    CHECK(tau2 == doctest::Approx(0.5 * tau1).epsilon(1e-6));
    CHECK_NOTHROW(check_known_facts(e2));
}

TEST_CASE("neutral logistic: clutch size changes the second moment only") {
    const ZooEntry e1 = zoo_make("neutral_logistic", false);
    const ZooEntry e2 = zoo_make("neutral_logistic_clutch2", false);
    Vector x(2);
    x << 0.4, 0.3;
    CHECK(e1.spec.beta_bar(0, x) == doctest::Approx(e2.spec.beta_bar(0, x)));
    CHECK(e1.spec.beta_check(0, x) == doctest::Approx(1.0));
    CHECK(e2.spec.beta_check(0, x) == doctest::Approx(2.0));
    CHECK((e1.spec.drift(x) - e2.spec.drift(x)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("lotka-volterra: equal rows reduce to the neutral logistic") {
    Vector b(2), d(2);
    b << 1.0, 1.0;
    d << 0.0, 0.0;
    Matrix A(2, 2);
    A << 1.0, 1.0, 1.0, 1.0;
    const ZooEntry lv = gause_lotka_volterra(b, A, d, true, false);
    const ZooEntry nl = zoo_make("neutral_logistic", false);
    RngStream rng(3, 0);
    for (int trial = 0; trial < 40; ++trial) {
        Vector x(2);
        x << rng.uniform(), rng.uniform();
        CHECK((lv.spec.drift(x) - nl.spec.drift(x)).cwiseAbs().maxCoeff() < 1e-14);
        for (int i = 0; i < 2; ++i) {
            CHECK(std::abs(lv.spec.beta_bar(i, x) - nl.spec.beta_bar(i, x)) < 1e-14);
            CHECK(std::abs(lv.spec.death(i, x) - nl.spec.death(i, x)) < 1e-14);
        }
    }
}

TEST_CASE("lotka-volterra: preconditions are enforced") {
    Vector b(2), d(2);
    b << 1.0, 1.0;
    d << 0.2, 0.2;
    Matrix A(2, 2);
    A << 1.0, -0.1, 0.3, 1.0; // negative entry
    CHECK_THROWS_AS((void)gause_lotka_volterra(b, A, d, false, false), QnError);

    Matrix A2(2, 2);
    A2 << 1.0, 0.5, 0.3, 1.0; // rows differ: not quasi-neutral
    CHECK_THROWS_AS((void)gause_lotka_volterra(b, A2, d, true, false), QuasiNeutralMismatch);
    const ZooEntry e = gause_lotka_volterra(b, A2, d, false, false);
    CHECK_FALSE(e.spec.quasi_neutral.has_value());
}

TEST_CASE("double monod: common-root constraint") {
    Vector b(2), h(2);
    b << 2.0, 3.0;
    h << 0.25, 0.5;
    CHECK_NOTHROW((void)double_monod(b, h, 1.0, 1.0, false));

    Vector b_bad = b;
    b_bad[1] *= 1.01; // perturb one percent: break-even levels no longer meet
    CHECK_THROWS_AS((void)double_monod(b_bad, h, 1.0, 1.0, false), NoCommonRoot);
}

TEST_CASE("double monod: symmetric parameters give identical types") {
    Vector b(2), h(2);
    b << 2.0, 2.0;
    h << 0.25, 0.25;
    const ZooEntry e = double_monod(b, h, 1.0, 1.0, false);
    Vector x(2);
    x << 0.3, 0.2;
    const auto& gam = e.spec.quasi_neutral->gamma;
    CHECK(gam[0](x) == doctest::Approx(gam[1](x)).epsilon(1e-14));
    CHECK(e.spec.beta_bar(0, x) == doctest::Approx(e.spec.beta_bar(1, x)).epsilon(1e-14));
}

TEST_CASE("double monod: asymmetric pair has negative lambda on the manifold") {
    const ZooEntry e = zoo_make("double_monod", false);
    for (double p1 : {0.2, 0.5, 0.8}) {
        Vector p(2);
        p << p1, 1.0 - p1;
        const Vector xs = effective_density(e.spec, p) * p;
        CHECK(lambda_at(e.spec, xs, true) < 0.0);
    }
}
