#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "qnpop/errors.hpp"
#include "qnpop/flow.hpp"
#include "qnpop/rng.hpp"
#include "qnpop/zoo.hpp"

using namespace qnpop;

namespace {

double logistic_total(double s0, double t) { return s0 * std::exp(t) / (1.0 - s0 + s0 * std::exp(t)); }

} // namespace

TEST_CASE("drift_F: hand values") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    Vector x(2);
    x << 0.3, 0.7;
    CHECK(drift_F(e.spec, x).cwiseAbs().maxCoeff() < 1e-15); // on the manifold
    x << 0.25, 0.25;
    const Vector f = drift_F(e.spec, x);
    CHECK(f[0] == doctest::Approx(0.125));
    CHECK(f[1] == doctest::Approx(0.125));
    CHECK(drift_F(e.spec, Vector::Zero(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("drift_F: quasi-neutral mismatch surfaces") {
    ZooEntry e = zoo_make("neutral_logistic", false);
    e.spec.quasi_neutral->gamma.assign(2, RateExpr::constant(2.0)); // breaks F = gamma x R
    Vector x(2);
    x << 0.2, 0.3;
    CHECK_THROWS_AS((void)drift_F(e.spec, x), QuasiNeutralMismatch);
}

TEST_CASE("flow: trivial and closed-form checks") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    Vector x0(2);
    x0 << 0.15, 0.15;

    SUBCASE("t = 0 returns the start and the identity") {
        const FlowResult r = flow(e.spec, x0, 0.0, true, FlowDirection::Forward);
        CHECK((r.endpoint - x0).cwiseAbs().maxCoeff() == 0.0);
        CHECK((*r.fundamental - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("logistic closed form and preserved ratio") {
        const FlowResult r = flow(e.spec, x0, 1.0, false, FlowDirection::Forward);
        const double s = logistic_total(0.3, 1.0);
        CHECK(std::abs(r.endpoint.sum() - s) < 1e-8);
        CHECK(std::abs(r.endpoint[0] - r.endpoint[1]) < 1e-10);
        CHECK(r.endpoint[0] == doctest::Approx(s / 2).epsilon(1e-8));
    }
    SUBCASE("backward field is exponential decay for unit gamma") {
        Vector y0(2);
        y0 << 0.5, 0.5;
        const FlowResult r = flow(e.spec, y0, std::log(2.0), false, FlowDirection::Backward);
        CHECK(std::abs(r.endpoint[0] - 0.25) < 1e-10);
        CHECK(std::abs(r.endpoint[1] - 0.25) < 1e-10);
    }
}

TEST_CASE("flow: semigroup and variational chain rule") {
    const ZooEntry e = zoo_make("gause_lotka_volterra_qn", false);
    RngStream rng(12, 0);
    for (int trial = 0; trial < 5; ++trial) {
        Vector x(2);
        x << 0.1 + 0.5 * rng.uniform(), 0.1 + 0.4 * rng.uniform();
        const double s = 0.2 + rng.uniform();
        const double t = 0.2 + rng.uniform();
        const FlowResult rt = flow(e.spec, x, t, true, FlowDirection::Forward);
        const FlowResult rs = flow(e.spec, rt.endpoint, s, true, FlowDirection::Forward);
        const FlowResult rst = flow(e.spec, x, s + t, true, FlowDirection::Forward);
        CHECK((rs.endpoint - rst.endpoint).norm() < 10 * 1e-10 * 10);
        const Matrix chained = (*rs.fundamental) * (*rt.fundamental);
        CHECK((chained - *rst.fundamental).cwiseAbs().maxCoeff() < 100 * 1e-8);
        CHECK(rst.fundamental->determinant() > 0.0);
    }
}

TEST_CASE("flow: fundamental matrix equals flow-map finite differences") {
    for (const char* name : {"neutral_logistic", "gause_lotka_volterra"}) {
        const ZooEntry e = zoo_make(name, false);
        Vector x(2);
        x << 0.3, 0.25;
        const double t = 0.8;
        const FlowResult r = flow(e.spec, x, t, true, FlowDirection::Forward);
        const double h = 1e-5;
        for (int j = 0; j < 2; ++j) {
            Vector xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const Vector col =
                (flow(e.spec, xp, t, false, FlowDirection::Forward).endpoint -
                 flow(e.spec, xm, t, false, FlowDirection::Forward).endpoint) /
                (2 * h);
            CAPTURE(name);
            CHECK((r.fundamental->col(j) - col).norm() / col.norm() < 1e-5);
        }
    }
}

TEST_CASE("flow: backward transversal identity") {
    // the transversal field along its own backward flow is propagated by the
    // variational matrix
    const ZooEntry e = zoo_make("double_monod", false);
    Vector x(2);
    x << 0.25, 0.3;
    for (double t : {0.3, 0.8}) {
        const FlowResult r = flow(e.spec, x, t, true, FlowDirection::Backward);
        const Vector lhs = e.spec.qn_field(r.endpoint);
        const Vector rhs = (*r.fundamental) * e.spec.qn_field(x);
        CHECK((lhs - rhs).norm() / lhs.norm() < 1e-6);
    }
}

TEST_CASE("flow: backward direction requires quasi-neutral structure") {
    const ZooEntry e = zoo_make("gause_lotka_volterra", false); // not quasi-neutral
    Vector x(2);
    x << 0.3, 0.3;
    CHECK_THROWS_AS((void)flow(e.spec, x, 0.5, false, FlowDirection::Backward), QnError);
}

TEST_CASE("jacobian_DF: manifold outer-product structure") {
    const ZooEntry e = zoo_make("neutral_logistic", false);
    Vector xs(2);
    xs << 0.3, 0.7;
    const Matrix df = jacobian_DF(e.spec, xs);
    Matrix expected(2, 2);
    expected << -0.3, -0.3, -0.7, -0.7;
    CHECK((df - expected).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::EigenSolver<Matrix> es(df);
    std::vector<double> evs = {es.eigenvalues()[0].real(), es.eigenvalues()[1].real()};
    std::sort(evs.begin(), evs.end());
    CHECK(evs[0] == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(std::abs(evs[1]) < 1e-12);
}

TEST_CASE("jacobian_DF: finite differences agree with the analytic form") {
    ZooEntry e = zoo_make("gause_lotka_volterra", false);
    Vector x(2);
    x << 0.4, 0.3;
    const Matrix analytic = jacobian_DF(e.spec, x);
    ModelSpec no_jac = e.spec;
    no_jac.drift_jacobian.reset();
    const Matrix fd = jacobian_DF(no_jac, x);
    CHECK((analytic - fd).cwiseAbs().maxCoeff() / analytic.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("check_structure: verdicts on the zoo and a counterexample") {
    RngStream rng(5, 0);
    std::vector<Vector> pts;
    for (int i = 0; i < 12; ++i) {
        Vector x(2);
        x << 0.05 + 0.6 * rng.uniform(), 0.05 + 0.6 * rng.uniform();
        pts.push_back(x);
    }
    SUBCASE("neutral logistic passes") {
        const ZooEntry e = zoo_make("neutral_logistic", false);
        const StructureReport rep = check_structure(e.spec, pts);
        for (const auto& c : rep.conditions) {
            CAPTURE(c.name);
            CAPTURE(c.witness);
            CHECK(c.verdict == "pass");
        }
    }
    SUBCASE("competitive LV passes with the origin a source") {
        const ZooEntry e = zoo_make("gause_lotka_volterra", false);
        const StructureReport rep = check_structure(e.spec, pts);
        CHECK(rep.conditions[0].verdict == "pass");
        CHECK(rep.conditions[2].verdict == "pass");
    }
    SUBCASE("a mutualistic off-diagonal fails competitiveness with a witness") {
        ModelSpec m;
        m.K = 2;
        m.box_lo = Vector::Zero(2);
        m.box_hi = Vector::Constant(2, 2.0);
        for (int i = 0; i < 2; ++i) {
            ClutchRate c;
            c.type_index = i;
            c.offspring = Eigen::VectorXi::Zero(2);
            c.offspring[i] = 1;
            Vector w = Vector::Zero(2);
            w[1 - i] = 3.0; // growth increases in the other type faster than death
            c.rate = NRate(RateExpr::affine(1.0, w));
            m.clutches.push_back(std::move(c));
            m.deaths.push_back(NRate(RateExpr::affine(0.0, Vector::Constant(2, 1.0))));
        }
        m.validate();
        const StructureReport rep = check_structure(m, pts);
        CHECK(rep.conditions[0].verdict == "fail");
        CHECK(!rep.conditions[0].witness.empty());
    }
}
