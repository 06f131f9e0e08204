#include "qnpop/zoo.hpp"

#include <cmath>

#include "qnpop/errors.hpp"
#include "qnpop/manifold.hpp"
#include "qnpop/rng.hpp"

namespace qnpop {

namespace {

// deterministic sample points in the basin: random frequencies scaled by a
// random ray factor around the manifold
std::vector<Vector> basin_grid(const ModelSpec& model, int n, uint64_t seed) {
    RngStream rng(seed, 0);
    std::vector<Vector> pts;
    pts.reserve(static_cast<size_t>(n));
    const int K = model.K;
    while (static_cast<int>(pts.size()) < n) {
        Vector p(K);
        double s = 0.0;
        for (int i = 0; i < K; ++i) {
            p[i] = 0.05 + 0.95 * rng.uniform();
            s += p[i];
        }
        p /= s;
        double scale = 1.0;
        if (model.quasi_neutral) scale = effective_density(model, p);
        const double ray = 0.35 + 1.3 * rng.uniform(); // 0.35 .. 1.65 of the manifold radius
        Vector x = (scale * ray) * p;
        if (model.in_box(x)) pts.push_back(std::move(x));
    }
    return pts;
}

} // namespace

void check_known_facts(const ZooEntry& entry, int grid_points, uint64_t seed) {
    const auto pts = basin_grid(entry.spec, grid_points, seed);
    for (const auto& fact : entry.facts)
        for (const auto& x : pts) {
            const double d = fact.defect(entry.spec, x);
            if (!(d <= fact.tol))
                throw QnError("zoo '" + entry.name + "': fact '" + fact.name +
                              "' violated, defect " + std::to_string(d) + " > tol " +
                              std::to_string(fact.tol));
        }
}

ZooEntry neutral_logistic(int K, double b, double theta, int clutch_size, bool check) {
    if (!(b > 0.0) || theta < 0.0 || clutch_size < 1 || K < 1)
        throw QnError("neutral_logistic: need b > 0, theta >= 0, clutch_size >= 1");
    ModelSpec m;
    m.name = "neutral_logistic";
    m.K = K;
    m.box_lo = Vector::Zero(K);
    m.box_hi = Vector::Constant(K, 3.0);

    for (int i = 0; i < K; ++i) {
        ClutchRate c;
        c.type_index = i;
        c.offspring = Eigen::VectorXi::Zero(K);
        c.offspring[i] = clutch_size;
        c.rate = NRate(RateExpr::constant(b / clutch_size));
        m.clutches.push_back(std::move(c));
    }
    if (theta > 0.0) {
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j) {
                if (i == j) continue;
                ClutchRate c;
                c.type_index = i;
                c.offspring = Eigen::VectorXi::Zero(K);
                c.offspring[j] = 1;
                c.rate = NRate(RateExpr::constant(0.0), RateExpr::constant(theta), 1.0);
                m.clutches.push_back(std::move(c));
            }
        m.theta.assign(static_cast<size_t>(K), std::vector<RateExpr>(static_cast<size_t>(K)));
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
                m.theta[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    RateExpr::constant(i == j ? 0.0 : theta / b);
        // the off-type clutches add reproductive output at order 1/N
        m.sigma.assign(static_cast<size_t>(K),
                       RateExpr::constant(static_cast<double>(K - 1) * theta));
    }
    for (int i = 0; i < K; ++i)
        m.deaths.push_back(NRate(RateExpr::affine(0.0, Vector::Constant(K, b))));

    QuasiNeutral qn;
    qn.gamma.assign(static_cast<size_t>(K), RateExpr::constant(b));
    qn.R = RateExpr::affine(1.0, Vector::Constant(K, -1.0));
    m.quasi_neutral = std::move(qn);

    // DF_ij = b [ (1 - sum x) delta_ij - x_i ]
    m.drift_jacobian = [K, b](const Vector& x) {
        Matrix j = Matrix::Constant(K, K, 0.0);
        const double r = 1.0 - x.sum();
        for (int i = 0; i < K; ++i) {
            for (int k = 0; k < K; ++k) j(i, k) = -b * x[i];
            j(i, i) += b * r;
        }
        return j;
    };
    m.validate();

    ZooEntry e;
    e.name = "neutral_logistic";
    e.spec = std::move(m);
    e.params = {{"K", K}, {"b", b}, {"theta", theta}, {"clutch_size", clutch_size}};

    const double bb = b;
    e.facts.push_back({"pi(x) = x/sum(x)", 1e-8, [](const ModelSpec& mm, const Vector& x) {
                           ProjectOptions po;
                           po.verify_pitau = false;
                           const Vector pi = project_and_time(mm, x, po).pi;
                           return (pi - Vector(x / x.sum())).norm();
                       }});
    e.facts.push_back({"tau(x) = -ln(sum x)/b", 1e-6, [bb](const ModelSpec& mm, const Vector& x) {
                           ProjectOptions po;
                           po.verify_pitau = false;
                           const double tau = project_and_time(mm, x, po).tau;
                           return std::abs(tau - (-std::log(x.sum()) / bb));
                       }});
    e.facts.push_back({"lambda = -b on Omega", 1e-10, [bb](const ModelSpec& mm, const Vector& x) {
                           const Vector pi = x / x.sum();
                           return std::abs(lambda_at(mm, pi) + bb);
                       }});
    e.facts.push_back({"n_e = 1", 1e-12, [](const ModelSpec& mm, const Vector& x) {
                           const Vector p = x / x.sum();
                           return std::abs(effective_density(mm, p) - 1.0);
                       }});
    if (check) check_known_facts(e);
    return e;
}

ZooEntry gause_lotka_volterra(const Vector& b, const Matrix& A, const Vector& d,
                              bool require_quasi_neutral, bool check) {
    const int K = static_cast<int>(b.size());
    if (A.rows() != K || A.cols() != K || d.size() != K)
        throw QnError("gause_lotka_volterra: dimension mismatch");
    if (A.minCoeff() < 0.0) throw QnError("gause_lotka_volterra: A must be entrywise >= 0");
    for (int i = 0; i < K; ++i)
        if (!(A(i, i) > 0.0)) throw QnError("gause_lotka_volterra: A must have positive diagonal");
    for (int i = 0; i < K; ++i)
        if (!(b[i] > d[i])) throw QnError("gause_lotka_volterra: need b > d componentwise");

    ModelSpec m;
    m.name = "gause_lotka_volterra";
    m.K = K;
    m.box_lo = Vector::Zero(K);
    Vector hi(K);
    for (int i = 0; i < K; ++i) hi[i] = 3.0 * (b[i] - d[i]) / A(i, i);
    m.box_hi = hi;

    for (int i = 0; i < K; ++i) {
        ClutchRate c;
        c.type_index = i;
        c.offspring = Eigen::VectorXi::Zero(K);
        c.offspring[i] = 1;
        c.rate = NRate(RateExpr::constant(b[i]));
        m.clutches.push_back(std::move(c));
        m.deaths.push_back(NRate(RateExpr::affine(d[i], A.row(i).transpose())));
    }

    // quasi-neutral iff the per-capita growth factors through one scalar:
    // equal rows of A and constant b - d
    bool qn_ok = true;
    const double r = b[0] - d[0];
    for (int i = 1; i < K && qn_ok; ++i) qn_ok = std::abs((b[i] - d[i]) - r) <= 1e-12;
    for (int i = 1; i < K && qn_ok; ++i)
        for (int j = 0; j < K; ++j) qn_ok = qn_ok && std::abs(A(i, j) - A(0, j)) <= 1e-12;
    if (require_quasi_neutral && !qn_ok)
        throw QuasiNeutralMismatch(
            "gause_lotka_volterra: growth does not factor as gamma_i(x) x_i R(x) "
            "(needs equal rows of A and constant b - d)");
    if (qn_ok) {
        QuasiNeutral qn;
        qn.gamma.assign(static_cast<size_t>(K), RateExpr::constant(r));
        qn.R = RateExpr::affine(1.0, Vector(-A.row(0).transpose() / r));
        m.quasi_neutral = std::move(qn);
    }

    const Matrix a_copy = A;
    const Vector b_copy = b, d_copy = d;
    m.drift_jacobian = [K, a_copy, b_copy, d_copy](const Vector& x) {
        Matrix j(K, K);
        const Vector ax = a_copy * x;
        for (int i = 0; i < K; ++i) {
            for (int k = 0; k < K; ++k) j(i, k) = -a_copy(i, k) * x[i];
            j(i, i) += b_copy[i] - d_copy[i] - ax[i];
        }
        return j;
    };
    m.validate();

    ZooEntry e;
    e.name = "gause_lotka_volterra";
    e.spec = std::move(m);
    std::vector<double> bvec(b.data(), b.data() + K), dvec(d.data(), d.data() + K);
    std::vector<std::vector<double>> amat;
    for (int i = 0; i < K; ++i)
        amat.emplace_back(A.row(i).data(), A.row(i).data() + K);
    e.params = {{"b", bvec}, {"A", amat}, {"d", dvec}, {"quasi_neutral", qn_ok}};

    // competitiveness is structural: d_j(growth_i) = -A_ij <= 0
    const Matrix a_fact = A;
    e.facts.push_back({"off-diagonal growth partials <= 0", 1e-12,
                       [a_fact](const ModelSpec&, const Vector&) {
                           // d_j(growth_i) = -A_ij; the defect is any positive excess
                           double worst = 0.0;
                           for (int i = 0; i < a_fact.rows(); ++i)
                               for (int j = 0; j < a_fact.cols(); ++j)
                                   if (i != j) worst = std::max(worst, -a_fact(i, j));
                           return std::max(0.0, worst);
                       }});
    if (qn_ok) {
        const Vector c_row = A.row(0).transpose();
        const double rr = r;
        e.facts.push_back({"pi(x) = r x/(c.x)", 1e-8,
                           [c_row, rr](const ModelSpec& mm, const Vector& x) {
                               ProjectOptions po;
                               po.verify_pitau = false;
                               const Vector pi = project_and_time(mm, x, po).pi;
                               return (pi - Vector(rr * x / c_row.dot(x))).norm();
                           }});
        e.facts.push_back({"tau(x) = -ln(c.x/r)/r", 1e-6,
                           [c_row, rr](const ModelSpec& mm, const Vector& x) {
                               ProjectOptions po;
                               po.verify_pitau = false;
                               const double tau = project_and_time(mm, x, po).tau;
                               return std::abs(tau + std::log(c_row.dot(x) / rr) / rr);
                           }});
        e.facts.push_back({"lambda = -r on Omega", 1e-9,
                           [c_row, rr](const ModelSpec& mm, const Vector& x) {
                               const Vector pi = rr * x / c_row.dot(x);
                               return std::abs(lambda_at(mm, pi) + rr);
                           }});
    }
    if (check) check_known_facts(e);
    return e;
}

ZooEntry double_monod(const Vector& b, const Vector& h, double yield, double d, bool check) {
    if (b.size() != 2 || h.size() != 2) throw QnError("double_monod: two consumer types");
    if (!(yield > 0.0) || !(d > 0.0)) throw QnError("double_monod: need yield > 0, d > 0");
    for (int i = 0; i < 2; ++i)
        if (!(b[i] > d)) throw QnError("double_monod: need b_i > d");

    // common break-even resource level: b_i S*/(h_i + S*) = d
    const double s1 = d * h[0] / (b[0] - d);
    const double s2 = d * h[1] / (b[1] - d);
    if (std::abs(s1 - s2) > 1e-10)
        throw NoCommonRoot("double_monod: per-capita growth rates have different break-even "
                           "resource levels (" + std::to_string(s1) + " vs " + std::to_string(s2) + ")");
    const double s_star = 0.5 * (s1 + s2);
    if (!(s_star > 0.0) || !(s_star < 1.0))
        throw NoCommonRoot("double_monod: break-even resource level outside (0, 1)");

    const int K = 2;
    ModelSpec m;
    m.name = "double_monod";
    m.K = K;
    m.box_lo = Vector::Zero(K);
    m.box_hi = Vector::Constant(K, 1.0 / yield); // S >= 0
    const Vector sw = Vector::Constant(K, -yield);

    for (int i = 0; i < K; ++i) {
        ClutchRate c;
        c.type_index = i;
        c.offspring = Eigen::VectorXi::Zero(K);
        c.offspring[i] = 1;
        c.rate = NRate(RateExpr::monod_uptake(b[i], h[i], 1.0, sw));
        m.clutches.push_back(std::move(c));
        m.deaths.push_back(NRate(RateExpr::constant(d)));
    }

    QuasiNeutral qn;
    for (int i = 0; i < K; ++i)
        qn.gamma.push_back(RateExpr::monod_recip((b[i] - d) * (1.0 - s_star), h[i], 1.0, sw));
    qn.R = RateExpr::affine(1.0, Vector(sw / (1.0 - s_star)));
    m.quasi_neutral = std::move(qn);
    m.validate();

    ZooEntry e;
    e.name = "double_monod";
    e.spec = std::move(m);
    e.params = {{"b", std::vector<double>{b[0], b[1]}},
                {"h", std::vector<double>{h[0], h[1]}},
                {"yield", yield},
                {"d", d},
                {"S_star", s_star}};

    const double total_on_omega = (1.0 - s_star) / yield;
    e.facts.push_back({"Omega = {sum x = (1-S*)/yield}", 1e-8,
                       [total_on_omega](const ModelSpec& mm, const Vector& x) {
                           ProjectOptions po;
                           po.verify_pitau = false;
                           const Vector pi = project_and_time(mm, x, po).pi;
                           return std::abs(pi.sum() - total_on_omega);
                       }});
    e.facts.push_back({"lambda < 0 on Omega", 0.0, [](const ModelSpec& mm, const Vector& x) {
                           ProjectOptions po;
                           po.verify_pitau = false;
                           const Vector pi = project_and_time(mm, x, po).pi;
                           return std::max(0.0, lambda_at(mm, pi) + 1e-6);
                       }});
    e.facts.push_back({"F = gamma_i x_i R", 1e-10, [](const ModelSpec& mm, const Vector& x) {
                           const Vector f = mm.drift(x);
                           const Vector alt = mm.qn_field(x) * mm.R_at(x);
                           return (f - alt).norm() / std::max(1.0, f.norm());
                       }});
    if (check) check_known_facts(e);
    return e;
}

std::vector<std::string> zoo_names() {
    return {"neutral_logistic", "neutral_logistic_mut", "neutral_logistic_clutch2",
            "gause_lotka_volterra", "gause_lotka_volterra_qn", "double_monod"};
}

ZooEntry zoo_make(const std::string& name, bool check) {
    if (name == "neutral_logistic") return neutral_logistic(2, 1.0, 0.0, 1, check);
    if (name == "neutral_logistic_mut") return neutral_logistic(2, 1.0, 1.0, 1, check);
    if (name == "neutral_logistic_clutch2") return neutral_logistic(2, 1.0, 0.0, 2, check);
    if (name == "gause_lotka_volterra") {
        Vector b(2), d(2);
        b << 2.0, 1.8;
        d << 0.5, 0.4;
        Matrix A(2, 2);
        A << 1.0, 0.6, 0.7, 1.2;
        return gause_lotka_volterra(b, A, d, false, check);
    }
    if (name == "gause_lotka_volterra_qn") {
        // asymmetric interactions, still quasi-neutral (equal rows)
        Vector b(2), d(2);
        b << 2.0, 2.0;
        d << 1.0, 1.0;
        Matrix A(2, 2);
        A << 1.0, 1.5, 1.0, 1.5;
        return gause_lotka_volterra(b, A, d, true, check);
    }
    if (name == "double_monod") {
        // common break-even level S* = 0.25: b1 = 2, h1 = 0.25 and b2 = 3, h2 = 0.5
        Vector b(2), h(2);
        b << 2.0, 3.0;
        h << 0.25, 0.5;
        return double_monod(b, h, 1.0, 1.0, check);
    }
    throw QnError("zoo: unknown model '" + name + "'");
}

nlohmann::ordered_json zoo_schemas() {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    j.push_back({{"family", "neutral_logistic"},
                 {"parameters", {{"K", "int >= 1"}, {"b", "double > 0"}, {"theta", "double >= 0"},
                                 {"clutch_size", "int >= 1"}}},
                 {"presets", {"neutral_logistic", "neutral_logistic_mut", "neutral_logistic_clutch2"}}});
    j.push_back({{"family", "gause_lotka_volterra"},
                 {"parameters", {{"b", "K-vector, b > d"}, {"A", "K x K, entries >= 0, diag > 0"},
                                 {"d", "K-vector"}}},
                 {"presets", {"gause_lotka_volterra", "gause_lotka_volterra_qn"}}});
    j.push_back({{"family", "double_monod"},
                 {"parameters", {{"b", "2-vector, b > d"}, {"h", "2-vector half-saturations"},
                                 {"yield", "double > 0"}, {"d", "double > 0"}}},
                 {"constraint", "b_i S*/(h_i + S*) = d for a common S* in (0,1)"},
                 {"presets", {"double_monod"}}});
    return j;
}

} // namespace qnpop
