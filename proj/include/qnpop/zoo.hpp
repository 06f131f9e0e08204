#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qnpop/model.hpp"

#include <nlohmann/json.hpp>

namespace qnpop {

// A closed-form fact about a model, checked on a point grid when the entry is
// registered. defect(x) must stay below tol.
struct KnownFact {
    std::string name;
    double tol;
    std::function<double(const ModelSpec&, const Vector&)> defect;
};

struct ZooEntry {
    std::string name;
    ModelSpec spec;
    std::vector<KnownFact> facts;
    nlohmann::ordered_json params;
};

// Canonical quasi-neutral instance: same-type clutches of size `clutch_size`
// at total per-capita rate b, death rate b * sum(x), optional off-type clutch
// rate theta/N. Closed forms: Omega is the unit simplex, pi(x) = x/sum(x),
// tau(x) = -ln(sum x)/b, lambda = -b on Omega, n_e = 1.
ZooEntry neutral_logistic(int K, double b, double theta, int clutch_size = 1,
                          bool check = true);

// Competitive Gause-Lotka-Volterra family: birth rates b_i, death rates
// d_i + (A x)_i. Quasi-neutral exactly when the rows of A coincide and
// b - d is a constant vector r; then R = 1 - c.x/r and gamma = r with
// closed forms pi(x) = r x/(c.x), tau(x) = -ln(c.x/r)/r, lambda = -r.
ZooEntry gause_lotka_volterra(const Vector& b, const Matrix& A, const Vector& d,
                              bool require_quasi_neutral = false, bool check = true);

// Two consumers on an eliminated quasi-steady resource S(x) = 1 - y(x1+x2):
// birth rates b_i S/(h_i + S), common death rate d. Registration enforces a
// common root S* of both per-capita growth rates (throws NoCommonRoot);
// R = (S - S*)/(1 - S*), gamma_i = (b_i - d)(1 - S*)/(h_i + S).
ZooEntry double_monod(const Vector& b, const Vector& h, double yield, double d,
                      bool check = true);

// registry for CLI addressing
std::vector<std::string> zoo_names();
ZooEntry zoo_make(const std::string& name, bool check = true);
nlohmann::ordered_json zoo_schemas();

// runs every known fact on a deterministic grid; throws on violation
void check_known_facts(const ZooEntry& entry, int grid_points = 50, uint64_t seed = 7);

} // namespace qnpop
