#include "qnpop/io.hpp"

#include <cstdio>
#include <fstream>

#include "qnpop/errors.hpp"

namespace qnpop {

std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json vector_to_json(const Vector& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json matrix_to_json_rowmajor(const Matrix& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    return a;
}

void write_text(const std::string& file, const std::string& content) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw QnError("cannot open for writing: " + file);
    out << content;
}

void write_path_jsonl(const std::string& file, const ModelSpec& model,
                      const PopulationPath& path, uint64_t seed) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw QnError("cannot open for writing: " + file);
    json meta = {{"meta",
                  {{"model", model.name},
                   {"N", path.initial.system_size},
                   {"seed", seed},
                   {"absorbed", path.absorbed},
                   {"escaped", path.escaped},
                   {"rounded_x0", path.rounded_x0},
                   {"n_events", path.n_events},
                   {"version", kArtifactVersion}}}};
    out << meta.dump() << "\n";
    for (const auto& s : path.snapshots) {
        json rec = {{"t", s.t}, {"x", vector_to_json(s.x)}};
        out << rec.dump() << "\n";
    }
}

void write_events_csv(const std::string& file, const ModelSpec& model,
                      const PopulationPath& path) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw QnError("cannot open for writing: " + file);
    out << "time,kind,type,clutch\n";
    const int nc = static_cast<int>(model.clutches.size());
    for (const auto& e : path.events) {
        out << csv_double(e.time) << ",";
        if (e.channel < nc) {
            const auto& cl = model.clutches[static_cast<size_t>(e.channel)];
            std::string clutch;
            for (int j = 0; j < model.K; ++j) {
                if (j) clutch += ";";
                clutch += std::to_string(cl.offspring[j]);
            }
            out << "birth," << cl.type_index << "," << clutch << "\n";
        } else {
            out << "death," << (e.channel - nc) << ",\n";
        }
    }
}

void write_flow_trace_csv(const std::string& file, const std::vector<double>& ts,
                          const std::vector<Vector>& xs) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw QnError("cannot open for writing: " + file);
    out << "t";
    const int K = xs.empty() ? 0 : static_cast<int>(xs.front().size());
    for (int i = 1; i <= K; ++i) out << ",x" << i;
    out << "\n";
    for (size_t r = 0; r < ts.size(); ++r) {
        out << csv_double(ts[r]);
        for (int i = 0; i < K; ++i) out << "," << csv_double(xs[r][i]);
        out << "\n";
    }
}

void write_diffusion_jsonl(const std::string& file, const DiffusionPath& path) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw QnError("cannot open for writing: " + file);
    json meta = {{"meta",
                  {{"seed", path.seed},
                   {"absorptions", json::array()},
                   {"version", kArtifactVersion}}}};
    for (const auto& [t, i] : path.absorptions)
        meta["meta"]["absorptions"].push_back({{"t", t}, {"type", i}});
    out << meta.dump() << "\n";
    for (size_t k = 0; k < path.times.size(); ++k) {
        json rec = {{"t", path.times[k]}, {"p", vector_to_json(path.points[k])}};
        out << rec.dump() << "\n";
    }
}

json chart_to_json(const ManifoldChart& chart) {
    json j = {{"x", vector_to_json(chart.x)},
              {"pi", vector_to_json(chart.pi)},
              {"tau", chart.tau},
              {"lambda", chart.lambda_at_pi},
              {"n_e", chart.n_e},
              {"dpi", matrix_to_json_rowmajor(chart.dpi)},
              {"dtau", vector_to_json(chart.dtau)},
              {"residuals",
               {{"R_at_pi", chart.r_at_pi},
                {"pitau", chart.pitau_defect},
                {"dr_dpi", chart.dr_dpi_defect},
                {"dpi_F_rel", chart.dpi_f_defect},
                {"dtau_F_plus_R", chart.dtau_f_defect}}}};
    if (chart.d2pi) {
        json d2 = json::array();
        for (const auto& m : *chart.d2pi) d2.push_back(matrix_to_json_rowmajor(m));
        j["d2pi"] = d2;
    }
    return j;
}

json coefficients_to_json(const GeneratorCoefficients& gc) {
    json j = {{"point", vector_to_json(gc.point)},
              {"lambda", gc.lambda},
              {"drift", vector_to_json(gc.drift)},
              {"diffusion", matrix_to_json_rowmajor(gc.diffusion)},
              {"terms",
               {{"mutation_direct", vector_to_json(gc.terms.mutation_direct)},
                {"mutation_projection", vector_to_json(gc.terms.mutation_projection)},
                {"selection_direct", vector_to_json(gc.terms.selection_direct)},
                {"selection_projection", vector_to_json(gc.terms.selection_projection)},
                {"qv_drift", vector_to_json(gc.terms.qv_drift)},
                {"qv_diffusion", matrix_to_json_rowmajor(gc.terms.qv_diffusion)}}},
              {"printed_scale",
               {{"mutation_direct", vector_to_json(gc.terms.printed_mutation_direct)},
                {"mutation_projection", vector_to_json(gc.terms.printed_mutation_projection)},
                {"selection", vector_to_json(gc.terms.printed_selection)},
                {"qv_drift", vector_to_json(gc.terms.printed_qv_drift)},
                {"qv_diffusion", matrix_to_json_rowmajor(gc.terms.printed_qv_diffusion)}}},
              {"tangency", {{"dr_dot_b", gc.dr_dot_b}, {"dr_a_dr", gc.dr_a_dr},
                            {"second_order_defect", gc.tangency_defect}}},
              {"notes", gc.notes}};
    return j;
}

json structure_to_json(const StructureReport& rep) {
    json conds = json::array();
    for (const auto& c : rep.conditions)
        conds.push_back({{"name", c.name}, {"verdict", c.verdict}, {"witness", c.witness}});
    return {{"conditions", conds}, {"all_pass", rep.all_pass}};
}

json assumptions_to_json(const AssumptionReport& rep) {
    auto chk = [](const AssumptionCheck& c) {
        json j = {{"name", c.name},
                  {"pass", c.pass},
                  {"worst_value", c.worst_value},
                  {"worst_point", c.worst_point}};
        if (std::isfinite(c.fitted_exponent)) j["fitted_exponent"] = c.fitted_exponent;
        if (!c.classification.empty()) j["classification"] = c.classification;
        if (!c.note.empty()) j["note"] = c.note;
        return j;
    };
    return {{"A1", chk(rep.a1)}, {"A2", chk(rep.a2)}, {"A3", chk(rep.a3)}, {"A4", chk(rep.a4)},
            {"N_list", rep.n_list}};
}

namespace {

json rate_expr_to_json(const RateExpr& e) {
    switch (e.kind()) {
        case RateExpr::Kind::Constant: return {{"kind", "constant"}, {"c", e.c0()}};
        case RateExpr::Kind::Affine: {
            json w = json::array();
            for (int i = 0; i < e.w().size(); ++i) w.push_back(e.w()[i]);
            return {{"kind", "affine"}, {"c", e.c0()}, {"w", w}};
        }
        case RateExpr::Kind::MonodUptake:
        case RateExpr::Kind::MonodRecip: {
            json w = json::array();
            for (int i = 0; i < e.w().size(); ++i) w.push_back(e.w()[i]);
            return {{"kind", e.kind() == RateExpr::Kind::MonodUptake ? "monod_uptake" : "monod_recip"},
                    {"num", e.num()}, {"half", e.half()}, {"s0", e.c0()}, {"sw", w}};
        }
        case RateExpr::Kind::Custom:
            throw QnError("custom rate expressions are not serializable");
    }
    return {};
}

RateExpr rate_expr_from_json(const json& j) {
    const std::string kind = j.at("kind");
    auto vec = [](const json& a) {
        Vector v(a.size());
        for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
        return v;
    };
    if (kind == "constant") return RateExpr::constant(j.at("c"));
    if (kind == "affine") return RateExpr::affine(j.at("c"), vec(j.at("w")));
    if (kind == "monod_uptake")
        return RateExpr::monod_uptake(j.at("num"), j.at("half"), j.at("s0"), vec(j.at("sw")));
    if (kind == "monod_recip")
        return RateExpr::monod_recip(j.at("num"), j.at("half"), j.at("s0"), vec(j.at("sw")));
    throw QnError("unknown rate expression kind: " + kind);
}

json nrate_to_json(const NRate& r) {
    json j = {{"limit", rate_expr_to_json(r.limit_expr())}};
    if (r.has_correction()) j["note"] = "finite-N correction present (not round-tripped)";
    return j;
}

} // namespace

json model_to_json(const ModelSpec& model) {
    json j = {{"name", model.name}, {"K", model.K}};
    json clutches = json::array();
    for (const auto& c : model.clutches) {
        json off = json::array();
        for (int i = 0; i < model.K; ++i) off.push_back(c.offspring[i]);
        clutches.push_back({{"type", c.type_index}, {"offspring", off},
                            {"rate", nrate_to_json(c.rate)}});
    }
    j["clutches"] = clutches;
    json deaths = json::array();
    for (const auto& d : model.deaths) deaths.push_back(nrate_to_json(d));
    j["deaths"] = deaths;
    j["box_lo"] = vector_to_json(model.box_lo);
    j["box_hi"] = vector_to_json(model.box_hi);
    if (model.quasi_neutral) {
        json gam = json::array();
        for (const auto& g : model.quasi_neutral->gamma) gam.push_back(rate_expr_to_json(g));
        j["quasi_neutral"] = {{"gamma", gam}, {"R", rate_expr_to_json(model.quasi_neutral->R)}};
    }
    return j;
}

ModelSpec model_from_json(const json& j) {
    ModelSpec m;
    m.name = j.value("name", "inline");
    m.K = j.at("K");
    auto vec = [](const json& a) {
        Vector v(a.size());
        for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
        return v;
    };
    for (const auto& c : j.at("clutches")) {
        ClutchRate cr;
        cr.type_index = c.at("type");
        const auto& off = c.at("offspring");
        cr.offspring = Eigen::VectorXi(off.size());
        for (size_t i = 0; i < off.size(); ++i) cr.offspring[static_cast<Eigen::Index>(i)] = off[i];
        cr.rate = NRate(rate_expr_from_json(c.at("rate").at("limit")));
        m.clutches.push_back(std::move(cr));
    }
    for (const auto& d : j.at("deaths")) m.deaths.push_back(NRate(rate_expr_from_json(d.at("limit"))));
    m.box_lo = vec(j.at("box_lo"));
    m.box_hi = vec(j.at("box_hi"));
    if (j.contains("quasi_neutral")) {
        QuasiNeutral qn;
        for (const auto& g : j.at("quasi_neutral").at("gamma"))
            qn.gamma.push_back(rate_expr_from_json(g));
        qn.R = rate_expr_from_json(j.at("quasi_neutral").at("R"));
        m.quasi_neutral = std::move(qn);
    }
    m.validate();
    return m;
}

} // namespace qnpop
