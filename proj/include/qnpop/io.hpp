#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnpop/diffusion.hpp"
#include "qnpop/flow.hpp"
#include "qnpop/manifold.hpp"
#include "qnpop/simulate.hpp"

namespace qnpop {

using json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "qnpop/0.1.0";

// fixed-format float for byte-stable CSV output
std::string csv_double(double v);

json vector_to_json(const Vector& v);
json matrix_to_json_rowmajor(const Matrix& m);

// JSONL path export: a metadata record first, then one record per snapshot
// {"t": ..., "x": [...]}.
void write_path_jsonl(const std::string& file, const ModelSpec& model,
                      const PopulationPath& path, uint64_t seed);
// event log as CSV time,kind,type,clutch
void write_events_csv(const std::string& file, const ModelSpec& model,
                      const PopulationPath& path);
// flow trace as CSV t,x1..xK
void write_flow_trace_csv(const std::string& file, const std::vector<double>& ts,
                          const std::vector<Vector>& xs);
void write_diffusion_jsonl(const std::string& file, const DiffusionPath& path);

json chart_to_json(const ManifoldChart& chart);
json coefficients_to_json(const GeneratorCoefficients& gc);
json structure_to_json(const StructureReport& rep);
json assumptions_to_json(const AssumptionReport& rep);

void write_text(const std::string& file, const std::string& content);

// inline model (de)serialization for CLI "@file.json" model specs; Custom rate
// expressions are not serializable
json model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const json& j);

} // namespace qnpop
