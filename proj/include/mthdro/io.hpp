#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mthdro/core.hpp"
#include "mthdro/drccp.hpp"
#include "mthdro/experiment.hpp"
#include "mthdro/oracle.hpp"
#include "mthdro/program.hpp"
#include "mthdro/uq.hpp"

namespace mthdro::io {

using Json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "mthdro/1";

/// Command-line overrides of the problem file.
struct Overrides {
    std::optional<int> p;
    std::optional<std::vector<Norm>> norms;
    std::optional<std::vector<double>> budgets;
    std::size_t cap = kDefaultExpansionCap;
};

Json parse_file(const std::string& path);

/// Readers raise SchemaViolation with the JSON pointer of the offending value.
Vector read_vector(const Json& j, const std::string& path, int size = -1);
Matrix read_matrix(const Json& j, const std::string& path, int cols = -1);
DiscreteDistribution read_distribution(const Json& j, const std::string& path);
ComponentStructure read_structure(const Json& j, const std::string& path, const Overrides& o = {});
Polyhedron read_polyhedron(const Json& j, const std::string& path, int d);
PwaFunction read_pwa(const Json& j, const std::string& path, int d);
QuadraticFunction read_quadratic(const Json& j, const std::string& path, int d);
GridSpec read_grid(const Json& j, const std::string& path, int d);

/// "reference", "structure", "budgets" of a problem document.
MthSpec read_mth(const Json& doc, const Overrides& o = {});
/// "support", or the whole space when absent.
Polyhedron read_support(const Json& doc, int d);
PolyUnion read_union(const Json& doc, int d);
OpenPolyUnion read_open_union(const Json& doc, int d);
DrccpProblem read_drccp(const Json& doc, int d);
ExperimentConfig read_experiment_config(const Json& doc, ExperimentConfig base = {});

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Json to_json(const DiscreteDistribution& d);
Json to_json(const ProgramDimensions& dims);
Json to_json(const ExperimentConfig& config);
Json variables_json(const Solution& sol);

/// Samples as rows of a comma-separated file; blank lines and '#' comments skipped.
Matrix read_csv_matrix(const std::string& path);

}  // namespace mthdro::io
