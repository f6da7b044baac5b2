#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "mthdro/io.hpp"
#include "mthdro/reformulate.hpp"
#include "mthdro/uq.hpp"
#include "support/test_support.hpp"

using namespace mthdro;
using io::Json;

namespace {

namespace fs = std::filesystem;

const fs::path& scratch() {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / ("mthdro_test_io_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << text;
    return p.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(MTHDRO_CLI) + " " + args + " 2>" + (scratch() / "stderr.txt").string();
    if (args.find("--out") == std::string::npos) cmd += " >" + (scratch() / "stdout.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string schema_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation) << e.what();
        return e.what();
    }
    ADD_FAILURE() << "expected SchemaViolation";
    return {};
}

const char* kDispatch = R"({
  "structure": {"dims": [1, 1], "norms": ["L1", "L1"], "p": 1},
  "budgets": [0.2, 0.3],
  "support": {"C": [[1, 0], [-1, 0], [0, 1], [0, -1]], "f": [40, 0, 30, 0]},
  "problem": {
    "g": [1],
    "X": {"C": [[-1]], "f": [0]},
    "constraints": [{"alpha": 0.2, "pieces": [{"xi_slope": [-1, 1], "x_slope": [-1], "offset": 4.5}]}]
  }
})";

}  // namespace

TEST(Io, ReadsDistributionsAndStructures) {
    const Json doc = Json::parse(R"({"reference": {"atoms": [[0, 1], [2, 3]], "weights": [0.25, 0.75]},
                                     "structure": {"dims": [1, 1], "norms": ["L1", "LInf"]}, "budgets": [0.1, 0.2]})");
    const MthSpec mth = io::read_mth(doc);
    EXPECT_EQ(mth.dim(), 2);
    EXPECT_EQ(mth.p(), 1);
    EXPECT_EQ(mth.structure().norm(1), Norm::LInf);
    EXPECT_DOUBLE_EQ(mth.reference().weight(1), 0.75);
    io::Overrides o;
    o.p = 2;
    o.norms = std::vector<Norm>{Norm::L2, Norm::L2};
    o.budgets = std::vector<double>{1.0, 2.0};
    const MthSpec over = io::read_mth(doc, o);
    EXPECT_EQ(over.p(), 2);
    EXPECT_EQ(over.structure().norm(0), Norm::L2);
    EXPECT_DOUBLE_EQ(over.budgets()(1), 2.0);
}

TEST(Io, ProductReference) {
    const Json doc = Json::parse(R"({"reference": {"marginals": [{"atoms": [[0], [1]]}, {"atoms": [[5], [6], [7]]}]},
                                     "structure": {"dims": [1, 1], "norms": ["L1", "L1"]}, "budgets": [0, 0]})");
    const MthSpec mth = io::read_mth(doc);
    EXPECT_EQ(mth.reference().size(), 6);
    EXPECT_NEAR(mth.reference().mean()(1), 6.0, 1e-12);
    io::Overrides o;
    o.cap = 5;
    EXPECT_THROW(io::read_mth(doc, o), Error);
}

TEST(Io, SchemaViolationsCarryJsonPointers) {
    const auto base = [] {
        return Json::parse(R"({"reference": {"atoms": [[0, 1], [2, 3]]},
                               "structure": {"dims": [1, 1], "norms": ["L1", "L1"]}, "budgets": [0.1, 0.2]})");
    };
    Json j = base();
    j["reference"]["atoms"][1][0] = "x";
    EXPECT_NE(schema_error([&] { io::read_mth(j); }).find("/reference/atoms/1/0"), std::string::npos);
    j = base();
    j["structure"]["norms"][1] = "L3";
    EXPECT_NE(schema_error([&] { io::read_mth(j); }).find("/structure/norms/1"), std::string::npos);
    j = base();
    j["budgets"] = {0.1};
    EXPECT_NE(schema_error([&] { io::read_mth(j); }).find("/budgets"), std::string::npos);
    j = base();
    j["reference"]["weights"] = {0.5, 0.6};
    EXPECT_NE(schema_error([&] { io::read_mth(j); }).find("/reference"), std::string::npos);
    j = base();
    j.erase("structure");
    EXPECT_NE(schema_error([&] { io::read_mth(j); }).find("/structure"), std::string::npos);
    const Json pwa = Json::parse(R"({"slopes": [[1, 2]], "offsets": [0, 1]})");
    EXPECT_NE(schema_error([&] { io::read_pwa(pwa, "/objective", 2); }).find("/objective/offsets"), std::string::npos);
    const Json bad = Json::parse(R"({"d_nominal": 4.5, "alpah": 0.2})");
    EXPECT_NE(schema_error([&] { io::read_experiment_config(bad); }).find("/alpah"), std::string::npos);
    EXPECT_THROW(io::parse_file(write_file("broken.json", "{\"a\": ")), Error);
}

TEST(Io, ExperimentConfigRoundTrip) {
    ExperimentConfig c;
    c.trials = 7;
    c.seed = 99;
    c.clustered_rule = ClusteredBudgetRule::Additive;
    c.eps_grid = {0, 0.5, 1};
    const ExperimentConfig back = io::read_experiment_config(io::to_json(c));
    EXPECT_EQ(back.trials, 7);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.clustered_rule, ClusteredBudgetRule::Additive);
    EXPECT_EQ(back.eps_grid, c.eps_grid);
    EXPECT_EQ(io::to_json(back), io::to_json(c));
}

TEST(Io, CsvSamples) {
    const Matrix m = io::read_csv_matrix(write_file("s.csv", "# samples\n1,2\n\n3.5, 4\n"));
    ASSERT_EQ(m.rows(), 2);
    EXPECT_DOUBLE_EQ(m(1, 0), 3.5);
    EXPECT_THROW(io::read_csv_matrix(write_file("r.csv", "1,2\n3\n")), Error);
    EXPECT_THROW(io::read_csv_matrix(write_file("n.csv", "1,abc\n")), Error);
}

TEST(Cli, SolveAffineAtZeroBudgetIsTheMean) {
    const std::string in = write_file("solve.json", R"({
      "reference": {"atoms": [[0, 1], [2, -1]], "weights": [0.25, 0.75]},
      "structure": {"dims": [1, 1], "norms": ["L1", "L1"], "p": 1}, "budgets": [0, 0],
      "objective": {"type": "pwa", "slopes": [[1.5, -2]], "offsets": [0.5]}})");
    const std::string out = (scratch() / "solve_out.json").string();
    ASSERT_EQ(run_cli("solve " + in + " --out " + out), 0);
    const Json r = Json::parse(read_file(out));
    EXPECT_EQ(r["schema_version"], io::kSchemaVersion);
    EXPECT_EQ(r["status"], "Optimal");
    EXPECT_NEAR(r["value"].get<double>(), 0.25 * (-2 + 0.5) + 0.75 * (3 + 2 + 0.5), 1e-7);
    EXPECT_TRUE(r.contains("wall_time_seconds"));
    EXPECT_EQ(r["dimensions"]["variables"], 4);
    EXPECT_EQ(r["variables"]["lambda"].size(), 2u);
}

TEST(Cli, UqCoveringUnionIsOne) {
    const std::string in = write_file("uq.json", R"({
      "reference": {"atoms": [[0], [1]]}, "structure": {"dims": [1], "norms": ["L1"]}, "budgets": [0.3],
      "support": {"C": [[1], [-1]], "f": [2, 2]},
      "union": {"pieces": [{"C": [[1], [-1]], "f": [5, 5]}]}})");
    const std::string out = (scratch() / "uq_out.json").string();
    ASSERT_EQ(run_cli("uq " + in + " --out " + out), 0);
    EXPECT_NEAR(Json::parse(read_file(out))["value"].get<double>(), 1.0, 1e-7);
    ASSERT_EQ(run_cli("uq " + in + " --format csv --out " + out), 0);
    EXPECT_NE(read_file(out).find("key,index,value"), std::string::npos);
}

TEST(Cli, DrccpMatchesTheLibraryCall) {
    std::string csv;
    for (int i = 0; i < 20; ++i) csv += std::to_string(11 + 0.8 * i) + "," + std::to_string(3 + 0.4 * i) + "\n";
    const std::string samples = write_file("samples.csv", csv);
    const std::string in = write_file("drccp.json", kDispatch);
    const std::string out = (scratch() / "drccp_out.json").string();
    ASSERT_EQ(run_cli("drccp " + in + " --samples " + samples + " --out " + out), 0);
    Json r = Json::parse(read_file(out));

    Json doc = Json::parse(kDispatch);
    doc["reference"] = Json{{"atoms", io::to_json(io::read_csv_matrix(samples))}};
    const MthSpec mth = io::read_mth(doc);
    const DrccpResult lib = solve_drccp(mth, io::read_drccp(doc, 2));
    Json expected = r;
    expected["value"] = lib.value;
    expected["x"] = io::to_json(lib.x);
    expected["variables"] = io::variables_json(lib.solution);
    expected["dimensions"] = io::to_json(lib.dimensions);
    EXPECT_EQ(r.dump(), expected.dump());
    EXPECT_EQ(r["variables"]["eta"].size(), 80u);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli("solve " + write_file("bad.json", R"({"reference": {"atoms": [[0, "x"]]}})")), 1);
    EXPECT_NE(read_file((scratch() / "stderr.txt").string()).find("/structure"), std::string::npos);
    Json infeasible = Json::parse(kDispatch);
    infeasible["reference"] = Json{{"atoms", {{12, 4}, {20, 5}}}};
    infeasible["problem"]["X"] = Json{{"C", {{1}, {-1}}}, {"f", {-1, 0}}};
    EXPECT_EQ(run_cli("drccp " + write_file("inf.json", infeasible.dump())), 2);
    EXPECT_EQ(run_cli("solve --format xml " + write_file("x.json", "{}")), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
}

TEST(Cli, ClusterReportsInflation) {
    std::string csv;
    for (int i = 0; i < 12; ++i) csv += std::to_string(i % 5) + "," + std::to_string(0.5 * i) + "\n";
    const std::string samples = write_file("cl.csv", csv);
    const std::string out = (scratch() / "cl_out.json").string();
    ASSERT_EQ(run_cli("cluster " + samples + " -K 3,2 --seed 4 --budgets 0.1,0.1 --out " + out), 0);
    const Json r = Json::parse(read_file(out));
    ASSERT_EQ(r["inflation"].size(), 2u);
    EXPECT_GT(r["inflation"][0].get<double>(), 0.0);
    EXPECT_NEAR(r["budgets"][1].get<double>(), 0.1 + r["inflation"][1].get<double>(), 1e-12);
    EXPECT_EQ(r["reference"]["marginals"][0]["atoms"].size(), 3u);
    const std::string again = (scratch() / "cl_again.json").string();
    ASSERT_EQ(run_cli("cluster " + samples + " -K 3,2 --seed 4 --budgets 0.1,0.1 --out " + again), 0);
    Json a = Json::parse(read_file(again));
    Json b = r;
    a.erase("wall_time_seconds");
    b.erase("wall_time_seconds");
    EXPECT_EQ(a.dump(), b.dump());
}

TEST(Cli, ExperimentWritesDeterministicFiles) {
    const std::string cfg = write_file("exp.json", R"({"trials": 4, "eps_grid": [0, 0.25, 0.5, 1, 2, 6]})");
    const fs::path a = scratch() / "exp_a";
    const fs::path b = scratch() / "exp_b";
    ASSERT_EQ(run_cli("experiment --config " + cfg + " --out-dir " + a.string()), 0);
    ASSERT_EQ(run_cli("experiment --config " + cfg + " --workers 2 --out-dir " + b.string()), 0);
    for (const char* f : {"confidence.csv", "cdf.csv", "report.json"}) {
        const std::string x = read_file((a / f).string());
        EXPECT_FALSE(x.empty()) << f;
        EXPECT_EQ(x, read_file((b / f).string())) << f;
        EXPECT_NE(x.find(io::kSchemaVersion), std::string::npos) << f;
    }
    const Json rep = Json::parse(read_file((a / "report.json").string()));
    EXPECT_EQ(rep["models"].size(), 3u);
    EXPECT_EQ(rep["config"]["trials"], 4);
}

TEST(Cli, HiddenOracleSubcommand) {
    const std::string in = write_file("oracle.json", R"({
      "reference": {"atoms": [[0]]}, "structure": {"dims": [1], "norms": ["L1"]}, "budgets": [0.5],
      "support": {"C": [[1], [-1]], "f": [2, 2]},
      "objective": {"slopes": [[1], [-1]], "offsets": [0, 0]},
      "grid": {"lo": [-2], "hi": [2], "count": [401]}})");
    const std::string out = (scratch() / "oracle_out.json").string();
    ASSERT_EQ(run_cli("oracle " + in + " --out " + out), 0);
    EXPECT_NEAR(Json::parse(read_file(out))["value"].get<double>(), 0.5, 1e-9);
}
