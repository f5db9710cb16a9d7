#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "htol/config.hpp"
#include "htol/error.hpp"

using namespace htol;
using config::json;
namespace fs = std::filesystem;

namespace {

json base_doc() {
    return json::parse(R"({
      "schema_version": 1,
      "experiment": "simulate",
      "model": {"ell": [-1, -1], "M": [[1, 0], [0, 2]], "v": [0.5, 0.5],
                "levy": {"components": [{"type": "stable_axis", "alpha": 1.5, "eta": 1}]}},
      "run": {"dt": 0.01, "horizon": 2, "seed": 5}
    })");
}

std::string config_error(const json& doc) {
    try {
        config::parse_experiment(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(HTOL_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("htol_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("valid document parses") {
    const auto cfg = config::parse_experiment(base_doc());
    CHECK(cfg.kind == "simulate");
    REQUIRE(cfg.model);
    CHECK(cfg.model->dim() == 2);
    CHECK(cfg.run.master_seed == 5);
    CHECK(cfg.run.x0.size() == 2);
}

TEST_CASE("schema violations name the field") {
    auto doc = base_doc();
    doc["model"]["levy"]["components"][0]["alpah"] = 1.2;
    CHECK(config_error(doc).find("model.levy.components[0].alpah") != std::string::npos);

    doc = base_doc();
    doc["run"]["horizn"] = 3;
    CHECK(config_error(doc).find("run.horizn") != std::string::npos);

    doc = base_doc();
    doc["schema_version"] = 2;
    CHECK(config_error(doc).find("schema_version") != std::string::npos);

    doc = base_doc();
    doc["experiment"] = "simulat";
    CHECK(config_error(doc).find("experiment") != std::string::npos);

    doc = base_doc();
    doc["analysis"] = {{"theta", 1.0}};
    CHECK(config_error(doc).find("analysis.theta") != std::string::npos);

    doc = base_doc();
    doc["model"]["v"] = {0.7, 0.7};
    CHECK_FALSE(config_error(doc).empty());

    doc = base_doc();
    doc.erase("model");
    CHECK(config_error(doc).find("model") != std::string::npos);
}

TEST_CASE("overrides overlay the file, last writer wins") {
    auto doc = base_doc();
    config::apply_override(doc, "run.horizon=7");
    config::apply_override(doc, "run.horizon=9");
    config::apply_override(doc, "model.levy.components=[]");
    config::apply_override(doc, "output=somewhere");
    const auto cfg = config::parse_experiment(doc);
    CHECK(cfg.run.horizon == 9.0);
    CHECK(cfg.model->levy.empty());
    CHECK(cfg.output == "somewhere");
    CHECK_THROWS_AS(config::apply_override(doc, "no_equals_sign"), ConfigError);
}

TEST_CASE("number formatting round-trips") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(config::fmt(x)) == x);
    CHECK(config::fmt(0.5) == "0.5");
}

TEST_CASE("model round-trips through JSON") {
    const auto cfg = config::parse_experiment(base_doc());
    auto doc = base_doc();
    doc["model"] = config::to_json(*cfg.model);
    const auto again = config::parse_experiment(doc);
    CHECK(sde::model_hash(*again.model) == sde::model_hash(*cfg.model));
}

TEST_CASE("manifest carries what is needed to reproduce a run") {
    const auto cfg = config::parse_experiment(base_doc());
    const auto m1 = config::manifest(cfg, 42, 5, 1);
    const auto m4 = config::manifest(cfg, 42, 5, 4);
    CHECK(m1 == m4);
    for (const char* key : {"tool", "version", "schema_version", "experiment", "seed", "model_hash", "config"})
        CHECK(m1.contains(key));
}

TEST_CASE("classify writes the polynomial report") {
    const auto out = scratch("classify");
    REQUIRE(run_cli("classify --config " HTOL_CONFIGS "/polynomial.json --out " + out.string()) == 0);
    const auto j = json::parse(slurp(out / "report.json"));
    CHECK(j.at("regime") == "polynomial");
    CHECK(j.at("rate_exponent").get<double>() == doctest::Approx(0.5));
    CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("simulate is byte-identical across runs and thread counts") {
    const auto a = scratch("sim_a"), b = scratch("sim_b");
    const std::string cfg = "--config " HTOL_CONFIGS "/transient.json --override run.n_paths=3";
    REQUIRE(run_cli("simulate " + cfg + " --threads 1 --out " + a.string()) == 0);
    REQUIRE(run_cli("simulate " + cfg + " --threads 3 --out " + b.string()) == 0);
    for (const char* f : {"path_0.csv", "path_1.csv", "path_2.csv", "jumps.csv", "summary.json", "manifest.json"}) {
        const auto sa = slurp(a / f);
        CHECK(!sa.empty());
        CHECK(sa == slurp(b / f));
    }
    CHECK(slurp(a / "path_0.csv").rfind("t,x1,x2,jump\n", 0) == 0);
}

TEST_CASE("exit codes") {
    const auto out = scratch("codes");
    CHECK(run_cli("classify --config " HTOL_CONFIGS "/polynomial.json --override model.gamma=[1] --out " + out.string()) == 1);
    CHECK(run_cli("classify --out " + out.string()) == 1);
    // the transient model breaks the drift condition
    CHECK(run_cli("lyapunov-check --config " HTOL_CONFIGS "/transient.json --override analysis.theta=1 --out " +
                  out.string()) == 2);
    CHECK(run_cli("lyapunov-check --config " HTOL_CONFIGS "/abandonment.json --out " + out.string()) == 0);
}

}  // TEST_SUITE
