#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "epinet/io.hpp"

using namespace epinet;
using Json = io::Json;

namespace {

const std::filesystem::path kConfigs = EPINET_CONFIG_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "epinet");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Workspace {
public:
    explicit Workspace(const std::string& name) : dir_(std::filesystem::temp_directory_path() / ("epinet_cli_" + name)) {
        std::filesystem::remove_all(dir_);
        std::filesystem::create_directories(dir_);
    }
    ~Workspace() { std::filesystem::remove_all(dir_); }
    std::string operator/(const std::string& file) const { return (dir_ / file).string(); }

private:
    std::filesystem::path dir_;
};

const std::vector<std::string> kNames = {
    "beta",     "exp_eta",  "phi",      "gamma",    "p_s",      "b_S_0",    "b_S_1",
    "alpha_HH0", "alpha_HI0", "alpha_II0", "alpha_HH1", "alpha_HI1", "alpha_II1",
    "omega_HH0", "omega_HI0", "omega_II0", "omega_HH1", "omega_HI1", "omega_II1"};

void simulate_into(const Workspace& ws, std::uint64_t seed) {
    const Result r = run_cli({"simulate", "--config", (kConfigs / "synthetic.json").string(), "--seed",
                              std::to_string(seed), "--out", ws / "events.jsonl", "--min-attack-rate", "0.5",
                              "--max-retries", "50"});
    REQUIRE(r.code == 0);
}

}  // namespace

TEST_CASE("simulate then fit-complete recovers the truth") {
    const Workspace ws("smoke");
    simulate_into(ws, 11);
    const Result fit = run_cli({"fit-complete", "--events", ws / "events.jsonl", "--covariates",
                                ws / "events.jsonl.covariates.csv", "--out", ws / "fit.json"});
    REQUIRE(fit.code == 0);
    const Json report = io::read_json(ws / "fit.json");
    CHECK(report["schema_version"] == 1);
    const Json& est = report["estimates"];
    CHECK(est.size() == kNames.size());
    for (const auto& name : kNames) CHECK(est.contains(name));
    CHECK(std::abs(est["gamma"].get<double>() - 0.1) < 0.03);
    CHECK(std::abs(est["phi"].get<double>() - 0.2) < 0.06);
    CHECK(std::abs(est["p_s"].get<double>() - 0.6) < 0.15);
    CHECK(std::abs(est["beta"].get<double>() - 0.2) < 0.15);
    CHECK(report["max_abs_score"].get<double>() < 1e-6);
}

TEST_CASE("fit-stem with nothing hidden reproduces fit-complete") {
    const Workspace ws("degenerate");
    simulate_into(ws, 12);
    REQUIRE(run_cli({"fit-complete", "--events", ws / "events.jsonl", "--covariates", ws / "events.jsonl.covariates.csv",
                     "--out", ws / "fit.json"}).code == 0);
    REQUIRE(run_cli({"fit-stem", "--events", ws / "events.jsonl", "--covariates", ws / "events.jsonl.covariates.csv",
                     "--observed-spec", (kConfigs / "hide_none.json").string(), "--runs", "2", "--seed", "3",
                     "--out", ws / "stem.json"}).code == 0);
    const Json a = io::read_json(ws / "fit.json");
    const Json b = io::read_json(ws / "stem.json");
    CHECK(a["estimates"] == b["estimates"]);
}

TEST_CASE("fit-stem reports every estimate and its diagnostics; variance reproduces the SEs") {
    const Workspace ws("stem");
    simulate_into(ws, 13);
    const Result r = run_cli({"fit-stem", "--events", ws / "events.jsonl", "--covariates",
                              ws / "events.jsonl.covariates.csv", "--observed-spec",
                              (kConfigs / "hide_exposure.json").string(), "--runs", "3", "--iters", "30",
                              "--burn-in", "20", "--window", "5", "--seed", "5", "--dump-chains", ws / "chains",
                              "--out", ws / "stem.json"});
    REQUIRE(r.code == 0);
    const Json report = io::read_json(ws / "stem.json");
    for (const auto& name : kNames) CHECK(report["estimates"].contains(name));
    CHECK(report["runs"] == 3);
    CHECK(report["averaging"] == "across_runs");
    CHECK(report["variance_multiplier"].get<double>() == doctest::Approx(1.0 + 0.5 / 3));
    CHECK(report["acceptance"]["proposals"].get<long>() >= report["acceptance"]["accepted"].get<long>());
    CHECK(report["run_estimates"].size() == 3);

    const Result v = run_cli({"variance", "--chains", ws / "chains", "--at", ws / "stem.json", "--out", ws / "var.json"});
    REQUIRE(v.code == 0);
    const Json var = io::read_json(ws / "var.json");
    CHECK(var["standard_errors"] == report["standard_errors"]);
}

TEST_CASE("fit-stem is reproducible for a fixed seed") {
    const Workspace ws("repro");
    simulate_into(ws, 14);
    for (const char* out : {"a.json", "b.json"}) {
        REQUIRE(run_cli({"fit-stem", "--events", ws / "events.jsonl", "--covariates", ws / "events.jsonl.covariates.csv",
                         "--observed-spec", (kConfigs / "hide_both.json").string(), "--iters", "25", "--burn-in",
                         "15", "--seed", "9", "--out", ws / out}).code == 0);
    }
    CHECK(io::read_json(ws / "a.json") == io::read_json(ws / "b.json"));
}

TEST_CASE("exit codes") {
    const Workspace ws("codes");
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"fit-complete", "--events"}).code == cli::kUsage);
    CHECK(run_cli({"bogus"}).code == cli::kUsage);

    {
        std::ofstream bad(ws / "bad.jsonl");
        bad << R"({"schema_version":1,"T":10,"N":2,"initial_statuses":["S","S"],"initial_edges":[],"schedule":[[0,10,0]]})" << "\n";
        bad << R"({"time":2.0,"kind":"link_activate","actor":0,"partner":1})" << "\n";
        bad << R"({"time":1.0,"kind":"link_terminate","actor":0,"partner":1})" << "\n";
        std::ofstream cov(ws / "cov.csv");
        cov << "id,x\n0,1\n1,0\n";
    }
    const Result v = run_cli({"fit-complete", "--events", ws / "bad.jsonl", "--covariates", ws / "cov.csv", "--out", ws / "o.json"});
    CHECK(v.code == cli::kValidation);
    const Json diag = Json::parse(v.err);
    CHECK(diag["kind"] == "validation");
    CHECK(diag["error"].get<std::string>().find("line 3") != std::string::npos);

    CHECK(run_cli({"fit-complete", "--events", ws / "missing.jsonl", "--covariates", ws / "cov.csv", "--out", ws / "o.json"}).code ==
          cli::kValidation);

    {
        // An exposure with no infectious neighbour has no finite MLE.
        std::ofstream log(ws / "impossible.jsonl");
        log << R"({"schema_version":1,"T":10,"N":3,"initial_statuses":["Ia","S","S"],"initial_edges":[[0,1]],"schedule":[[0,10,0]]})" << "\n";
        log << R"({"time":2.0,"kind":"exposure","actor":2})" << "\n";
        std::ofstream cov(ws / "cov3.csv");
        cov << "id,x\n0,1\n1,0\n2,1\n";
    }
    const Result n = run_cli({"fit-complete", "--events", ws / "impossible.jsonl", "--covariates", ws / "cov3.csv", "--out", ws / "o.json"});
    CHECK(n.code == cli::kNumerical);
    CHECK(Json::parse(n.err)["kind"] == "numerical");

    CHECK(run_cli({"fit-stem", "--events", ws / "bad.jsonl", "--covariates", ws / "cov.csv", "--observed-spec",
                   (kConfigs / "hide_none.json").string(), "--iters", "5", "--burn-in", "10", "--out", ws / "o.json"}).code ==
          cli::kValidation);
}
