#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string env_required(const char* key) {
    const char* v = std::getenv(key);
    REQUIRE_MESSAGE(v != nullptr, key);
    return v;
}

std::string cli() { return env_required("HAMLENS_CLI_BIN"); }
fs::path scenario_dir() { return env_required("HAMLENS_SCENARIO_DIR"); }

int run_cmd(const std::string& cmd) {
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path d = fs::temp_directory_path() / ("hamlens_cli_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

Json summary_of(const fs::path& out_dir) {
    return Json::parse(slurp(out_dir / "summary.json"));
}

} // namespace

TEST_CASE("every shipped scenario is deterministic across repeated runs") {
    std::vector<fs::path> configs;
    for (const auto& e : fs::directory_iterator(scenario_dir()))
        if (e.path().extension() == ".json") configs.push_back(e.path());
    std::sort(configs.begin(), configs.end());
    REQUIRE(configs.size() >= 8);

    for (const fs::path& cfg : configs) {
        CAPTURE(cfg.filename().string());
        const std::string tag = cfg.stem().string();
        const fs::path a = fresh_dir(tag + "_a");
        const fs::path b = fresh_dir(tag + "_b");
        const int rc_a = run_cmd(cli() + " run " + cfg.string() + " --out-dir " + a.string() +
                                 " > " + (a / "stdout.txt").string());
        const int rc_b = run_cmd(cli() + " run " + cfg.string() + " --out-dir " + b.string() +
                                 " > " + (b / "stdout.txt").string());
        CHECK(rc_a == 0);
        CHECK(rc_b == 0);

        const Json sum = summary_of(a);
        CHECK(sum.at("exit_code") == 0);
        REQUIRE(sum.at("artifacts").is_array());
        CHECK(!sum.at("artifacts").empty());
        for (const auto& art : sum.at("artifacts")) {
            const std::string name = art.get<std::string>();
            CAPTURE(name);
            CHECK(slurp(a / name) == slurp(b / name));
        }
        CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
        CHECK(slurp(a / "stdout.txt") == slurp(b / "stdout.txt"));
        fs::remove_all(a);
        fs::remove_all(b);
    }
}

TEST_CASE("check thresholds drive the exit code and land in the summary") {
    const fs::path cfg = scenario_dir() / "euclid_disk.json";
    const fs::path out = fresh_dir("threshold");
    const int rc = run_cmd(cli() + " run " + cfg.string() + " --out-dir " + out.string() +
                           " --override checks.ell_expected=1e-30 > /dev/null");
    CHECK(rc == 2);

    const Json sum = summary_of(out);
    CHECK(sum.at("exit_code") == 2);
    bool found = false;
    for (const auto& c : sum.at("checks"))
        if (c.at("name") == "ell_expected") {
            found = true;
            CHECK(c.at("pass") == false);
            CHECK(c.at("threshold").get<double>() == 1e-30);
        }
    CHECK(found);
    fs::remove_all(out);
}

TEST_CASE("seed and thread overrides land in the summary and artifacts") {
    const fs::path cfg = scenario_dir() / "euclid_disk.json";
    const fs::path out = fresh_dir("seed");
    const int rc = run_cmd(cli() + " run " + cfg.string() + " --out-dir " + out.string() +
                           " --seed 99 --threads 3 > /dev/null");
    CHECK(rc == 0);

    const Json sum = summary_of(out);
    CHECK(sum.at("seed") == 99);
    CHECK(sum.at("threads") == 3);

    std::ifstream csv(out / "scatter.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.find("seed=99") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("validate reports findings without executing and run fails hard") {
    const fs::path good = scenario_dir() / "traveltime_c2.json";
    const fs::path out = fresh_dir("validate");
    const fs::path log = out / "log.txt";

    CHECK(run_cmd(cli() + " validate " + good.string() + " > " + log.string()) == 0);
    CHECK(slurp(log).rfind("ok:", 0) == 0);

    const fs::path bad = out / "bad.json";
    {
        std::ofstream f(bad);
        f << R"({"schema_version": 1, "experiment": "warp_drive", "seed": 1})" << "\n";
    }
    CHECK(run_cmd(cli() + " validate " + bad.string() + " > " + log.string()) == 0);
    const std::string report = slurp(log);
    CHECK(report.find("finding:") != std::string::npos);
    CHECK(report.find("warp_drive") != std::string::npos);

    CHECK(run_cmd(cli() + " run " + bad.string() + " --out-dir " + out.string() +
                  " > /dev/null 2>&1") == 1);
    const Json sum = summary_of(out);
    CHECK(sum.at("exit_code") == 1);
    CHECK(sum.contains("error"));

    CHECK(run_cmd(cli() + " validate " + (out / "missing.json").string() + " > " +
                  log.string()) == 0);
    CHECK(slurp(log).find("finding:") != std::string::npos);
    CHECK(run_cmd(cli() + " run " + (out / "missing.json").string() + " --out-dir " +
                  out.string() + " > /dev/null 2>&1") == 1);
    CHECK(summary_of(out).at("exit_code") == 1);
    fs::remove_all(out);
}

TEST_CASE("list-builtins emits the catalog") {
    const fs::path out = fresh_dir("catalog");
    const fs::path log = out / "catalog.json";
    CHECK(run_cmd(cli() + " list-builtins > " + log.string()) == 0);

    const Json cat = Json::parse(slurp(log));
    const auto& exps = cat.at("experiments");
    auto has = [&](const char* name) {
        return std::find(exps.begin(), exps.end(), Json(name)) != exps.end();
    };
    CHECK(has("scatter_fan"));
    CHECK(has("traveltime_table"));
    CHECK(has("xray_sinogram"));
    CHECK(has("kappa_validate"));
    CHECK(has("zero_energy_suite"));
    CHECK(!cat.at("models").empty());
    CHECK(!cat.at("domains").empty());
    fs::remove_all(out);
}

TEST_CASE("a missing required argument is a usage error") {
    CHECK(run_cmd(cli() + " run > /dev/null 2>&1") != 0);
    CHECK(run_cmd(cli() + " > /dev/null 2>&1") != 0);
}
