#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(IMLMC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "imlmc_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// report text with the generated_at stamp blanked, for byte comparisons
std::string strip_timestamp(std::string text) {
    const std::string key = "\"generated_at\":";
    const auto pos = text.find(key);
    if (pos == std::string::npos) return text;
    const auto end = text.find('\n', pos);
    text.erase(pos, end - pos);
    return text;
}

}  // namespace

TEST_CASE("unknown subcommand fails with usage", "[cli]") {
    REQUIRE(run_cli("frobnicate") != 0);
    REQUIRE(run_cli("") != 0);
}

TEST_CASE("grid subcommand emits csv and a report", "[cli]") {
    const fs::path dir = fresh_dir("grid");
    REQUIRE(run_cli("grid --n 4 --T 1 --m 2 --out " + dir.string()) == 0);

    REQUIRE(fs::exists(dir / "grid.csv"));
    REQUIRE(fs::exists(dir / "fine_grid.csv"));
    const std::string csv = slurp(dir / "grid.csv");
    REQUIRE(csv.find("index,time,step") == 0);
    REQUIRE(csv.find("\n1,0.25,0.25") != std::string::npos);

    const json report = json::parse(slurp(dir / "report.json"));
    REQUIRE(report["results"]["coarse_points"] == 5);
    REQUIRE(report["results"]["fine_points"] == 9);
    REQUIRE(report["pass"] == true);
}

TEST_CASE("verify cross_qv reports the bracket target", "[cli]") {
    const fs::path dir = fresh_dir("crossqv");
    REQUIRE(run_cli("verify cross_qv --n 512 --m 2 --reps 20 --seed 5 --out " + dir.string()) ==
            0);
    const json report = json::parse(slurp(dir / "report.json"));
    REQUIRE(report["results"]["target_terminal"] == Catch::Approx(0.25).margin(1e-12));
    REQUIRE(report["checks"][0]["pass"] == true);
    REQUIRE(fs::exists(dir / "verify_cross_qv_curve.csv"));
}

TEST_CASE("reports are deterministic modulo the timestamp", "[cli]") {
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    const std::string args = "verify increment_integrals --n 256 --reps 200 --seed 11 --out ";
    REQUIRE(run_cli(args + a.string()) == 0);
    REQUIRE(run_cli(args + b.string()) == 0);
    REQUIRE(strip_timestamp(slurp(a / "report.json")) ==
            strip_timestamp(slurp(b / "report.json")));
}

TEST_CASE("worker count does not change any report", "[cli]") {
    const fs::path a = fresh_dir("jobs1");
    const fs::path b = fresh_dir("jobs8");
    const std::string base = "simulate --model gbm --n 32 --m 2 --reps 100 --seed 3 ";
    REQUIRE(run_cli(base + "--jobs 1 --out " + a.string()) == 0);
    REQUIRE(run_cli(base + "--jobs 8 --out " + b.string()) == 0);
    REQUIRE(strip_timestamp(slurp(a / "report.json")) ==
            strip_timestamp(slurp(b / "report.json")));
    REQUIRE(slurp(a / "simulate.csv") == slurp(b / "simulate.csv"));
}

TEST_CASE("config files feed defaults and flags override them", "[cli]") {
    const fs::path dir = fresh_dir("config");
    const fs::path cfg_path = dir / "config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"n": 8, "T": 1.0, "m": 2})";
    }
    REQUIRE(run_cli("grid --config " + cfg_path.string() + " --out " + dir.string()) == 0);
    json report = json::parse(slurp(dir / "report.json"));
    REQUIRE(report["results"]["coarse_points"] == 9);

    // explicit flag beats the config file
    REQUIRE(run_cli("grid --config " + cfg_path.string() + " --n 4 --out " + dir.string()) == 0);
    report = json::parse(slurp(dir / "report.json"));
    REQUIRE(report["results"]["coarse_points"] == 5);
}

TEST_CASE("IMLMC_OUT provides the default output directory", "[cli]") {
    const fs::path dir = fresh_dir("envout");
    const std::string cmd = "IMLMC_OUT=" + dir.string() + " " + IMLMC_CLI_PATH +
                            " grid --n 4 --T 1 >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    REQUIRE(fs::exists(dir / "report.json"));
    REQUIRE(fs::exists(dir / "grid.csv"));
}

TEST_CASE("mlmc subcommand writes the level table", "[cli]") {
    const fs::path dir = fresh_dir("mlmc");
    REQUIRE(run_cli("mlmc --model gbm --n 16 --m 2 --alpha 0.5 --reps 1 --seed 9 --out " +
                    dir.string()) == 0);
    const json report = json::parse(slurp(dir / "report.json"));
    REQUIRE(report["results"]["per_level"].size() == 5);
    REQUIRE(report["results"].contains("q_n"));
    REQUIRE(fs::exists(dir / "mlmc_levels.csv"));
}
