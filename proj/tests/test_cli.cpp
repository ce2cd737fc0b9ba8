#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Workdir {
    fs::path path;
    Workdir() {
        path = fs::temp_directory_path() / ("fbp_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~Workdir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const Workdir& work() {
    static Workdir w;
    return w;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct Result {
    int code = -1;
    std::string out, err;
};

Result run_cli(const std::string& args) {
    const char* exe = std::getenv("FBP_CLI");
    REQUIRE(exe != nullptr);
    const std::string o = work() / "stdout.txt", e = work() / "stderr.txt";
    const std::string cmd = "cd '" + work().path.string() + "' && '" + exe + "' " + args + " >'" + o + "' 2>'" + e + "'";
    const int st = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("solve at lambda = 0") {
    const Result r = run_cli("solve --domain disk --res 64x16 --p 2 --lambda 0 --out s0");
    CHECK(r.code == 0);
    const auto rows = read_csv(work() / "s0.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][1] == "lambda");
    CHECK(rows[0][2] == "alpha");
    CHECK(std::stod(rows[1][2]) == 1.0);
    CHECK(std::stod(rows[1][1]) == 0.0);
    const auto j = nlohmann::json::parse(slurp(work() / "s0.json"));
    CHECK(j["p"].get<double>() == 2.0);
    CHECK(j["energy"]["E_quadratic"].get<double>() == doctest::Approx(1.0 / (16.0 * pi)).epsilon(2e-2));
    CHECK(fs::exists(work() / "s0_field.csv"));
}

TEST_CASE("branch on the disk, p = 1") {
    const Result r = run_cli("branch --domain disk --res 128x16 --p 1 --out b1");
    CHECK(r.code == 0);
    const auto rows = read_csv(work() / "b1.csv");
    REQUIRE(rows.size() > 10);
    const std::vector<std::string> header{"s", "lambda", "alpha", "E", "sigma1", "nu1", "dalpha_dlambda",
                                          "dE_dlambda", "fold", "I", "gamma"};
    CHECK(rows[0] == header);
    const auto& last = rows.back();
    const double j01 = oracle::bessel_zero(0, 1);
    CHECK(std::stod(last[1]) == doctest::Approx(pi * j01 * j01).epsilon(1e-2));
    CHECK(std::stod(last[3]) == doctest::Approx(1.0 / (8.0 * pi)).epsilon(1e-2));
    CHECK(last[9] == "nan");
    const auto j = nlohmann::json::parse(slurp(work() / "b1.json"));
    CHECK(j["termination"] == "alpha <= alpha_tol");
    CHECK(j["points"].get<size_t>() == rows.size() - 1);
    CHECK(fs::exists(work() / "b1.gp"));

    // Same inputs, same bytes.
    CHECK(run_cli("branch --domain disk --res 128x16 --p 1 --out b2 --no-plot").code == 0);
    CHECK(slurp(work() / "b1.csv") == slurp(work() / "b2.csv"));
    CHECK(!fs::exists(work() / "b2.gp"));
}

TEST_CASE("config file and flag precedence") {
    write(work() / "cfg.json", R"({"domain": "square", "res": 24, "p": 2, "lambda_max": 3.0, "plot": false})");
    CHECK(run_cli("branch --config cfg.json --p 3 --out prec").code == 0);
    const auto j = nlohmann::json::parse(slurp(work() / "prec.json"));
    CHECK(j["p"].get<double>() == 3.0);
    CHECK(j["grid"]["domain"] == "square");
    CHECK(j["grid"]["res"][0].get<int>() == 24);
    CHECK(j["termination"] == "lambda_max reached");
    CHECK(!fs::exists(work() / "prec.gp"));
    const auto rows = read_csv(work() / "prec.csv");
    CHECK(std::stod(rows.back()[1]) == doctest::Approx(3.0).epsilon(1e-12));
    // I = lambda^q with q = 3/2.
    CHECK(std::stod(rows.back()[9]) == doctest::Approx(std::pow(3.0, 1.5)).epsilon(1e-12));
}

TEST_CASE("bad configurations exit with code 1 and name the field") {
    write(work() / "bogus.json", R"({"p": 2, "bogus": 1})");
    Result r = run_cli("solve --config bogus.json --out x");
    CHECK(r.code == 1);
    CHECK(r.err.find("'bogus'") != std::string::npos);

    write(work() / "type.json", R"({"p": "two"})");
    r = run_cli("solve --config type.json --out x");
    CHECK(r.code == 1);
    CHECK(r.err.find("'p'") != std::string::npos);

    write(work() / "broken.json", R"({"p": 2,)");
    CHECK(run_cli("solve --config broken.json --out x").code == 1);

    r = run_cli("solve --domain square --res 32 --p 0.5 --out x");
    CHECK(r.code == 1);
    CHECK(r.err.find("'p'") != std::string::npos);

    r = run_cli("solve --domain triangle --out x");
    CHECK(r.code == 1);
    CHECK(r.err.find("'domain'") != std::string::npos);

    r = run_cli("branch --domain ball:3 --res 64 --p 2 --out x");
    CHECK(r.code == 1);
    CHECK(run_cli("solve --config missing.json").code == 1);
    CHECK(run_cli("frobnicate").code == 1);
}

TEST_CASE("solver failure exits with code 2") {
    // Beyond the end of the positive branch for p = 1.
    const Result r = run_cli("solve --domain disk --res 64x16 --p 1 --lambda 30 --out far");
    CHECK(r.code == 2);
    CHECK(r.err.find("solver failure") != std::string::npos);
}

TEST_CASE("spectrum and sobolev modes") {
    CHECK(run_cli("spectrum --domain disk --res 128x32 --p 1 --lambda 0 --eigs 3 --out sp").code == 0);
    const auto rows = read_csv(work() / "sp.csv");
    REQUIRE(rows.size() == 4);
    const double j11 = oracle::bessel_zero(1, 1);
    for (size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) == doctest::Approx(pi * j11 * j11).epsilon(1e-2));

    CHECK(run_cli("sobolev --domain disk --res 256x16 --p 2 --out sb").code == 0);
    const auto j = nlohmann::json::parse(slurp(work() / "sb.json"));
    CHECK(j["t"].get<double>() == 3.0);
    const double L = j["Lambda"].get<double>();
    CHECK(L == doctest::Approx(oracle::lane_emden_lambda(2, 3.0)).epsilon(5e-3));
    CHECK(j["Lambda_direct"].get<double>() == doctest::Approx(L).epsilon(5e-3));
    CHECK(j["lambda_star_disk"].get<double>() ==
          doctest::Approx(std::pow(8.0 * pi / 3.0, 0.25) * std::pow(L, 0.75)).epsilon(1e-12));
}

TEST_CASE("verify on coarse grids") {
    write(work() / "v.json", R"({"verify": {"disk": [64, 32], "square": 32, "ball": 64}})");
    const Result r = run_cli("verify --config v.json --out rep");
    const auto j = nlohmann::json::parse(slurp(work() / "rep.json"));
    REQUIRE(j["criteria"].size() == 14);
    int pass = 0, fail = 0;
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("PASS ", 0) == 0) ++pass;
        if (line.rfind("FAIL ", 0) == 0) ++fail;
    }
    CHECK(pass + fail == 14);
    const bool all = j["all_pass"].get<bool>();
    CHECK(all == (fail == 0));
    CHECK(r.code == (all ? 0 : 3));
    for (const auto& c : j["criteria"]) {
        CHECK(c.contains("measured"));
        CHECK(c.contains("tolerance"));
        if (!c["informative"].get<bool>()) CHECK(!c["checks"].empty());
    }
}
