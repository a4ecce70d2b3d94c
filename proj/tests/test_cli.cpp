#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli_path() { return BPRE_CLI_PATH; }

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempTree {
    fs::path root;
    TempTree() {
        root = fs::temp_directory_path() /
               ("bpre_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

fs::path write_model(const fs::path& dir, const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << body;
    return p;
}

const char* k2EnvJson = R"({
  "label": "model-2env",
  "states": [
    {"weight": 0.5, "pmf": {"1": 0.5, "2": 0.5}},
    {"weight": 0.5, "pmf": {"1": 0.2, "2": 0.8}}
  ]
})";

}  // namespace

TEST_CASE("rates subcommand emits the rate table and constants", "[cli]") {
    TempTree tmp;
    const fs::path model = write_model(tmp.root, "model.json", k2EnvJson);
    const fs::path out = tmp.root / "out";
    REQUIRE(run("rates --model " + model.string() + " --k 1 --grid 25 --out " + out.string()) ==
            0);

    const std::string csv = slurp(out / "rates.csv");
    CHECK(csv.rfind("theta,chi_star,lambda_star,i_k,regime,lambda_theta\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);  // header + 25 rows
    CHECK(csv.find("linear") != std::string::npos);
    CHECK(csv.find("smooth") != std::string::npos);

    const std::string manifest = slurp(out / "rates_manifest.json");
    CHECK(manifest.find("\"r_k\"") != std::string::npos);
    CHECK(manifest.find("\"hash\"") != std::string::npos);
    CHECK(manifest.find("\"seed\"") != std::string::npos);
}

TEST_CASE("qtable subcommand", "[cli]") {
    TempTree tmp;
    const fs::path model = write_model(tmp.root, "model.json", k2EnvJson);
    const fs::path out = tmp.root / "q";
    REQUIRE(run("qtable --model " + model.string() + " --k 1 --cap 128 --depth 64 --out " +
                out.string()) == 0);
    const std::string csv = slurp(out / "qtable.csv");
    CHECK(csv.rfind("j,q,accessible\n", 0) == 0);
    CHECK(csv.find("\n1,1,1\n") != std::string::npos);  // q_{1,1} = 1
    CHECK(csv.find("3.17073170731707") != std::string::npos);  // q_{1,2}, 17 digits
}

TEST_CASE("deviation subcommand writes the pinned CSV columns", "[cli]") {
    TempTree tmp;
    const fs::path model = write_model(tmp.root, "model.json", k2EnvJson);
    const fs::path out = tmp.root / "dev";
    REQUIRE(run("deviation --model " + model.string() +
                " --k 1 --theta 0.25 --n 4 --n 8 --replicates 2000 --seed 5 --out " +
                out.string()) == 0);
    const std::string csv = slurp(out / "deviation.csv");
    CHECK(csv.rfind("n,estimate,stderr,tilt,replicates\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("identical runs are byte-identical across worker counts", "[cli]") {
    TempTree tmp;
    const fs::path model = write_model(tmp.root, "model.json", k2EnvJson);
    const fs::path out1 = tmp.root / "w1";
    const fs::path out4 = tmp.root / "w4";

    const std::string args = "hmoments --model " + model.string() +
                             " --k 1 --r 1.0 --n 6 --n 10 --replicates 20000 --seed 42 --out ";
    ::setenv("BPRE_THREADS", "1", 1);
    REQUIRE(run(args + out1.string()) == 0);
    ::setenv("BPRE_THREADS", "4", 1);
    REQUIRE(run(args + out4.string()) == 0);
    ::unsetenv("BPRE_THREADS");

    CHECK(slurp(out1 / "hmoments.csv") == slurp(out4 / "hmoments.csv"));
    CHECK(!slurp(out1 / "hmoments.csv").empty());
}

TEST_CASE("usage and error exit codes", "[cli]") {
    TempTree tmp;
    CHECK(run("no-such-subcommand") == 1);
    CHECK(run("rates") == 1);  // missing --model

    const fs::path missing = tmp.root / "missing.json";
    CHECK(run("rates --model " + missing.string() + " --out " + tmp.root.string()) == 1);

    // invalid model: offspring mass at zero
    const fs::path bad = write_model(tmp.root, "bad.json", R"({
      "states": [ {"weight": 1.0, "pmf": {"0": 0.1, "1": 0.9}} ]
    })");
    CHECK(run("rates --model " + bad.string() + " --out " + tmp.root.string()) == 1);

    // numeric guard: q-table denominator degenerates -> exit 2
    const fs::path degen = write_model(tmp.root, "degen.json", R"({
      "states": [ {"weight": 1.0, "pmf": {"1": 0.9999999999999, "2": 1e-13}} ]
    })");
    CHECK(run("qtable --model " + degen.string() + " --k 1 --cap 16 --depth 8 --out " +
              tmp.root.string()) == 2);
}

TEST_CASE("geometric model config", "[cli]") {
    TempTree tmp;
    const fs::path model = write_model(tmp.root, "geo.json", R"({
      "label": "geo-half",
      "geometric": {"tail_epsilon": 1e-12, "components": [{"weight": 1.0, "b": 0.5}]}
    })");
    const fs::path out = tmp.root / "geo-out";
    REQUIRE(run("rates --model " + model.string() + " --k 1 --grid 10 --out " + out.string()) ==
            0);
    const auto manifest = nlohmann::json::parse(slurp(out / "rates_manifest.json"));
    // r_1 = 1 for the geometric family
    CHECK(std::abs(manifest["constants"]["r_k"].get<double>() - 1.0) < 1e-6);
}

TEST_CASE("config errors carry key paths", "[cli]") {
    TempTree tmp;
    const fs::path bad = write_model(tmp.root, "bad_key.json", R"({
      "states": [ {"weight": 0.5, "pmf": {"x": 0.5}} ]
    })");
    const std::string cmd = cli_path() + " rates --model " + bad.string() + " --out " +
                            tmp.root.string() + " 2>" + (tmp.root / "err.txt").string();
    std::system(cmd.c_str());
    const std::string err = slurp(tmp.root / "err.txt");
    CHECK(err.find("states[0].pmf.x") != std::string::npos);
}
