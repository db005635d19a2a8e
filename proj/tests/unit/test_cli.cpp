#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "otdebias/cli.hpp"

using namespace otdebias;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct ScratchDir {
  fs::path path;
  fs::path previous = fs::current_path();
  explicit ScratchDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("otdebias-test-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
    fs::current_path(path);
  }
  ~ScratchDir() {
    fs::current_path(previous);
    fs::remove_all(path);
  }
};

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"hk", "--pred", "a.csv"}).code == 2);
  CHECK(run({"schedule", "--epochs", "abc"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"hk", "--pred", "/nonexistent/a.csv", "--target", "/nonexistent/b.csv"}).code == 1);
  CHECK(run({"simulate", "--selection", "step:z_cut=0", "--n", "1000"}).code == 1);
  CHECK(run({"simulate", "--selection", "nonsense"}).code == 2);
  CHECK(run({"encode", "--ra", "10"}).code == 2);
}

TEST_CASE("schedule emits one row per epoch") {
  const auto r = run({"schedule", "--epochs", "120"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,lr,lambda_hk");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 121);
}

TEST_CASE("hk on identical files is zero and keys are sorted") {
  ScratchDir dir("hk");
  std::ofstream("a.csv") << "z\n0.1\n0.4\n0.9\n1.3\n1.8\n";
  const auto r = run({"hk", "--pred", "a.csv", "--target", "a.csv"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::abs(j.at("hk2").get<double>()) < 1e-6);
  CHECK(r.out.find("\"converged\"") < r.out.find("\"hk2\""));
}

TEST_CASE("seed comes from the environment unless given") {
  ::setenv("OTDEBIAS_SEED", "11", 1);
  const auto a = run({"simulate", "--n", "50"});
  const auto b = run({"simulate", "--n", "50", "--seed", "11"});
  ::unsetenv("OTDEBIAS_SEED");
  const auto c = run({"simulate", "--n", "50"});
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
}

TEST_CASE("tutorial commands run as written") {
  std::ifstream md(OTDEBIAS_TUTORIAL_PATH);
  REQUIRE(md.good());
  std::vector<std::vector<std::string>> commands;
  std::string line;
  while (std::getline(md, line)) {
    if (line.rfind("$ otdebias ", 0) != 0) continue;
    std::istringstream words(line.substr(11));
    std::vector<std::string> argv;
    for (std::string w; words >> w;) argv.push_back(w);
    commands.push_back(argv);
  }
  REQUIRE(commands.size() >= 5);
  ScratchDir dir("tutorial");
  std::map<std::string, std::string> outputs;
  for (const auto& argv : commands) {
    const auto r = run(argv);
    CHECK_MESSAGE(r.code == 0, argv[0] << ": " << r.err);
    outputs[argv[0]] = r.out;
  }
  const auto rec = nlohmann::json::parse(std::ifstream("recalibrated.json"));
  CHECK(rec.at("hk_after").get<double>() < 0.5 * rec.at("hk_before").get<double>());
  const auto t3 = nlohmann::json::parse(outputs.at("eval"));
  CHECK(t3.at("reports").at("hk").at("overall").at("log_mse").get<double>() <
        t3.at("reports").at("mse_only").at("overall").at("log_mse").get<double>());
}
