#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "askless/cli.hpp"
#include "askless/network_io.hpp"
#include "askless/survey.hpp"

namespace fs = std::filesystem;
using askless::Json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = askless::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_work" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// generate -> learn (with split) -> find-k in `dir`.
void pipeline(const fs::path& dir) {
  const auto p = [&](const char* f) { return (dir / f).string(); };
  REQUIRE(run({"--seed", "7", "generate", "--rows", "3000", "--out", p("all.csv")}).code == 0);
  REQUIRE(run({"--seed", "7", "learn", "--data", p("all.csv"), "--split", "0.7", "--holdout-out", p("test.csv"),
               "--out", p("net.json")})
              .code == 0);
  REQUIRE(run({"--seed", "7", "find-k", "--net", p("net.json"), "--test", p("test.csv"), "--grid", "5,10,20",
               "--threshold", "0.70", "--samples", "300", "--out", p("report.json")})
              .code == 0);
}

}  // namespace

TEST_CASE("pipeline outputs are byte-identical across runs") {
  const auto a = workdir("a");
  const auto b = workdir("b");
  pipeline(a);
  pipeline(b);
  for (const char* f : {"all.csv", "net.json", "net.split.json", "test.csv", "report.json"}) {
    CAPTURE(f);
    const auto left = slurp(a / f);
    CHECK_FALSE(left.empty());
    CHECK(left == slurp(b / f));
  }

  const auto report = Json::parse(slurp(a / "report.json"));
  CHECK(report.at("perK").size() == 3);
  CHECK(report.at("mode") == "threshold");
  CHECK(report.contains("chosenK"));

  const auto split = Json::parse(slurp(a / "net.split.json"));
  CHECK(split.at("train").size() == 2100);
  CHECK(split.at("holdout").size() == 900);
  CHECK(split.at("seed") == 7);
  const auto holdout = askless::read_csv(a / "test.csv", askless::default_schema(), true);
  CHECK(holdout.rows() == 900);
}

TEST_CASE("generate honours --seed after the subcommand and ASKLESS_SEED") {
  const auto dir = workdir("seed");
  const auto p = [&](const char* f) { return (dir / f).string(); };
  REQUIRE(run({"generate", "--schema", "default", "--rows", "200", "--seed", "42", "--out", p("flag.csv")}).code == 0);
  ::setenv("ASKLESS_SEED", "42", 1);
  REQUIRE(run({"generate", "--rows", "200", "--out", p("env.csv")}).code == 0);
  ::unsetenv("ASKLESS_SEED");
  REQUIRE(run({"generate", "--rows", "200", "--seed", "43", "--out", p("other.csv")}).code == 0);
  CHECK(slurp(dir / "flag.csv") == slurp(dir / "env.csv"));
  CHECK(slurp(dir / "flag.csv") != slurp(dir / "other.csv"));

  const auto d = askless::read_csv(dir / "flag.csv", askless::default_schema(), true);
  CHECK(d.rows() == 200);
}

TEST_CASE("learn then predict prints one label") {
  const auto dir = workdir("predict");
  const auto p = [&](const char* f) { return (dir / f).string(); };
  REQUIRE(run({"--seed", "3", "generate", "--rows", "2000", "--out", p("train.csv")}).code == 0);
  REQUIRE(run({"learn", "--data", p("train.csv"), "--score", "aic", "--out", p("net.json")}).code == 0);
  std::ofstream(dir / "ev.json") << R"({"PAM":"5","AIE":"5","MVID":"5"})";
  const auto r = run({"predict", "--net", p("net.json"), "--evidence", p("ev.json"), "--engine", "exact"});
  REQUIRE(r.code == 0);
  CHECK((r.out == "S1\n" || r.out == "S2\n" || r.out == "S3\n" || r.out == "S4\n"));
  CHECK(r.err.find("\"S1\"") != std::string::npos);

  const auto quiet = run({"-q", "predict", "--net", p("net.json"), "--evidence", p("ev.json")});
  CHECK(quiet.out == r.out);
  CHECK(quiet.err.empty());

  const auto ev = run({"evaluate", "--net", p("net.json"), "--test", p("train.csv"), "--k", "10"});
  CHECK(ev.code == 0);
  CHECK(Json::parse(ev.out).at("k") == 10);
  const auto evFile = run({"evaluate", "--net", p("net.json"), "--test", p("train.csv"), "--out", p("ev.json")});
  CHECK(evFile.code == 0);
  CHECK(evFile.out.find("Average") != std::string::npos);
  CHECK(Json::parse(slurp(dir / "ev.json")).at("k") == 22);

  std::ofstream(dir / "bad.json") << R"({"PAM":"9"})";
  const auto bad = run({"predict", "--net", p("net.json"), "--evidence", p("bad.json")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("InvalidLevel") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"generate"}).code == 1);
  CHECK(run({"generate", "--out", "x.csv", "--bogus"}).code == 1);
  CHECK(run({"learn", "--data", "x.csv", "--out", "n.json", "--score", "mdl"}).code != 0);
  CHECK(run({"--help"}).code == 0);

  const auto missing = run({"learn", "--data", "no/such/file.csv", "--out", "n.json"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("no/such/file.csv") != std::string::npos);

  const auto dir = workdir("codes");
  std::ofstream(dir / "broken.csv") << "PAM,SGV2\n6,S1\n";
  const auto broken = run({"learn", "--data", (dir / "broken.csv").string(), "--out", (dir / "n.json").string()});
  CHECK(broken.code == 2);
}
