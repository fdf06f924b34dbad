#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

#ifndef TAC_CLI_PATH
#define TAC_CLI_PATH "tac"
#endif

namespace {

int run(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" TAC_CLI_PATH "' " + args + " >cli.log 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const std::string kSmall = "--count 24 --seed 3 --checkpoint ck --out o";

}  // namespace

TEST_CASE("cli exit codes") {
  TempDir d("tac_cli_codes");
  CHECK(run(d.path, "--help") == 0);
  CHECK(run(d.path, "sweep --bogus") == 2);
  CHECK(run(d.path, "frobnicate") == 2);
  CHECK(run(d.path, "train") == 2);
  CHECK(run(d.path, "sweep --data missing.csv") == 1);
  CHECK(run(d.path, "sweep --bounds 0.5,0.1 " + kSmall) == 1);
  CHECK(run(d.path, "cost --avg-cg 0 --out o") == 1);
}

TEST_CASE("cli sweep, edge/cloud run and round trip") {
  TempDir d("tac_cli_flow");
  REQUIRE(run(d.path, "sweep --policy all " + kSmall) == 0);
  const auto sweep = slurp(d.path / "o" / "sweep.csv");
  CHECK(sweep.rfind("bound,policy,avg_cg,effective_loss,violation_rate,n_fallback\n", 0) == 0);
  CHECK(count_lines(sweep) == 1 + 5 * 3);

  REQUIRE(run(d.path, "compress --bound 0.75 " + kSmall) == 0);
  CHECK(fs::file_size(d.path / "o" / "records.bin") > 0);
  REQUIRE(run(d.path, "decompress " + kSmall) == 0);
  CHECK(count_lines(slurp(d.path / "o" / "reconstructions.csv")) >= 2);

  REQUIRE(run(d.path, "run --bound 0.75 " + kSmall) == 0);
  CHECK(fs::exists(d.path / "o" / "report.json"));
  CHECK(count_lines(slurp(d.path / "o" / "cloud.csv")) >= 2);

  REQUIRE(run(d.path, "cost --avg-cg 40 --out o") == 0);
  CHECK(count_lines(slurp(d.path / "o" / "cost.csv")) == 5);
}

TEST_CASE("cli sweep is deterministic for a fixed seed") {
  TempDir a("tac_cli_det_a"), b("tac_cli_det_b");
  REQUIRE(run(a.path, "sweep " + kSmall) == 0);
  REQUIRE(run(b.path, "sweep " + kSmall) == 0);
  CHECK(slurp(a.path / "o" / "sweep.csv") == slurp(b.path / "o" / "sweep.csv"));
  CHECK(slurp(a.path / "ck" / "codec.phase3.ckpt") == slurp(b.path / "ck" / "codec.phase3.ckpt"));
}
