#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(TBNORM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out_dir(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("tbnorm_cli_" + name)).string();
}

}  // namespace

TEST_CASE("command-line exit codes") {
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("cil-run --norm ln") == 2);
  CHECK(run("cil-run --norm tbbn --bc 10 --bp 3") == 2);
  CHECK(run("cil-run --config /nonexistent.cfg") == 2);
  CHECK(run("gradcheck --layer tbbn --shape 12,6,3,3 --t 3 --bc 8 --bp 4") == 0);
  CHECK(run("gradcheck --layer xx") == 2);
  CHECK(run("gradcheck --shape 2,2") == 2);
  CHECK(run("gradcheck --layer tbbn --shape 12,6,1,1 --t 2 --bc 8 --bp 3") == 2);
}

TEST_CASE("config file and flag overrides") {
  const std::string cfg = out_dir("cfg.txt");
  {
    std::ofstream f(cfg);
    f << "toy_batches = 50\nseeds = 1\n";
  }
  const std::string out = out_dir("toy");
  CHECK(run("toy-gaussian --config " + cfg + " --out " + out) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "toy_deviation.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "config.json"));
}
