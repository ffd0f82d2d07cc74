#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "csieve/evaluation.hpp"
#include "csieve/models.hpp"

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = CSIEVE_CLI_PATH;

struct CliResult {
  int exit_code = -1;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "csieve_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

CliResult run(const std::string& args) {
  const std::string command = kCli + " " + args + " 2>" + (work_dir() / "stderr.txt").string();
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("calibrate emits a result within tolerance") {
  const fs::path out = work_dir() / "cal.json";
  const CliResult r = run(
      "calibrate --method cusum --c 1.2 --df 10 --target-arl0 100 --reps 20000 "
      "--seed 7 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j.at("method") == "cusum");
  CHECK(j.at("arl0_hat").get<double>() >= 98.0);
  CHECK(j.at("arl0_hat").get<double>() <= 102.0);
  CHECK(j.at("replications").get<long long>() == 20000);
}

TEST_CASE("simulate emits a stream with the expected mean") {
  const fs::path out = work_dir() / "sim.csv";
  const CliResult r =
      run("simulate --theta 1 --df 10 --c 1.2 --length 100000 --seed 1 --out " +
          out.string());
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(out);
  std::istringstream lines(csv);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "t,u");
  double sum = 0.0;
  std::int64_t n = 0;
  while (std::getline(lines, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    sum += std::stod(line.substr(comma + 1));
    ++n;
  }
  REQUIRE(n == 100000);
  CHECK(std::abs(sum / static_cast<double>(n) - 10.0) < 0.1);
}

TEST_CASE("scan with an unreachable threshold reports no segments") {
  const fs::path img = work_dir() / "img.bin";
  {
    std::ofstream f(img, std::ios::binary);
    csieve::SeededRng rng(123, 0);
    for (int i = 0; i < 4096 * 4; ++i) f.put(static_cast<char>(rng.next_u64() & 0xFF));
  }
  const fs::path out = work_dir() / "scan.json";
  const CliResult r = run("scan " + img.string() +
                          " --threshold 1e18 --method cusum --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j.at("segments").empty());
  CHECK(j.at("blocks_scanned").get<long long>() == 4);
}

TEST_CASE("evaluation subcommands run end to end") {
  const fs::path cal = work_dir() / "cal_small.json";
  REQUIRE(run("calibrate --method shewhart --direction below --c 1.2 --df 3 "
              "--target-arl0 50 --tolerance 2 --reps 8000 --seed 5 --out " +
              cal.string()).exit_code == 0);

  const fs::path ced = work_dir() / "ced.csv";
  REQUIRE(run("evaluate-ced --calibration " + cal.string() +
              " --theta-max 3 --reps 3000 --seed 6 --out " + ced.string()).exit_code == 0);
  const auto ced_rows = csieve::parse_curve_rows_csv(slurp(ced));
  REQUIRE(ced_rows.size() == 3);
  CHECK(ced_rows[0].metric == "ced");
  CHECK(ced_rows[0].t == 1);
  CHECK(ced_rows[0].n_eff == 3000);

  const fs::path pv = work_dir() / "pv.csv";
  REQUIRE(run("evaluate-pv --calibration " + cal.string() +
              " --nu 0.1 --t-max 5 --reps 3000 --seed 6 --out " + pv.string()).exit_code == 0);
  const auto pv_rows = csieve::parse_curve_rows_csv(slurp(pv));
  REQUIRE(pv_rows.size() == 5);
  for (const auto& row : pv_rows) {
    CHECK(row.metric == "pv");
    CHECK(row.nu == 0.1);
    if (row.n_eff > 0) {
      CHECK(row.value >= 0.0);
      CHECK(row.value <= 1.0);
    }
  }

  // Omitting --nu evaluates the default hazard grid, one curve per value.
  const fs::path pv_grid = work_dir() / "pv_grid.csv";
  REQUIRE(run("evaluate-pv --calibration " + cal.string() +
              " --t-max 3 --reps 2000 --seed 6 --out " + pv_grid.string()).exit_code == 0);
  const auto grid_rows = csieve::parse_curve_rows_csv(slurp(pv_grid));
  REQUIRE(grid_rows.size() == 9);
  CHECK(grid_rows[0].nu == 0.01);
  CHECK(grid_rows[3].nu == 0.05);
  CHECK(grid_rows[6].nu == 0.10);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("scan").exit_code == 1);                       // missing path
  CHECK(run("calibrate --method nonsense").exit_code == 1);
  CHECK(run("simulate --length 10 --unknown-flag 3").exit_code == 1);
  CHECK(run("").exit_code == 1);                           // subcommand required

  const fs::path img = work_dir() / "img.bin";
  CHECK(run("scan " + img.string() + " --threshold 5 --target-arl0 100").exit_code == 1);
  CHECK(run("scan " + img.string()).exit_code == 1);  // neither threshold nor target
}

TEST_CASE("runtime errors exit with code 2") {
  CHECK(run("scan /nonexistent/img.bin --threshold 5").exit_code == 2);
  CHECK(run("evaluate-ced --calibration /nonexistent.json").exit_code == 2);
}

TEST_CASE("fixed seeds reproduce byte-identical outputs") {
  const fs::path a = work_dir() / "a.out";
  const fs::path b = work_dir() / "b.out";

  SUBCASE("calibrate") {
    const std::string flags =
        "calibrate --method shiryaev-roberts --c 1.3 --df 5 --target-arl0 50 "
        "--tolerance 2 --reps 5000 --seed 11 --out ";
    REQUIRE(run(flags + a.string()).exit_code == 0);
    REQUIRE(run(flags + b.string()).exit_code == 0);
    CHECK(slurp(a) == slurp(b));
  }
  SUBCASE("simulate") {
    const std::string flags = "simulate --theta 17 --df 8 --c 1.1 --length 5000 --seed 3 --out ";
    REQUIRE(run(flags + a.string()).exit_code == 0);
    REQUIRE(run(flags + b.string()).exit_code == 0);
    CHECK(slurp(a) == slurp(b));
  }
  SUBCASE("scan with trace") {
    const fs::path img = work_dir() / "det.bin";
    {
      std::ofstream f(img, std::ios::binary);
      csieve::SeededRng rng(9, 0);
      for (int i = 0; i < 4096 * 8; ++i) f.put(static_cast<char>(rng.next_u64() & 0xFF));
    }
    const std::string flags =
        "scan " + img.string() + " --threshold 5 --method cusum --trace --out ";
    REQUIRE(run(flags + a.string()).exit_code == 0);
    REQUIRE(run(flags + b.string()).exit_code == 0);
    CHECK(slurp(a) == slurp(b));
  }
}
