#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "wvo/families.hpp"
#include "wvo/io.hpp"

using namespace wvo;
using namespace wvo::testing;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wvo_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

/// Runs the CLI and returns its exit code; output goes to `log` in the out directory's parent.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(WVO_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const std::string kQuick = " --samples 400 --warmup 500 --thin 2 --chains 2 --restarts 1 --max-iters 300";

std::string base(const std::string& model, const std::string& data, const fs::path& out) {
  return "--model " + model + " --data " + data_path(data) + " --out " + out.string() + kQuick;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("beta-bernoulli fit and reconstruct") {
    const auto out = scratch("bb");
    const auto log = fs::temp_directory_path() / "wvo_cli_bb.log";
    const std::string args = "--model beta-bernoulli --data " + data_path("beta_bernoulli.csv") + " --out " + out.string();
    REQUIRE(run_cli("fit " + args, log) == 0);
    const auto ess = read_csv(out / "ess.csv");
    const double mean = parse_double(ess.rows[0][ess.column("mean")]);
    CHECK(std::abs(mean - 9.0 / 14.0) < 0.01);
    CHECK(parse_double(ess.rows[0][ess.column("ess")]) > 0.0);

    REQUIRE(run_cli("reconstruct " + args, log) == 0);
    const auto wvo = read_wvo(out / "wvo.json");
    CHECK(wvo.vobs.observations.size() == 12);
    CHECK(std::abs(wvo.weights.w.sum() - 12.0) <= 1e-9);
    CHECK((wvo.weights.w.array() >= 0.0).all());
    for (const auto* name : {"samples.csv", "ess.csv", "objective_trace.csv", "context/L.csv"}) {
      CHECK(slurp(out / name).rfind("# config_hash=", 0) == 0);
    }

    REQUIRE(run_cli("validate " + args, log) == 0);
    CHECK(slurp(log).find("PASS") != std::string::npos);
    CHECK(fs::exists(out / "validation.csv"));
  }

  TEST_CASE("eight-schools reconstruct respects both budgets") {
    const auto out = scratch("schools");
    const auto log = fs::temp_directory_path() / "wvo_cli_schools.log";
    const std::string args = base("eight-schools", "eight_schools.csv", out) + " --m-virtual 10 --forward-draws 50";
    REQUIRE(run_cli("fit " + args, log) == 0);
    CHECK(fs::exists(out / "group_logliks.csv"));
    const auto ess = read_csv(out / "ess.csv");
    CHECK(ess.rows.size() == 2);
    for (const auto& row : ess.rows) CHECK(std::isfinite(parse_double(row[ess.column("ess")])));
    REQUIRE(run_cli("reconstruct " + args, log) == 0);
    const auto wvo = read_wvo(out / "wvo.json");
    REQUIRE(wvo.vobs.groups.size() == 8);
    CHECK(std::abs(wvo.weights.v.sum() - 8.0) <= 1e-9);
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(wvo.vobs.groups[k].size() == 10);
      CHECK(std::abs(wvo.weights.within[k].sum() - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("rats with twenty virtual groups carries the full group budget") {
    const auto out = scratch("rats");
    const auto log = fs::temp_directory_path() / "wvo_cli_rats.log";
    const std::string args = base("rats-binomial", "rats.csv", out) + " --forward-draws 50 --k-virtual 20";
    REQUIRE(run_cli("fit " + args, log) == 0);
    REQUIRE(run_cli("reconstruct " + args, log) == 0);
    const auto wvo = read_wvo(out / "wvo.json");
    CHECK(wvo.vobs.groups.size() == 20);
    CHECK(std::abs(wvo.weights.v.sum() - 71.0) <= 1e-9 * 71.0);
  }

  TEST_CASE("missing data file exits 2 and writes nothing") {
    const auto out = scratch("missing");
    const auto log = fs::temp_directory_path() / "wvo_cli_missing.log";
    CHECK(run_cli("fit --model normal-noninformative --data /nonexistent/y.csv --out " + out.string(), log) == 2);
    CHECK((!fs::exists(out) || fs::is_empty(out)));
  }

  TEST_CASE("validate without a fit fails fast") {
    const auto out = scratch("nofit");
    const auto log = fs::temp_directory_path() / "wvo_cli_nofit.log";
    CHECK(run_cli("validate " + base("normal-noninformative", "normal.csv", out), log) == 2);
    CHECK(slurp(log).find("wvo fit") != std::string::npos);
    CHECK(!fs::exists(out / "validation.csv"));
  }

  TEST_CASE("leave-one-out with one group is a usage error") {
    const auto out = scratch("onegroup");
    const auto data = fs::temp_directory_path() / "wvo_cli_one_group.csv";
    std::ofstream(data) << "group,y,sigma\nA,28,15\n";
    const auto log = fs::temp_directory_path() / "wvo_cli_onegroup.log";
    CHECK(run_cli("loo --model eight-schools --data " + data.string() + " --out " + out.string(), log) == 2);
  }

  TEST_CASE("bad flags and unknown models are usage errors") {
    const auto out = scratch("flags");
    const auto log = fs::temp_directory_path() / "wvo_cli_flags.log";
    CHECK(run_cli("fit --model attainment --data " + data_path("normal.csv") + " --out " + out.string(), log) == 2);
    CHECK(run_cli("fit --model normal-noninformative --data " + data_path("normal.csv") + " --samples 10 --out " +
                      out.string(),
                  log) == 2);
    CHECK(run_cli("fit --bogus", log) == 2);
    CHECK(run_cli("", log) == 2);
  }

  TEST_CASE("identity virtual set validates and a skewed one fails with a report") {
    const auto out = scratch("identity");
    const auto log = fs::temp_directory_path() / "wvo_cli_identity.log";
    const std::string args =
        "--model beta-bernoulli --data " + data_path("beta_bernoulli.csv") + " --out " + out.string();
    REQUIRE(run_cli("fit " + args, log) == 0);
    const BetaBernoulli f;
    WvoFile file;
    file.model = "beta-bernoulli";
    file.vobs.level = VirtualObservationSet::Level::kSingle;
    file.vobs.observations = read_observations(data_path("beta_bernoulli.csv"), f);
    file.vobs.sources.assign(12, 0);
    file.weights.w = Eigen::VectorXd::Ones(12);
    file.budget = 12.0;
    write_wvo(out / "wvo.json", file);
    REQUIRE(run_cli("validate " + args, log) == 0);
    const auto report = read_csv(out / "validation.csv");
    const auto row = report.rows[0];
    CHECK(parse_double(row[report.column("mean_diff")]) < 0.1);

    // all weight on the successes
    for (std::size_t i = 0; i < 12; ++i) file.weights.w[static_cast<Eigen::Index>(i)] = file.vobs.observations[i].value * 1.5;
    write_wvo(out / "wvo.json", file);
    fs::remove(out / "validation.csv");
    CHECK(run_cli("validate " + args, log) == 1);
    CHECK(fs::exists(out / "validation.csv"));
  }

  TEST_CASE("reruns give byte-identical outputs") {
    const auto a = scratch("rerun_a");
    const auto b = scratch("rerun_b");
    const auto log = fs::temp_directory_path() / "wvo_cli_rerun.log";
    for (const auto& out : {a, b}) {
      const std::string args = base("normal-noninformative", "normal.csv", out);
      REQUIRE(run_cli("fit " + args, log) == 0);
      REQUIRE(run_cli("reconstruct " + args, log) == 0);
    }
    for (const auto* name : {"samples.csv", "ess.csv", "wvo.json", "objective_trace.csv"}) {
      CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);
    }
  }
}
