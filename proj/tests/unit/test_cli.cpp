#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "metabayes/error.hpp"

using namespace metabayes;
using namespace metabayes::cli;
namespace fs = std::filesystem;

namespace {

const char* kTable2 =
    "study,duration,r1,n1,r2,n2\n"
    "Edwards (2000),short,4,73,63,140\n"
    "Storey (2001),short,8,116,53,113\n"
    "Brandes (2004),long,9,143,81,144\n"
    "Diener (2004),long,5,113,57,117\n"
    "Silberstein (2004),long,4,21,13,19\n"
    "Silberstein (2006),short,4,15,9,15\n";

const char* kTable4 =
    "study,d1,r1,n1,d2,r2,n2,d3,r3,n3,d4,r4,n4\n"
    "Edwards (2000),0,4,73,200,63,140,,,,,,\n"
    "Storey (2001),0,8,116,50,43,118,100,59,126,200,53,113\n"
    "Brandes (2004),0,9,143,100,77,141,200,81,144,,,\n"
    "Diener (2004),0,5,113,50,40,117,100,59,119,200,57,117\n"
    "Silberstein (2004),0,4,21,200,13,19,,,,,,\n"
    "Silberstein (2006),0,4,15,200,9,15,,,,,,\n";

/// Shipped config with a shorter run and a fresh output directory.
fs::path quick_config(const std::string& shipped, const fs::path& dir, int iter = 1000) {
  nlohmann::json j = nlohmann::json::parse(fixtures::read_file(fixtures::source_dir() / "configs" / shipped));
  j["sampler"]["iter"] = iter;
  j["sampler"]["warmup"] = iter / 2;
  j["output_dir"] = (dir / "fit").string();
  const fs::path path = dir / "config.json";
  fixtures::write_file(path, j.dump(2));
  return path;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("convert Table 2 and Table 4") {
    const fs::path dir = fixtures::scratch_dir("convert");
    fixtures::write_file(dir / "t2.csv", kTable2);
    fixtures::write_file(dir / "t4.csv", kTable4);
    std::ostringstream out, err;
    CHECK(cmd_convert({dir / "t2.csv", "responders=r,sampleSize=n", "binary", dir / "t2_long.csv", {}}, out, err) == kOk);
    CHECK(line_count(fixtures::read_file(dir / "t2_long.csv")) == 12 + 1);
    CHECK(out.str().find("12 rows") != std::string::npos);
    CHECK(cmd_convert({dir / "t4.csv", "responders=r,sampleSize=n,dose=d", "binary", dir / "t4_long.csv", {}}, out,
                      err) == kOk);
    CHECK(line_count(fixtures::read_file(dir / "t4_long.csv")) == 17 + 1);
  }

  TEST_CASE("convert errors exit 2 with a useful message") {
    const fs::path dir = fixtures::scratch_dir("convert_err");
    fixtures::write_file(dir / "t2.csv", kTable2);
    std::ostringstream out, err;
    CHECK(cmd_convert({dir / "t2.csv", "mean=m,std_err=s", "continuous", dir / "x.csv", {}}, out, err) == kUserError);
    CHECK(err.str().find("m1") != std::string::npos);

    fixtures::write_file(dir / "bad.csv", "study,r1,n1,r2,n2\nOdd trial,50,10,1,10\n");
    std::ostringstream err2;
    CHECK(cmd_convert({dir / "bad.csv", "responders=r,sampleSize=n", "binary", dir / "y.csv", {}}, out, err2) ==
          kUserError);
    CHECK(err2.str().find("Odd trial") != std::string::npos);
  }

  TEST_CASE("strict run config") {
    nlohmann::json j = nlohmann::json::parse(fixtures::read_file(fixtures::source_dir() / "configs/topiramate_pairwise.json"));
    CHECK_NOTHROW(run_config_from_json(j));
    nlohmann::json typo = j;
    typo["model"]["priors"]["tua"] = typo["model"]["priors"]["tau"];
    CHECK_THROWS_AS(run_config_from_json(typo), ConfigError);
    nlohmann::json top = j;
    top["outptu_dir"] = "x";
    CHECK_THROWS_AS(run_config_from_json(top), ConfigError);
    nlohmann::json sampler = j;
    sampler["sampler"]["chians"] = 2;
    CHECK_THROWS_AS(run_config_from_json(sampler), ConfigError);

    RunConfig rc = run_config_from_json(j, "/some/dir");
    CHECK(rc.output_dir == fs::path("/some/dir/fit_pairwise"));
    CHECK(rc.sampler.target_accept == 0.98);
    CHECK(*rc.model.priors.theta == PriorSpec::normal(0, 2.5));
  }

  TEST_CASE("thread cap from the environment") {
    SamplerConfig c;
    c.threads = 0;
    setenv("METABAYES_THREADS", "2", 1);
    CHECK(apply_thread_limit(c).threads == 2);
    c.threads = 1;
    CHECK(apply_thread_limit(c).threads == 1);
    unsetenv("METABAYES_THREADS");
    c.threads = 0;
    CHECK(apply_thread_limit(c).threads == 0);
  }

  TEST_CASE("pairwise fit writes the artifacts and the print block") {
    const fs::path dir = fixtures::scratch_dir("fit_pairwise");
    std::ostringstream out, err;
    REQUIRE(cmd_fit(quick_config("topiramate_pairwise.json", dir), out, err) == kOk);
    for (const char* f : {"summary.json", "summary.txt", "model.json", "data.csv", "draws.csv"}) {
      CHECK(fs::exists(dir / "fit" / f));
    }
    const std::string txt = fixtures::read_file(dir / "fit/summary.txt");
    CHECK(txt.find("theta prior: Normal(0,2.5)") != std::string::npos);
    CHECK(txt.find("tau prior:half-normal(0.5)") != std::string::npos);
    CHECK(txt.find("Maximum Rhat:") != std::string::npos);
    CHECK(txt.find("Minimum Effective Sample Size:") != std::string::npos);
    CHECK(txt.find("Treatment effect (theta) estimates") < txt.find("Heterogeneity stdev (tau)"));

    nlohmann::json summary = nlohmann::json::parse(fixtures::read_file(dir / "fit/summary.json"));
    CHECK(summary.contains("max_rhat"));
    CHECK(summary["study_labels"].size() == 6);

    PlotArgs forest{"forest", dir / "fit", {}, {}, std::string("A,B,C,D,E,F"), dir / "forest.svg", "mean"};
    CHECK(cmd_plot(forest, out, err) == kOk);
    const std::string svg = fixtures::read_file(dir / "forest.svg");
    CHECK(svg.find(">F</text>") != std::string::npos);
    PlotArgs dose{"dose", dir / "fit", {}, {}, {}, dir / "dose.svg", "mean"};
    CHECK(cmd_plot(dose, out, err) == kUserError);

    PlotArgs wrong_labels = forest;
    wrong_labels.labels = "A,B";
    CHECK(cmd_plot(wrong_labels, out, err) == kUserError);

    fs::remove(dir / "fit/draws.csv");
    std::ostringstream err2;
    CHECK(cmd_plot(forest, out, err2) == kUserError);
    CHECK(err2.str().find("write_draws") != std::string::npos);
  }

  TEST_CASE("MBMA fit echoes the functional ED50 prior and plots") {
    const fs::path dir = fixtures::scratch_dir("fit_mbma");
    std::ostringstream out, err;
    REQUIRE(cmd_fit(quick_config("topiramate_mbma_emax.json", dir), out, err) == kOk);
    const std::string txt = fixtures::read_file(dir / "fit/summary.txt");
    CHECK(txt.find("ED50 prior:functional(-2.5,1.8)") != std::string::npos);
    CHECK(txt.find("Dose-response function = emax") != std::string::npos);
    PlotArgs dose{"dose", dir / "fit", {}, {}, {}, dir / "dose.svg", "median"};
    CHECK(cmd_plot(dose, out, err) == kOk);
    PlotArgs forest{"forest", dir / "fit", {}, {}, {}, dir / "forest.svg", "mean"};
    CHECK(cmd_plot(forest, out, err) == kUserError);
  }

  TEST_CASE("binomial likelihood on continuous columns exits 2") {
    const fs::path dir = fixtures::scratch_dir("fit_mismatch");
    fixtures::write_file(dir / "long.csv", write_long_csv(fixtures::continuous_pairwise()));
    nlohmann::json j = nlohmann::json::parse(fixtures::read_file(fixtures::source_dir() / "configs/topiramate_pairwise.json"));
    j["data"] = {{"path", "long.csv"}, {"format", "long"}};
    j["output_dir"] = "fit";
    fixtures::write_file(dir / "config.json", j.dump());
    std::ostringstream out, err;
    CHECK(cmd_fit(dir / "config.json", out, err) == kUserError);
    CHECK(err.str().find("binary") != std::string::npos);
  }

  TEST_CASE("malformed config files exit 2") {
    const fs::path dir = fixtures::scratch_dir("fit_bad");
    fixtures::write_file(dir / "broken.json", "{\"data\": ");
    std::ostringstream out, err;
    CHECK(cmd_fit(dir / "broken.json", out, err) == kUserError);
    CHECK(cmd_fit(dir / "absent.json", out, err) == kUserError);
  }

  TEST_CASE("poor convergence exits 3") {
    const fs::path dir = fixtures::scratch_dir("fit_short");
    nlohmann::json j = nlohmann::json::parse(fixtures::read_file(fixtures::source_dir() / "configs/topiramate_pairwise.json"));
    j["sampler"] = {{"chains", 4}, {"iter", 12}, {"warmup", 4}, {"seed", 3}};
    j["output_dir"] = "fit";
    fixtures::write_file(dir / "config.json", j.dump());
    std::ostringstream out, err;
    CHECK(cmd_fit(dir / "config.json", out, err) == kNotConverged);
    CHECK(fs::exists(dir / "fit/summary.json"));
  }

  TEST_CASE("same config gives byte-identical outputs") {
    const fs::path a = fixtures::scratch_dir("det_a");
    const fs::path b = fixtures::scratch_dir("det_b");
    std::ostringstream out, err;
    REQUIRE(cmd_fit(quick_config("topiramate_pairwise.json", a), out, err) == kOk);
    REQUIRE(cmd_fit(quick_config("topiramate_pairwise.json", b), out, err) == kOk);
    CHECK(fixtures::read_file(a / "fit/draws.csv") == fixtures::read_file(b / "fit/draws.csv"));
    CHECK(fixtures::read_file(a / "fit/summary.json") == fixtures::read_file(b / "fit/summary.json"));
  }
}
