#include <doctest.h>

#include <numeric>

#include "fixtures.hpp"
#include "metabayes/error.hpp"

using namespace metabayes;

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

ArmVars binary_vars() { return ArmVars::parse("responders=r,sampleSize=n"); }

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("parse_csv reads Table 2 with two arm groups per row") {
    WideTable t = parse_csv(kTable2);
    CHECK(t.n_rows() == 6);
    CHECK(t.arm_columns("r").size() == 2);
    CHECK(t.arm_columns("n").size() == 2);
    CHECK(t.text(0, "study") == "Edwards (2000)");
    CHECK(*t.number(0, "r2") == 63);
  }

  TEST_CASE("header-only input gives an empty table") {
    WideTable t = parse_csv("study,r1,n1,r2,n2\n");
    CHECK(t.n_rows() == 0);
    Dataset d = convert_wide_to_long(t, binary_vars(), Endpoint::binary);
    CHECK(d.n_studies() == 0);
    CHECK(d.n_arms() == 0);
  }

  TEST_CASE("blank dose cells are absent arms") {
    WideTable t = parse_csv(kTable4);
    std::vector<std::size_t> counts;
    for (std::size_t r = 0; r < t.n_rows(); ++r) counts.push_back(t.present_arm_count(r, "d"));
    CHECK(counts == std::vector<std::size_t>{2, 4, 3, 4, 2, 2});
  }

  TEST_CASE("quoted fields keep embedded commas") {
    WideTable t = parse_csv("study,r1\n\"Smith, J (1999)\",3\n");
    CHECK(t.text(0, "study") == "Smith, J (1999)");
  }

  TEST_CASE("malformed CSV reports the row") {
    try {
      parse_csv("study,r1,n1\nA,1,2\nB,1\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
    }
    CHECK_THROWS_AS(parse_csv("study,r1\n\"open,1\n"), ParseError);
  }

  TEST_CASE("non-numeric value in a numeric column names column and row") {
    try {
      parse_csv("study,r1\nA,x\n", {{"r1", ColumnType::numeric}});
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("r1") != std::string::npos);
      CHECK(e.row() == 2);
    }
  }

  TEST_CASE("Edwards row converts to two arm records") {
    Dataset d = convert_wide_to_long(parse_csv(kTable2), binary_vars(), Endpoint::binary);
    REQUIRE(d.n_arms() == 12);
    auto edwards = d.study_arms(0);
    CHECK(edwards[0].study == 1);
    CHECK(edwards[0].arm == 0);
    CHECK(std::get<BinaryOutcome>(edwards[0].outcome).responders == 4);
    CHECK(std::get<BinaryOutcome>(edwards[0].outcome).sample_size == 73);
    CHECK(edwards[1].arm == 1);
    CHECK(std::get<BinaryOutcome>(edwards[1].outcome).responders == 63);
    CHECK(std::get<BinaryOutcome>(edwards[1].outcome).sample_size == 140);
    CHECK(d.study_label(0) == "Edwards (2000)");
  }

  TEST_CASE("Storey row of Table 4 keeps its four doses") {
    ArmVars vars = ArmVars::parse("responders=r,sampleSize=n,dose=d");
    Dataset d = convert_wide_to_long(parse_csv(kTable4), vars, Endpoint::binary);
    CHECK(d.n_arms() == 17);
    auto storey = d.study_arms(1);
    REQUIRE(storey.size() == 4);
    std::vector<double> doses;
    std::vector<long> events;
    for (const ArmRecord& a : storey) {
      doses.push_back(*a.dose);
      events.push_back(std::get<BinaryOutcome>(a.outcome).responders);
    }
    CHECK(doses == std::vector<double>{0, 50, 100, 200});
    CHECK(events == std::vector<long>{8, 43, 59, 53});
  }

  TEST_CASE("round trip reproduces every wide cell") {
    WideTable wide = parse_csv(kTable4);
    Dataset d = convert_wide_to_long(wide, ArmVars::parse("responders=r,sampleSize=n,dose=d"), Endpoint::binary);
    for (std::size_t s = 0; s < wide.n_rows(); ++s) {
      auto arms = d.study_arms(s);
      std::size_t k = 0;
      for (int g = 1; g <= 4; ++g) {
        const std::string suffix = std::to_string(g);
        auto dose = wide.number(s, "d" + suffix);
        if (!dose) continue;
        REQUIRE(k < arms.size());
        CHECK(*arms[k].dose == *dose);
        CHECK(std::get<BinaryOutcome>(arms[k].outcome).responders == *wide.number(s, "r" + suffix));
        CHECK(std::get<BinaryOutcome>(arms[k].outcome).sample_size == *wide.number(s, "n" + suffix));
        ++k;
      }
      CHECK(k == arms.size());
    }
    auto per = d.arms_per_study();
    CHECK(std::accumulate(per.begin(), per.end(), std::size_t{0}) == d.n_arms());
  }

  TEST_CASE("missing role is a configuration error") {
    CHECK_THROWS_AS(convert_wide_to_long(parse_csv(kTable2), ArmVars::parse("responders=r"), Endpoint::binary),
                    ConfigError);
    CHECK_THROWS_AS(convert_wide_to_long(parse_csv(kTable2), ArmVars::parse("mean=m,std_err=s"), Endpoint::continuous),
                    ConfigError);
  }

  TEST_CASE("responders above sample size is rejected naming the study") {
    try {
      convert_wide_to_long(parse_csv("study,r1,n1,r2,n2\nA,1,10,5,10\nBad trial,12,10,5,10\n"), binary_vars(),
                           Endpoint::binary);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("Bad trial") != std::string::npos);
    }
  }

  TEST_CASE("structural invariants of Dataset") {
    using V = std::vector<ArmRecord>;
    CHECK_THROWS_AS(Dataset(Endpoint::binary, V{{1, 0, {}, BinaryOutcome{1, 5}}}), ValidationError);
    CHECK_THROWS_AS(Dataset(Endpoint::binary, V{{1, 0, {}, BinaryOutcome{1, 5}}, {1, 0, {}, BinaryOutcome{1, 5}}}),
                    ValidationError);
    CHECK_THROWS_AS(Dataset(Endpoint::binary, V{{2, 0, {}, BinaryOutcome{1, 5}}, {2, 1, {}, BinaryOutcome{1, 5}}}),
                    ValidationError);
    CHECK_THROWS_AS(Dataset(Endpoint::binary, V{{1, 0, {}, BinaryOutcome{1, 5}}, {1, 1, {}, ContinuousOutcome{}}}),
                    ValidationError);
    CHECK_THROWS_AS(Dataset(Endpoint::binary, V{{1, 0, 10.0, BinaryOutcome{1, 5}}, {1, 1, 20.0, BinaryOutcome{1, 5}}}),
                    ValidationError);
    CHECK_THROWS_AS(Dataset(Endpoint::count, V{{1, 0, {}, CountOutcome{1, 0.0}}, {1, 1, {}, CountOutcome{1, 1.0}}}),
                    ValidationError);
    CHECK_THROWS_AS(
        Dataset(Endpoint::continuous, V{{1, 0, {}, ContinuousOutcome{0, 0}}, {1, 1, {}, ContinuousOutcome{0, 1}}}),
        ValidationError);
  }

  TEST_CASE("bundled pairwise table") {
    Dataset d = builtin_dataset(BuiltinDataset::boucher2016_pairwise);
    CHECK(d.n_studies() == 6);
    CHECK(d.n_arms() == 12);
    long treated = 0;
    for (std::size_t s = 0; s < d.n_studies(); ++s) treated += std::get<BinaryOutcome>(d.study_arms(s)[1].outcome).responders;
    CHECK(treated == 276);
    CHECK_FALSE(d.has_doses());
  }

  TEST_CASE("bundled dose table") {
    Dataset d = builtin_dataset(BuiltinDataset::boucher2016_full);
    CHECK(d.arms_per_study() == std::vector<std::size_t>{2, 4, 3, 4, 2, 2});
    CHECK(d.has_doses());
    CHECK(d.max_dose() == 200.0);
    for (const ArmRecord& a : d.arms()) {
      if (a.arm == 0) CHECK(*a.dose == 0.0);
    }
  }

  TEST_CASE("duration covariate") {
    WideTable t = builtin_table(BuiltinDataset::boucher2016_pairwise);
    std::vector<std::string> duration;
    for (std::size_t r = 0; r < t.n_rows(); ++r) duration.push_back(t.text(r, "duration"));
    CHECK(duration == std::vector<std::string>{"short", "short", "long", "long", "long", "short"});
    const CovariateColumn col{"duration", std::string("long")};
    auto x = extract_covariates(t, std::span<const CovariateColumn>(&col, 1));
    std::vector<double> flat;
    for (auto& row : x) flat.push_back(row[0]);
    CHECK(flat == std::vector<double>{0, 0, 1, 1, 1, 0});
    const CovariateColumn missing{"weeks", std::nullopt};
    CHECK_THROWS_AS(extract_covariates(t, std::span<const CovariateColumn>(&missing, 1)), ConfigError);
  }

  TEST_CASE("unknown builtin name") { CHECK_THROWS_AS(builtin_from_string("table9"), ConfigError); }

  TEST_CASE("long CSV round trip for every endpoint") {
    for (const Dataset& d : {fixtures::binary_doses(), fixtures::continuous_doses(), fixtures::count_pairwise()}) {
      const std::string csv = write_long_csv(d);
      Dataset back = read_long_csv(csv, d.endpoint());
      CHECK(back.endpoint() == d.endpoint());
      CHECK(write_long_csv(back) == csv);
    }
  }

  TEST_CASE("long CSV endpoint mismatch is a configuration error") {
    const std::string csv = write_long_csv(fixtures::continuous_pairwise());
    CHECK_THROWS_AS(read_long_csv(csv, Endpoint::binary), ConfigError);
    CHECK(read_long_csv(csv).endpoint() == Endpoint::continuous);
  }

  TEST_CASE("arm variable parsing") {
    ArmVars v = ArmVars::parse(" responders = r , sampleSize=n ");
    CHECK(v.prefixes.at(ArmRole::responders) == "r");
    CHECK(v.prefixes.at(ArmRole::sample_size) == "n");
    CHECK_THROWS_AS(ArmVars::parse("responders"), ConfigError);
    CHECK_THROWS_AS(ArmVars::parse("weight=w"), ConfigError);
  }
}
