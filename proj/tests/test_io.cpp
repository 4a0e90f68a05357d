#include <gtest/gtest.h>

#include "instances.hpp"
#include "sbolza/io.hpp"

using namespace sbolza;
using io::json;

namespace {

std::string data(const std::string& name) { return std::string(SBOLZA_TEST_DATA) + "/" + name; }

}  // namespace

TEST(Fnv1a, KnownValues) {
  EXPECT_EQ(io::hex64(io::fnv1a("")), "cbf29ce484222325");
  EXPECT_EQ(io::hex64(io::fnv1a("a")), "af63dc4c8601ec8c");
}

TEST(Numbers, InfinitiesAreStrings) {
  EXPECT_EQ(io::number(std::numeric_limits<double>::infinity()), json("inf"));
  EXPECT_EQ(io::number(-std::numeric_limits<double>::infinity()), json("-inf"));
  EXPECT_TRUE(std::isinf(io::number_from(json("-inf"), "/x")));
  EXPECT_THROW(io::number_from(json("nan"), "/x"), io::ParseError);
  EXPECT_EQ(io::to_json(ExtReal::pos_inf()), json("inf"));
}

TEST(Numbers, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(io::number_from(io::number(v), "/x"), v);
}

TEST(Parse, MalformedJsonReportsOffset) {
  try {
    io::parse("{\"a\": [1, 2,, 3]}");
    FAIL();
  } catch (const io::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("byte 13"), std::string::npos) << e.what();
  }
}

TEST(Parse, SchemaVersionMismatch) {
  json j = io::read_file(data("quad.json"));
  j["schema_version"] = 9;
  EXPECT_THROW(io::check_version(j), io::ParseError);
  EXPECT_THROW(io::bolza_from_json(j), io::ParseError);
}

TEST(Parse, ErrorsCarryThePath) {
  json j = io::read_file(data("quad.json"));
  j["xi"] = json::array({1.0, 2.0});
  try {
    io::bolza_from_json(j);
    FAIL();
  } catch (const io::ParseError& e) {
    EXPECT_EQ(e.path().rfind("/xi", 0), 0u) << e.what();
  }
}

TEST(RoundTrip, BolzaFile) {
  const json j = io::read_file(data("quad.json"));
  const bolza::BolzaProblem p = io::bolza_from_json(j);
  EXPECT_EQ(io::dump(io::to_json(p)), io::dump(io::to_json(io::bolza_from_json(io::to_json(p)))));
  EXPECT_NEAR(bolza::solve_primal(p).optimal_value.value(), 2.0, 1e-9);
}

TEST(RoundTrip, DualProblem) {
  const bolza::DualBolzaProblem d = bolza::dualize(sbolza::testing::quad_problem());
  const json j = io::to_json(d);
  EXPECT_EQ(io::dump(j), io::dump(io::to_json(io::dual_from_json(j))));
}

TEST(RoundTrip, LinearQuadraticAndLinearConvex) {
  for (const char* f : {"one_step.json", "one_step_noise.json"}) {
    const lcontrol::LQProblem q = io::lq_from_json(io::read_file(data(f)));
    EXPECT_EQ(io::dump(io::to_json(q)), io::dump(io::to_json(io::lq_from_json(io::to_json(q))))) << f;
  }
  const lcontrol::LCProblem lc = io::lc_from_json(io::read_file(data("lc_box.json")));
  EXPECT_EQ(io::dump(io::to_json(lc)), io::dump(io::to_json(io::lc_from_json(io::to_json(lc)))));
}

TEST(RoundTrip, RandomLinearQuadratic) {
  for (int i = 0; i < 20; ++i) {
    const lcontrol::LQProblem q = sbolza::testing::random_lq(99, i);
    const json j = io::to_json(q);
    EXPECT_EQ(io::dump(j), io::dump(io::to_json(io::lq_from_json(j)))) << i;
  }
}

TEST(RoundTrip, StructuredFunctions) {
  auto rng = sbolza::testing::make_rng(12, 0);
  for (int i = 0; i < 50; ++i) {
    const convexcalc::StructuredConvex f = sbolza::testing::random_structured(rng, 1 + i % 3);
    const json j = io::to_json(f);
    EXPECT_EQ(io::dump(j), io::dump(io::to_json(io::structured_from_json(j, "/f"))));
  }
}

TEST(RoundTrip, Process) {
  const lcontrol::LQProblem q = sbolza::testing::one_step_lq(true);
  const lcontrol::LQSolution s = lcontrol::lq_solve_characteristics(q, q.xi);
  const json j = io::to_json(s.traj.p);
  const probspace::AdaptedProcess p =
      io::process_from_json(j, "/p", s.traj.p.tree, probspace::Schedule::dual);
  EXPECT_EQ(io::dump(j), io::dump(io::to_json(p)));
}

TEST(Dump, SortedKeysAndStable) {
  const json j = json::parse(R"({"b": 1, "a": [2, "inf"]})");
  EXPECT_EQ(io::dump(j), io::dump(json::parse(io::dump(j))));
  EXPECT_LT(io::dump(j).find("\"a\""), io::dump(j).find("\"b\""));
}

TEST(Csv, TrajectoryRows) {
  const lcontrol::LQProblem q = sbolza::testing::one_step_lq(false);
  const lcontrol::LQSolution s = lcontrol::lq_solve_characteristics(q, q.xi);
  const std::string csv = io::trajectory_csv(s.traj.x, s.traj.p, &s.u);
  EXPECT_NE(csv.find("0,0,1,2,-2,-1"), std::string::npos) << csv;
  EXPECT_NE(csv.find("1,0,1,1,-2,"), std::string::npos) << csv;
}
