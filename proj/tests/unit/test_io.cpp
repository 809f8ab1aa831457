#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "diqkd/errors.hpp"
#include "diqkd/io.hpp"
#include "diqkd/reference_data.hpp"

using namespace diqkd;
using nlohmann::json;

namespace {

std::string table3_path() { return std::string(DIQKD_DATA_DIR) + "/table3_counts.csv"; }

std::string one_fiber_csv() {
  std::ostringstream os;
  io::write_counts_csv(os, {{20, 0.0137, reference::fiber_run(20).counts}});
  return os.str();
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("shipped count file matches the reference tables") {
  const auto records = io::read_counts_csv_file(table3_path());
  REQUIRE(records.size() == 3);
  for (const auto& r : records) {
    const auto& ref = reference::fiber_run(r.fiber_m);
    CHECK(r.counts.counts == ref.counts.counts);
    CHECK(r.mean_photon == ref.mean_photon);
  }
  CHECK(io::select_fiber(records, 80).fiber_m == 80);
  CHECK_THROWS_AS(io::select_fiber(records, 50), DataError);
}

TEST_CASE("count CSV round trip") {
  std::istringstream in(one_fiber_csv());
  const auto back = io::read_counts_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].counts.counts == reference::fiber_run(20).counts.counts);
  CHECK(one_fiber_csv().rfind(io::kCountHeader, 0) == 0);
}

TEST_CASE("malformed count files") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return io::read_counts_csv(in);
  };
  const std::string header = std::string(io::kCountHeader) + "\n";
  CHECK_THROWS_AS(parse(""), DataError);
  CHECK_THROWS_AS(parse(header), DataError);
  CHECK_THROWS_AS(parse("fiber,x\n1,2\n"), DataError);
  CHECK_THROWS_AS(parse(header + "20,0.01,1,1,5,5,5\n"), DataError);
  CHECK_THROWS_AS(parse(header + "20,0.01,3,1,5,5,5,5\n"), DataError);
  CHECK_THROWS_AS(parse(header + "20,0.01,1,1,-5,5,5,5\n"), DataError);
  CHECK_THROWS_AS(parse(header + "20,0.01,1,1,abc,5,5,5\n"), DataError);

  // Dropping one setting leaves the table incomplete.
  std::string text = one_fiber_csv();
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  const std::string msg = error_of([&] { parse(text); });
  CHECK(msg.find("(2,3)") != std::string::npos);

  // A duplicated row is rejected too.
  std::string dup = one_fiber_csv();
  dup += dup.substr(dup.find('\n') + 1, dup.find('\n', dup.find('\n') + 1) - dup.find('\n'));
  CHECK_THROWS_AS(parse(dup), DataError);
}

TEST_CASE("behavior JSON round trip") {
  const Behavior b = reference::estimated_behavior(reference::fiber_run(80));
  const std::string text = io::behavior_to_json(b);
  const Behavior back = io::behavior_from_json(text);
  for (int k = 0; k < kBehaviorSize; ++k) CHECK(back.table()[k] == b.table()[k]);
  const json j = json::parse(text);
  CHECK(j["behavior"].contains("P(0,0|1,3)"));
  CHECK(j["behavior"].size() == 24);
  // The bare object is accepted too.
  const Behavior bare = io::behavior_from_json(j["behavior"].dump());
  CHECK(bare.table() == b.table());
  CHECK(io::probability_key(1, 0, 1, 2) == "P(1,0|2,3)");

  json broken = j["behavior"];
  broken.erase("P(1,1|2,2)");
  CHECK(error_of([&] { io::behavior_from_json(broken.dump()); }).find("P(1,1|2,2)") !=
        std::string::npos);
  CHECK_THROWS_AS(io::behavior_from_json("not json"), DataError);
}

TEST_CASE("model JSON") {
  const SpdcParams m = reference::model_20m();
  const SpdcParams back = io::spdc_params_from_json(io::spdc_params_to_json(m));
  CHECK(back.r == doctest::Approx(m.r).epsilon(1e-14));
  CHECK(back.visibility == doctest::Approx(m.visibility).epsilon(1e-14));
  CHECK(back.max_pairs == m.max_pairs);
  for (int i = 0; i < 3; ++i) CHECK(back.angles_b[i] == doctest::Approx(m.angles_b[i]).epsilon(1e-12));

  json j = json::parse(io::spdc_params_to_json(m));
  j.erase("max_pairs");
  CHECK(io::spdc_params_from_json(j.dump()).max_pairs == 3);
  j.erase("eta_b");
  CHECK(error_of([&] { io::spdc_params_from_json(j.dump()); }).find("eta_b") != std::string::npos);
  CHECK_THROWS_AS(io::spdc_params_from_json(j.dump()), ConfigError);
}

TEST_CASE("report and certificate JSON") {
  const Behavior t4 = reference::estimated_behavior(reference::fiber_run(20));
  BffConfig c;
  c.m = 2;
  c.level = npa::LevelSpec::parse("2");
  KeyRateReport r = evaluate_rate(t4, Scenario{}, {0.96, 0.13}, c, 1.0);
  attach_confidence(r, Scenario{}, 0.01, 1.44e9);
  r.source = "20m";
  const json j = json::parse(io::report_to_json(r));
  CHECK(j["rate"].get<double>() == r.rate);
  CHECK(j["source"] == "20m");
  CHECK(j["bound"]["nodes"].size() == 1);
  CHECK(j["confidence"]["delta"].get<double>() == r.delta);
  CHECK(j["fingerprint"] == r.fingerprint);

  const json cert = json::parse(io::certificate_to_json(r.entropy.dual));
  CHECK(cert["lambda"].size() == 24);
  CHECK(cert["collins_gisin"]["gamma"].size() == 11);
  // The exported coefficients reproduce the bound.
  double g = cert["alpha"].get<double>();
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 3; ++y) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          g += cert["lambda"][io::probability_key(a, b, x, y)].get<double>() * t4(a, b, x, y);
        }
      }
    }
  }
  CHECK(std::abs(g - r.entropy.bound) < 1e-5);
}

TEST_CASE("file helpers") {
  CHECK_THROWS_AS(io::read_file("/nonexistent/file"), ConfigError);
  CHECK_THROWS_AS(io::write_file("/nonexistent/dir/file", "x"), ConfigError);
}
