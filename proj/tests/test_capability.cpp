#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include <gridsi/capability.hpp>

#include "support.hpp"

using namespace gridsi;

namespace {

bool throws_with(const std::function<void()>& fn, const std::string& needle) {
  try {
    fn();
  } catch (const InputError& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_SUITE("capability") {

TEST_CASE("csv parsing accepts headers, skips blanks, keeps all columns") {
  MeasurementSet ms = load_measurements(
      "time_s,freq_dev_hz,rocof_hz_s\n"
      "0.0,0.2,0.01\n"
      "\n"
      "0.5,-0.1,0.04\n");
  REQUIRE(ms.size() == 2);
  CHECK(ms.time[1] == 0.5);
  CHECK(ms.omega[0] == 0.2);
  CHECK(ms.rocof[1] == 0.04);

  // the header row is mandatory; bare numbers are rejected
  CHECK(throws_with([] { load_measurements("0,0.2,0.01\n1,0.1,-0.02\n"); }, "header"));

  // a shuffled column order is resolved by name
  MeasurementSet shuffled =
      load_measurements("rocof_hz_s,time_s,freq_dev_hz\n0.01,0.0,0.2\n");
  CHECK(shuffled.rocof[0] == 0.01);
  CHECK(shuffled.omega[0] == 0.2);
}

TEST_CASE("a missing rocof column is rebuilt by central differences") {
  // a linear frequency ramp has exactly constant rocof, including at the
  // one-sided ends
  std::string text = "time_s,freq_dev_hz\n";
  for (int i = 0; i < 6; ++i)
    text += std::to_string(0.5 * i) + "," + std::to_string(0.1 - 0.04 * (0.5 * i)) + "\n";
  MeasurementSet ms = load_measurements(text);
  REQUIRE(ms.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(ms.rocof[i] == doctest::Approx(-0.04).epsilon(1e-9));

  // quadratic deviation: central differences are exact at interior points
  std::string quad = "time_s,freq_dev_hz\n";
  for (int i = 0; i < 5; ++i) {
    double t = 0.25 * i;
    quad += std::to_string(t) + "," + std::to_string(0.3 * t * t) + "\n";
  }
  MeasurementSet mq = load_measurements(quad);
  for (int i = 1; i < 4; ++i)
    CHECK(mq.rocof[i] == doctest::Approx(0.6 * (0.25 * i)).epsilon(1e-9));
}

TEST_CASE("csv errors carry the offending location") {
  CHECK(throws_with([] { load_measurements(""); }, "empty"));
  CHECK(throws_with([] { load_measurements("time_s,freq_dev_hz\n"); }, "no data rows"));
  CHECK(throws_with([] { load_measurements("time_s,freq_dev_hz\n0,abc\n"); }, "row"));
  CHECK(throws_with(
      [] { load_measurements("time_s,freq_dev_hz,rocof_hz_s\n0,0.1,0.2\n1,0.1\n"); },
      "columns"));
  CHECK(throws_with([] { load_measurements("time_s,freq_dev_hz\n1,0.1\n1,0.2\n"); },
                    "increasing"));
  CHECK(throws_with([] { load_measurements("time_s,freq_dev_hz\n1,0.1\n"); }, "single"));
}

TEST_CASE("single-sample fit reproduces the hand calculation") {
  MeasurementSet one;
  one.time = {0.0};
  one.omega = {0.2};
  one.rocof = {0.01};
  CapabilityBall ball = fit_norm_ball(one, NormOrder::One, 1.0 / 20.0, 1.0);
  CHECK(ball.c == doctest::Approx(0.2 / 20.0 + 0.01).epsilon(1e-15));
  CHECK(!ball.floored);

  CapabilityBall binf = fit_norm_ball(one, NormOrder::Inf, 1.0 / 20.0, 1.0);
  CHECK(binf.c == doctest::Approx(0.01).epsilon(1e-15));
  CapabilityBall b2 = fit_norm_ball(one, NormOrder::Two, 1.0 / 20.0, 1.0);
  CHECK(b2.c == doctest::Approx(std::hypot(0.01, 0.01)).epsilon(1e-12));
}

TEST_CASE("coverage picks the exact sample quantile") {
  MeasurementSet ms;
  // p = 1, h = 1 norms are exactly 1..9, in scrambled order
  for (int k : {4, 9, 1, 7, 3, 8, 2, 6, 5}) {
    ms.time.push_back(static_cast<double>(ms.time.size()));
    ms.omega.push_back(k * 0.5);
    ms.rocof.push_back(k * 0.5);
  }
  auto c_at = [&](double cov) { return fit_norm_ball(ms, NormOrder::One, 1.0, cov).c; };
  CHECK(c_at(1.0) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(c_at(0.5) == doctest::Approx(5.0).epsilon(1e-15));   // ceil(4.5) = 5th smallest
  CHECK(c_at(1.0 / 9.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c_at(0.999) == doctest::Approx(9.0).epsilon(1e-15));

  CHECK_THROWS_AS(fit_norm_ball(ms, NormOrder::One, 1.0, 0.0), InputError);
  CHECK_THROWS_AS(fit_norm_ball(ms, NormOrder::One, 1.0, 1.5), InputError);
  CHECK_THROWS_AS(fit_norm_ball(ms, NormOrder::One, -2.0, 1.0), InputError);
  CHECK_THROWS_AS(fit_norm_ball(MeasurementSet{}, NormOrder::One, 1.0, 1.0), InputError);
}

TEST_CASE("a degenerate cloud floors the radius instead of collapsing") {
  MeasurementSet ms;
  ms.time = {0.0, 1.0};
  ms.omega = {0.0, 0.0};
  ms.rocof = {0.0, 0.0};
  CapabilityBall ball = fit_norm_ball(ms, NormOrder::Two, 1.0, 1.0);
  CHECK(ball.floored);
  CHECK(ball.c == 1e-9);
}

TEST_CASE("growing the cloud never shrinks the fitted ball") {
  std::mt19937 rng(101);
  std::normal_distribution<double> g(0.0, 0.1);
  MeasurementSet ms;
  double prev = 0.0;
  for (int i = 0; i < 40; ++i) {
    ms.time.push_back(i);
    ms.omega.push_back(g(rng));
    ms.rocof.push_back(g(rng));
    if (i >= 4 && i % 5 == 0) {
      double c = fit_norm_ball(ms, NormOrder::Two, 2.0, 1.0).c;
      CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("dual orders pair up and scale by capacity over radius") {
  CapabilityBall ball;
  ball.h = 2.0;
  ball.c = 0.7;

  ball.p = NormOrder::One;
  GainConstraint g1 = dual_constraint(ball, 1.3);
  CHECK(g1.q == NormOrder::Inf);
  CHECK(g1.h == 2.0);
  CHECK(g1.bound == doctest::Approx(1.3 / 0.7).epsilon(1e-15));

  ball.p = NormOrder::Two;
  CHECK(dual_constraint(ball, 1.3).q == NormOrder::Two);
  ball.p = NormOrder::Inf;
  CHECK(dual_constraint(ball, 1.3).q == NormOrder::One);

  CHECK_THROWS_AS(dual_constraint(CapabilityBall{}, 1.0), InputError);  // c = 0
}

TEST_CASE("gain norms follow the dual order") {
  GainConstraint g;
  g.h = 2.0;
  g.bound = 1.0;

  g.q = NormOrder::One;
  CHECK(g.gain_norm(0.3, 0.8) == doctest::Approx(0.3 + 0.4).epsilon(1e-15));
  g.q = NormOrder::Two;
  CHECK(g.gain_norm(0.3, 0.8) == doctest::Approx(std::hypot(0.3, 0.4)).epsilon(1e-15));
  g.q = NormOrder::Inf;
  CHECK(g.gain_norm(0.3, 0.8) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(g.contains(0.3, 0.8));
  CHECK(!g.contains(2.3, 0.8));
}

TEST_CASE("dual feasibility is tight for every norm order") {
  for (NormOrder p : {NormOrder::One, NormOrder::Two, NormOrder::Inf}) {
    CapabilityBall ball;
    ball.p = p;
    ball.h = 2.0;
    ball.c = 0.7;
    const double p_bar = 1.3;
    GainConstraint gc = dual_constraint(ball, p_bar);
    DualityReport rep = verify_duality(gc, ball, p_bar, 400, ExecMode::Serial);
    CAPTURE(norm_name(p));
    CHECK(rep.tight);
    CHECK(rep.worst_rel_err <= 1e-6);
    CHECK(rep.max_power == doctest::Approx(p_bar).epsilon(1e-9));
    CHECK(rep.inflated_violates);
  }
}

TEST_CASE("shrunken gains stay strictly inside the power rating") {
  CapabilityBall ball;
  ball.p = NormOrder::Two;
  ball.h = 1.5;
  ball.c = 1.1;
  GainConstraint gc = dual_constraint(ball, 2.0);

  // half-scale gains reach exactly half the rated power at the worst point
  GainConstraint half = gc;
  half.bound = gc.bound / 2.0;
  DualityReport rep = verify_duality(half, ball, 1.0, 300, ExecMode::Serial);
  CHECK(rep.tight);
  CHECK(rep.max_power == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("norm names round trip") {
  CHECK(norm_name(NormOrder::One) == "1");
  CHECK(norm_name(NormOrder::Two) == "2");
  CHECK(norm_name(NormOrder::Inf) == "inf");
  CHECK(norm_from_string("1") == NormOrder::One);
  CHECK(norm_from_string("2") == NormOrder::Two);
  CHECK(norm_from_string("inf") == NormOrder::Inf);
  CHECK_THROWS_AS(norm_from_string("3"), InputError);
}

TEST_CASE("the shipped sample measurement file loads") {
  MeasurementSet ms = load_measurements_file(testutil::data_path("measurements_sample.csv"));
  CHECK(ms.size() == 13);
  CHECK(ms.time.front() == 0.0);
  CHECK(ms.time.back() == 6.0);
  CapabilityBall ball = fit_norm_ball(ms, NormOrder::Two, 1.0, 0.9);
  CHECK(ball.c > 0.0);
  CHECK(!ball.floored);
}

}  // TEST_SUITE
