#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "nlsid/ingest.hpp"

using namespace nlsid;
namespace ingest = nlsid::ingest;
namespace fs = std::filesystem;

namespace {

ingest::FlowConditions paper_conditions() {
  ingest::FlowConditions cond;
  cond.diameter = 0.1;
  cond.free_stream_velocity = 1.7964;
  cond.density = 1.0;
  cond.domain_height = 3.0;  // D/H = 1/30
  cond.mean_drag_coefficient = 1.331;
  return cond;
}

fs::path write_csv(const char* name, const std::string& body) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("force coefficient arithmetic") {
  const ingest::FlowConditions cond = paper_conditions();
  const double q = 0.5 * cond.density * cond.free_stream_velocity * cond.free_stream_velocity *
                   cond.diameter;
  CHECK(ingest::force_coefficient(q, cond) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ingest::force_coefficient(0.0, cond) == 0.0);
  CHECK(ingest::force_coefficient(0.3228, cond) == doctest::Approx(2.0).epsilon(1e-3));
  // Doubling the velocity quarters the coefficient for a fixed force.
  ingest::FlowConditions fast = cond;
  fast.free_stream_velocity *= 2.0;
  CHECK(ingest::force_coefficient(q, fast) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("strouhal frequency") {
  CHECK(ingest::strouhal_frequency(0.167, 0.1, 1.7964) == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(ingest::strouhal_frequency(0.0, 0.1, 1.0) == 0.0);
  const double f = ingest::strouhal_frequency(0.21, 0.05, 2.0);
  CHECK(f * 0.05 / 2.0 == doctest::Approx(0.21).epsilon(1e-12));
}

TEST_CASE("blockage corrections at D/H = 1/30") {
  const ingest::FlowConditions cond = paper_conditions();
  CHECK(ingest::blockage_correct_velocity(cond) / cond.free_stream_velocity ==
        doctest::Approx(1.01200).epsilon(1e-5));
  CHECK(ingest::blockage_correct_drag(cond) == doctest::Approx(1.2978).epsilon(2e-4));

  // Degenerate blockage: corrections vanish.
  ingest::FlowConditions open = cond;
  open.domain_height = 1e9;
  CHECK(ingest::blockage_correct_velocity(open) ==
        doctest::Approx(open.free_stream_velocity).epsilon(1e-9));
  CHECK(ingest::blockage_correct_drag(open) ==
        doctest::Approx(open.mean_drag_coefficient).epsilon(1e-9));
  CHECK(ingest::blockage_correct_velocity(cond) > cond.free_stream_velocity);
}

TEST_CASE("velocity-based drag correction approximates the direct formula") {
  // Computing the drag with the corrected velocity, c_d (U/U')^2, stays
  // within 2% of the direct correction at D/H = 1/30.
  const ingest::FlowConditions cond = paper_conditions();
  const double ratio = cond.free_stream_velocity / ingest::blockage_correct_velocity(cond);
  const double via_velocity = cond.mean_drag_coefficient * ratio * ratio;
  const double direct = ingest::blockage_correct_drag(cond);
  CHECK(std::abs(via_velocity - direct) / direct < 0.02);
}

TEST_CASE("corrected reynolds number is exposed") {
  const ingest::FlowConditions cond = paper_conditions();
  const double nu = ingest::blockage_correct_velocity(cond) * cond.diameter / 101.0;
  CHECK(ingest::corrected_reynolds(cond, nu) == doctest::Approx(101.0).epsilon(1e-9));
}

TEST_CASE("uniform resampling at the native rate is the identity") {
  std::string body = "time,input,output\n";
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<double> values;
  char buf[128];
  for (int i = 0; i < 100; ++i) {
    const double v = uniform(rng);
    values.push_back(v);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", i / 50.0, v, 2.0 * v);
    body += buf;
  }
  const fs::path path = write_csv("nlsid_uniform.csv", body);
  const TimeSeries ts = ingest::load_external_csv(path.string(), 50.0);
  REQUIRE(ts.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(std::abs(ts.input[i] - values[i]) < 1e-12);
    CHECK(std::abs(ts.output[i] - 2.0 * values[i]) < 1e-12);
  }
  fs::remove(path);
}

TEST_CASE("variable-step records match the piecewise-linear interpolant") {
  // Irregular grid from a variable-step solver; value = 3t + 1 so linear
  // interpolation is exact at any query time.
  std::string body = "time,input\n";
  double t = 0.0;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> step(1e-3, 3e-2);
  char buf[64];
  while (t < 2.0) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t, 3.0 * t + 1.0);
    body += buf;
    t += step(rng);
  }
  const fs::path path = write_csv("nlsid_varstep.csv", body);
  const TimeSeries ts = ingest::load_external_csv(path.string(), 50.0);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double ti = static_cast<double>(i) / 50.0;
    CHECK(ts.input[i] == doctest::Approx(3.0 * ti + 1.0).epsilon(1e-12));
  }
  fs::remove(path);
}

TEST_CASE("non-monotone time column is rejected with the row number") {
  const fs::path path =
      write_csv("nlsid_nonmono.csv", "time,input\n0,1\n0.1,2\n0.05,3\n0.2,4\n");
  try {
    ingest::load_external_csv(path.string(), 50.0);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("row 4") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("flow condition validation") {
  ingest::FlowConditions cond = paper_conditions();
  CHECK_NOTHROW(cond.validate());
  cond.density = 0.0;
  CHECK_THROWS_AS(cond.validate(), std::invalid_argument);
}
