#include "doctest.h"

#include <string>

#include "divker/config.hpp"
#include "divker/errors.hpp"

using namespace divker;

TEST_CASE("round trip is lossless") {
  RunConfig c = preset("lorenz96");
  c.dt = 0.1 / 3.0;
  c.total_time = 0.1;
  c.init_value = 1.0 / 7.0;
  c.seed = 18446744073709551615ULL;
  c.cap = 1e4;
  c.dump_paths = 3;
  const std::string text = serialize_config(c);
  CHECK(parse_config(text) == c);
  CHECK(serialize_config(parse_config(text)) == text);
}

TEST_CASE("comments, whitespace and layering") {
  const RunConfig c = parse_config("# header\n  T = 0.5   # short\n\nestimator=sde-div\n",
                                   preset("ou-kernel"));
  CHECK(c.total_time == 0.5);
  CHECK(c.estimator == "sde-div");
  CHECK(c.model_noise == "unit");
}

TEST_CASE("every offending key is listed") {
  try {
    parse_config("bogus = 1\nT = abc\nmodel = vdp\nno equals sign\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(e.problems().size() == 4);
    CHECK(e.problems()[0].find("bogus") != std::string::npos);
    CHECK(e.problems()[1].find("T") != std::string::npos);
    CHECK(e.problems()[2].find("vdp") != std::string::npos);
    CHECK(e.problems()[3].find("line 4") != std::string::npos);
  }
}

TEST_CASE("cross-field validation") {
  RunConfig c;
  c.dt = 0.007;
  c.alpha = "const:-1";
  c.init = "point";
  c.estimator = "sde-divker";
  c.bins_lo = 2;
  try {
    validate_config(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.problems().size() == 4);
  }
  for (const auto& name : preset_names()) CHECK_NOTHROW(validate_config(preset(name)));
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}
