#include <vector>

#include "doctest.h"
#include "tac/core.hpp"

using namespace tac;

TEST_CASE("average_cg of a 75/25 mix of cg 32 and identity") {
  std::vector<int> cgs;
  for (int i = 0; i < 75; ++i) cgs.push_back(32);
  for (int i = 0; i < 25; ++i) cgs.push_back(1);
  CHECK(average_cg(cgs) == 24.25);
}

TEST_CASE("average_cg basics") {
  std::vector<int> same(10, 64);
  CHECK(average_cg(same) == 64.0);
  std::vector<int> one{1};
  CHECK(average_cg(one) == 1.0);
  CHECK_THROWS_AS(average_cg(std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("level specs") {
  const auto l = LevelSpec::make(32, 1024);
  CHECK(l.latent_len == 32);
  CHECK_FALSE(l.is_identity);
  const auto id = LevelSpec::make(1, 1024);
  CHECK(id.is_identity);
  CHECK(id.latent_len == 1024);
  CHECK_THROWS(LevelSpec::make(0, 1024));
}

TEST_CASE("level set validation") {
  const std::vector<int> good{1, 64, 32};
  const auto set = make_level_set(good, 1024);
  REQUIRE(set.size() == 3);
  CHECK(set[0].cg == 64);
  CHECK(set[2].cg == 1);

  std::vector<LevelSpec> bad{LevelSpec{64, 1000 / 64, false}, LevelSpec{1, 1000, true}};
  try {
    validate_level_set(bad, 1000);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("M not divisible by 64") != std::string::npos);
  }
  const std::vector<int> no_identity{64, 32};
  CHECK_THROWS_WITH_AS(make_level_set(no_identity, 1024), doctest::Contains("missing identity level"),
                       std::invalid_argument);
  const std::vector<int> dup{32, 32, 1};
  CHECK_THROWS_WITH_AS(make_level_set(dup, 1024), doctest::Contains("duplicate cg"), std::invalid_argument);
}

TEST_CASE("segment validation") {
  Segment s;
  s.samples.assign(1024, 0.5f);
  s.sample_rate = 128;
  CHECK_NOTHROW(validate_segment(s, 64));
  s.peak_positions = std::vector<int>{10, 5};
  CHECK_THROWS(validate_segment(s, 64));
  s.peak_positions = std::vector<int>{10, 2000};
  CHECK_THROWS(validate_segment(s, 64));
  s.peak_positions.reset();
  s.samples.resize(1000);
  CHECK_THROWS(validate_segment(s, 64));
  s.samples.clear();
  CHECK_THROWS(validate_segment(s, 64));
}

TEST_CASE("class ids round trip") {
  for (int i = 0; i < kNumClasses; ++i) {
    const auto c = class_from_int(i);
    CHECK(class_from_string(to_string(c)) == c);
  }
  CHECK_THROWS(class_from_int(4));
  CHECK_THROWS(class_from_string("sinus"));
}

TEST_CASE("bound config validation") {
  BoundConfig b;
  CHECK_NOTHROW(b.validate());
  b.upper_bound = -1;
  CHECK_THROWS(b.validate());
  b = BoundConfig{};
  b.task_weights["hr_classify"] = -0.5;
  CHECK_THROWS(b.validate());
  b.task_weights = {{"hr_classify", 0.0}, {"rr_peaks", 0.0}};
  CHECK_THROWS(b.validate());
  b.task_weights["rr_peaks"] = 0.2;
  CHECK_NOTHROW(b.validate());
}
