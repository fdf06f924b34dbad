#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "tac/data.hpp"

using namespace tac;
namespace fs = std::filesystem;

TEST_CASE("generator is deterministic and respects its invariants") {
  data::GeneratorParams p;
  const auto a = data::generate_segment(p, ClassId::normal, 42, 3);
  const auto b = data::generate_segment(p, ClassId::normal, 42, 3);
  CHECK(a.samples == b.samples);
  CHECK(a.id == 3);
  CHECK(a.length() == p.segment_length);
  REQUIRE(a.peak_positions);
  const double gap = p.min_peak_gap_samples();
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = data::generate_segment(p, static_cast<ClassId>(c), seed);
      CHECK(*s.label == static_cast<ClassId>(c));
      const auto& pk = *s.peak_positions;
      REQUIRE(pk.size() >= 2);
      for (std::size_t i = 1; i < pk.size(); ++i) CHECK(pk[i] - pk[i - 1] >= gap);
      CHECK(pk.front() >= 0);
      CHECK(pk.back() < s.length());
      CHECK_NOTHROW(validate_segment(s, 64));
    }
  }
}

TEST_CASE("af-like rhythm is separable by rr-interval spread at zero noise") {
  data::GeneratorParams p;
  p.noise_amplitude = 0.0;
  double max_normal = 0.0, min_af = 1e9;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    max_normal = std::max(max_normal, data::rr_interval_std(*data::generate_segment(p, ClassId::normal, seed).peak_positions));
    min_af = std::min(min_af, data::rr_interval_std(*data::generate_segment(p, ClassId::af_like, seed).peak_positions));
  }
  CHECK(max_normal < min_af);
}

TEST_CASE("peaks sit on pulse maxima when noise is off") {
  data::GeneratorParams p;
  p.noise_amplitude = 0.0;
  p.baseline_wander_amplitude = 0.0;
  const auto s = data::generate_segment(p, ClassId::normal, 9);
  for (int pk : *s.peak_positions) {
    const float v = s.samples[static_cast<std::size_t>(pk)];
    if (pk > 0) CHECK(v >= s.samples[static_cast<std::size_t>(pk - 1)]);
    if (pk + 1 < s.length()) CHECK(v >= s.samples[static_cast<std::size_t>(pk + 1)]);
  }
}

TEST_CASE("dataset class mix and ids") {
  data::GeneratorParams p;
  const auto ds = data::generate_dataset(p, 400, 1);
  REQUIRE(ds.size() == 400);
  std::array<int, kNumClasses> counts{};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds[i].id == static_cast<std::int64_t>(i));
    ++counts[static_cast<std::size_t>(*ds[i].label)];
  }
  for (int c : counts) CHECK(std::abs(c - 100) < 40);
}

TEST_CASE("generator parameter validation") {
  data::GeneratorParams p;
  p.class_mix = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS(p.validate());
  p = data::GeneratorParams{};
  p.mean_rr = 0.0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("min-max normalisation") {
  std::vector<float> v{2.0f, 4.0f, 3.0f};
  data::normalize_minmax(v);
  CHECK(v[0] == 0.0f);
  CHECK(v[1] == 1.0f);
  CHECK(v[2] == doctest::Approx(0.5));
  std::vector<float> flat(5, 7.0f);
  data::normalize_minmax(flat);
  for (float x : flat) CHECK(x == 0.5f);
}

TEST_CASE("csv loading windows, labels and errors") {
  const auto dir = fs::temp_directory_path() / "tac_csv_test";
  fs::create_directories(dir);
  const auto path = (dir / "rec.csv").string();
  {
    std::ofstream f(path);
    f << "# comment\n";
    for (int i = 0; i < 300; ++i) f << (i % 7) << ",2\n";
  }
  const auto segs = data::load_csv(path, 128, 128.0, 64, 10);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].id == 10);
  CHECK(segs[1].id == 11);
  CHECK(*segs[0].label == ClassId::noisy);
  CHECK_FALSE(segs[0].peak_positions.has_value());
  for (float v : segs[0].samples) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  {
    std::ofstream f(path);
    f << "0.1\n0.2\nabc\n";
  }
  CHECK_THROWS_WITH(data::load_csv(path, 2, 128.0, 1), doctest::Contains("row 3"));
  CHECK_THROWS(data::load_csv((dir / "missing.csv").string(), 128, 128.0));
  fs::remove_all(dir);
}

TEST_CASE("split sizes and determinism") {
  data::GeneratorParams p;
  p.segment_length = 128;
  const auto ds = data::generate_dataset(p, 101, 3);
  const auto a = data::split_dataset(ds, {0.8, 0.1, 0.1}, 5);
  const auto b = data::split_dataset(ds, {0.8, 0.1, 0.1}, 5);
  CHECK(a.train.size() == 81);
  CHECK(a.validation.size() == 10);
  CHECK(a.test.size() == 10);
  std::set<std::int64_t> ids;
  for (const auto* part : {&a.train, &a.validation, &a.test})
    for (const auto& s : *part) ids.insert(s.id);
  CHECK(ids.size() == 101);
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].id == b.test[i].id);
  CHECK_THROWS(data::split_dataset(ds, {0.8, 0.3, 0.1}, 5));
}

TEST_CASE("manifest round trip") {
  const auto dir = fs::temp_directory_path() / "tac_manifest_test";
  fs::create_directories(dir);
  data::DatasetManifest m;
  m.synthetic_count = 20;
  m.segment_length = 256;
  m.seed = 9;
  data::write_manifest((dir / "m.json").string(), m);
  const auto back = data::read_manifest((dir / "m.json").string());
  CHECK(back.synthetic_count == 20);
  CHECK(back.segment_length == 256);
  const auto segs = data::load_segments(back);
  CHECK(segs.size() == 20);
  CHECK(segs[0].length() == 256);
  fs::remove_all(dir);
}
