#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "tac/wire.hpp"

using namespace tac;
using namespace tac::wire;

#ifndef TAC_TEST_DATA
#define TAC_TEST_DATA "tests/data"
#endif

TEST_CASE("round trip is bitwise") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  CompressedRecord r;
  r.segment_id = 0xdeadbeef;
  r.cg = 32;
  r.latent.resize(32);
  for (auto& v : r.latent) v = u(rng);
  r.latent[3] = -0.0f;
  r.latent[4] = std::numeric_limits<float>::denorm_min();
  r.predicted_error = 0.123456789f;
  const auto bytes = serialize(r);
  CHECK(bytes.size() == kHeaderSize + 4 * 32);
  const auto back = deserialize(bytes);
  CHECK(back == r);
  CHECK(std::memcmp(back.latent.data(), r.latent.data(), 4 * 32) == 0);
  CHECK(std::signbit(back.latent[3]));
}

TEST_CASE("header layout") {
  CHECK(kHeaderSize == 4 + 1 + 4 + 2 + 4 + 4);
  CompressedRecord r;
  r.segment_id = 0x01020304;
  r.cg = 0x0506;
  r.predicted_error = 1.0f;
  const auto b = serialize(r);
  REQUIRE(b.size() == 19);
  const std::vector<std::uint8_t> want{'D', 'D', 'C', '1', 1, 4, 3, 2, 1, 6, 5, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f};
  CHECK(b == want);
}

TEST_CASE("golden file") {
  std::ifstream f(std::string(TAC_TEST_DATA) + "/golden_cg32.bin", std::ios::binary);
  REQUIRE(f.good());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 147);
  const auto r = deserialize(bytes);
  CHECK(r.segment_id == 4242);
  CHECK(r.cg == 32);
  CHECK(r.predicted_error == 0.3125f);
  REQUIRE(r.latent.size() == 32);
  for (int i = 0; i < 32; ++i) CHECK(r.latent[static_cast<std::size_t>(i)] == (i - 16) / 8.0f);
  CHECK(serialize(r) == bytes);
}

TEST_CASE("distinct errors") {
  CompressedRecord r;
  r.cg = 64;
  r.latent.assign(16, 0.5f);
  auto b = serialize(r);
  auto bad = b;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize(bad), BadMagic);
  bad = b;
  bad[4] = 2;
  CHECK_THROWS_AS(deserialize(bad), VersionMismatch);
  bad.assign(b.begin(), b.end() - 1);
  CHECK_THROWS_AS(deserialize(bad), Truncated);
  bad.assign(b.begin(), b.begin() + 10);
  CHECK_THROWS_AS(deserialize(bad), Truncated);
  bad = b;
  bad.push_back(0);
  CHECK_THROWS_AS(deserialize(bad), WireError);
}

TEST_CASE("streams") {
  std::vector<CompressedRecord> recs(3);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].segment_id = static_cast<std::uint32_t>(i);
    recs[i].cg = static_cast<std::uint16_t>(i == 2 ? 1 : 32);
    recs[i].latent.assign(i == 2 ? 1024 : 32, static_cast<float>(i));
  }
  const auto path = (std::filesystem::temp_directory_path() / "tac_stream.bin").string();
  write_stream(path, recs);
  CHECK(read_stream(path) == recs);
  std::filesystem::remove(path);
}
