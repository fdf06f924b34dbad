#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tac/costmodel.hpp"

using namespace tac::cost;

TEST_CASE("no compression has no compute") {
  CostParams p;
  p.fetch_fraction = 0.0;
  const auto c = yearly_cost(p, OperationalModel::no_compression);
  CHECK(c.compute_cost == 0.0);
  CHECK(c.total == c.storage_cost);
}

TEST_CASE("storage follows the triangular accumulation rule") {
  CostParams p;
  const double gb = 200.0 * 300 * 2 * 8760 * 3600 / 1e9;
  CHECK(yearly_cost(p, OperationalModel::no_compression).storage_cost == doctest::Approx(0.02 * 12 * gb / 2));
  CHECK(yearly_cost(p, OperationalModel::lossless).storage_cost == doctest::Approx(0.02 * 12 * gb / 2 / 2.7));
}

TEST_CASE("default scenario savings") {
  const CostParams p;
  const double raw = yearly_cost(p, OperationalModel::no_compression).total;
  const double ddu = yearly_cost(p, OperationalModel::dynamic_deep_uncompressed).total;
  CHECK(ddu <= 0.1 * raw);
  CostParams cheap = p;
  cheap.compute_price = 0.0;
  const double ll = yearly_cost(cheap, OperationalModel::lossless).total;
  CHECK(std::abs((1.0 - ll / raw) - 0.63) <= 0.05);
}

TEST_CASE("ordering of the operational models") {
  const CostParams p;
  const double a = yearly_cost(p, OperationalModel::no_compression).total;
  const double b = yearly_cost(p, OperationalModel::lossless).total;
  const double c = yearly_cost(p, OperationalModel::dynamic_deep).total;
  const double d = yearly_cost(p, OperationalModel::dynamic_deep_uncompressed).total;
  CHECK(a >= b);
  CHECK(b >= c);
  CHECK(c >= d);
}

TEST_CASE("task decompression term") {
  const CostParams p;
  const double dd = yearly_cost(p, OperationalModel::dynamic_deep).compute_cost;
  const double ddu = yearly_cost(p, OperationalModel::dynamic_deep_uncompressed).compute_cost;
  const double full = p.segments_per_year() / p.decompress_throughput * p.compute_price;
  CHECK(dd - ddu == doctest::Approx(full).epsilon(1e-12));
}

TEST_CASE("sensitivity and homogeneity") {
  const CostParams p;
  const auto by_cg = cost_sensitivity(p, OperationalModel::dynamic_deep, "avg_cg", {2, 4, 8, 16, 32, 64, 128});
  for (std::size_t i = 1; i < by_cg.size(); ++i) CHECK(by_cg[i].second.total <= by_cg[i - 1].second.total);
  const auto by_x =
      cost_sensitivity(p, OperationalModel::dynamic_deep_uncompressed, "fetch_fraction", {0, 0.1, 0.2, 0.5, 1.0});
  for (std::size_t i = 1; i < by_x.size(); ++i) CHECK(by_x[i].second.total >= by_x[i - 1].second.total);
  for (auto m : kAllModels) {
    const auto beds = cost_sensitivity(p, m, "n_beds", {200, 400});
    CHECK(beds[1].second.total == doctest::Approx(2 * beds[0].second.total).epsilon(1e-12));
  }
  CHECK_THROWS(cost_sensitivity(p, OperationalModel::lossless, "rack_units", {1}));
}

TEST_CASE("invalid parameters") {
  CostParams p;
  p.cg_dynamic_deep = 0.0;
  CHECK_THROWS_AS(yearly_cost(p, OperationalModel::dynamic_deep), std::domain_error);
  p = CostParams{};
  p.fetch_fraction = 1.5;
  CHECK_THROWS(yearly_cost(p, OperationalModel::no_compression));
  p = CostParams{};
  p.n_beds = -1;
  CHECK_THROWS(p.validate());
}

TEST_CASE("config files") {
  const auto dir = std::filesystem::temp_directory_path() / "tac_cost_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "p.conf");
    f << "# scenario\nn_beds = 50\navg_cg = 30  # measured\n";
  }
  auto p = read_params((dir / "p.conf").string());
  CHECK(p.n_beds == 50);
  CHECK(p.cg_dynamic_deep_uncompressed == 30);
  {
    std::ofstream f(dir / "p.json");
    f << to_json(p).dump();
  }
  CHECK(read_params((dir / "p.json").string()).n_beds == 50);
  {
    std::ofstream f(dir / "bad.conf");
    f << "n_beds = many\n";
  }
  CHECK_THROWS_WITH(read_params((dir / "bad.conf").string()), doctest::Contains(":1:"));
  std::filesystem::remove_all(dir);
}
