#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "tac/data.hpp"
#include "tac/eval.hpp"

using namespace tac;
using namespace tac::eval;

TEST_CASE("violation rate") {
  const std::vector<double> ok{0.1, 0.75, 0.2};
  CHECK(violation_rate(ok, 0.75) == 0.0);
  const std::vector<double> some{0.5, 0.8, 0.9};
  CHECK(violation_rate(some, 0.75) == doctest::Approx(2.0 / 3.0));
  CHECK(violation_rate(some, 1e300) == 0.0);
  CHECK_THROWS(violation_rate(std::vector<double>{}, 0.5));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> r(100);
  for (auto& v : r) v = u(rng);
  double prev = 1.0;
  for (double b = 0.0; b <= 1.0; b += 0.05) {
    const double v = violation_rate(r, b);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("classification metrics") {
  const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  auto m = classification_metrics(labels, labels);
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.macro_precision == 1.0);
  CHECK(m.accuracy == 1.0);

  const std::vector<int> all_zero(8, 0);
  m = classification_metrics(all_zero, labels);
  CHECK(m.recall[0] == 1.0);
  CHECK(m.precision[0] == 0.25);
  CHECK(m.f1[0] == doctest::Approx(0.4));
  CHECK(m.f1[1] == 0.0);
  CHECK(m.macro_f1 == doctest::Approx(0.1));

  // Relabelling every class consistently leaves macro F1 unchanged.
  const std::vector<int> pred{0, 2, 2, 3, 1, 1, 0, 3};
  const int perm[] = {2, 0, 3, 1};
  std::vector<int> pl, ll;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pl.push_back(perm[pred[i]]);
    ll.push_back(perm[labels[i]]);
  }
  CHECK(classification_metrics(pl, ll).macro_f1 == doctest::Approx(classification_metrics(pred, labels).macro_f1));
  CHECK_THROWS(classification_metrics(pred, std::vector<int>{0, 1}));
  CHECK_THROWS(classification_metrics(std::vector<int>{5}, std::vector<int>{0}));
}

TEST_CASE("quartiles") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quartiles(v).median == 2.5);
  const std::vector<double> c(9, 3.0);
  const auto q = quartiles(c);
  CHECK(q.q1 == 3.0);
  CHECK(q.q3 == 3.0);
  CHECK_THROWS(quartiles(std::vector<double>{1, 2, 3}));
}

TEST_CASE("quartiles agree with a brute-force oracle") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> len(4, 60);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v) x = std::round(n(rng) * 4) / 4;  // ties included
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    auto oracle = [&](double p) {
      const double h = (static_cast<double>(sorted.size()) - 1) * p;
      const auto k = static_cast<std::size_t>(h);
      if (k + 1 >= sorted.size()) return sorted.back();
      return sorted[k] + (h - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
    };
    const auto q = quartiles(v);
    CHECK(q.q1 == doctest::Approx(oracle(0.25)).epsilon(1e-12));
    CHECK(q.median == doctest::Approx(oracle(0.5)).epsilon(1e-12));
    CHECK(q.q3 == doctest::Approx(oracle(0.75)).epsilon(1e-12));
    CHECK(q.q1 <= q.median);
    CHECK(q.median <= q.q3);
  }
}

TEST_CASE("lossless baseline") {
  std::vector<float> flat(1024, 0.5f);
  CHECK(lossless_cg(flat) > 10.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Segment> noise(20);
  for (auto& s : noise) {
    s.samples.resize(1024);
    for (auto& x : s.samples) x = u(rng);
  }
  const auto ns = lossless_baseline_cg(noise);
  CHECK(std::abs(ns.mean - 1.0) <= 0.2);
  data::GeneratorParams p;
  const auto ecg = data::generate_dataset(p, 40, 2);
  const auto es = lossless_baseline_cg(ecg);
  MESSAGE("synthetic ECG lossless cg " << es.mean << " std " << es.std);
  CHECK(es.mean >= 1.0);
  const auto enc = encode_samples_u16(std::vector<float>{0.0f, 1.0f, 2.0f, -1.0f});
  CHECK(enc == std::vector<unsigned char>{0, 0, 255, 255, 255, 255, 0, 0});
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2, 4, 8, 16, 32};
  CHECK(spearman(x, y) == doctest::Approx(1.0));
  const std::vector<double> r{5, 4, 3, 2, 1};
  CHECK(spearman(x, r) == doctest::Approx(-1.0));
  const std::vector<double> ties{1, 1, 2, 2, 3};
  CHECK(spearman(x, ties) > 0.9);
  const std::vector<double> flat{1, 1, 1, 1, 1};
  CHECK(spearman(x, flat) == 0.0);
}

TEST_CASE("report serialisation") {
  EvalReport r;
  r.policy = "dynamic";
  r.bound = 0.5;
  r.n_segments = 3;
  r.cce_quartiles[32] = {0.1, 0.2, 0.3};
  const auto j = to_json(r);
  CHECK(j.at("policy") == "dynamic");
  CHECK(j.at("cce_quartiles").at("cg32").at("median") == 0.2);
  CHECK(j.at("per_class").size() == 4);
}
