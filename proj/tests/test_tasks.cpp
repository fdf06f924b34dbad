#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "tac/data.hpp"
#include "tac/tasks.hpp"

using namespace tac;
using namespace tac::tasks;

TEST_CASE("classifier outputs a distribution") {
  const auto ts = TaskSet::make_default(1024);
  data::GeneratorParams p;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto s = data::generate_segment(p, static_cast<ClassId>(c), 3);
    const auto prob = ts.classifier.classify(s.samples);
    REQUIRE(prob.size() == 4);
    double sum = 0.0;
    for (double v : prob) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
  std::vector<float> wrong(1000, 0.5f);
  CHECK_THROWS(ts.classifier.classify(wrong));
  CHECK_THROWS(ts.peaks.classify(std::vector<float>(1024, 0.5f)));
}

TEST_CASE("permuting the output head permutes the argmax") {
  auto ts = TaskSet::make_default(1024);
  data::GeneratorParams p;
  const auto s = data::generate_segment(p, ClassId::other, 8);
  const auto before = ts.classifier.classify(s.samples);
  auto& store = ts.classifier.params();
  const int w = store.find("logits.weight"), b = store.find("logits.bias");
  auto wv = store.values(w);
  const std::size_t in = wv.size() / 4;
  // Swap rows 0 and 3 of the dense layer.
  for (std::size_t i = 0; i < in; ++i) std::swap(wv[i], wv[3 * in + i]);
  std::swap(store.values(b)[0], store.values(b)[3]);
  const auto after = ts.classifier.classify(s.samples);
  CHECK(after[0] == doctest::Approx(before[3]));
  CHECK(after[3] == doctest::Approx(before[0]));
  const auto am = [](const std::vector<double>& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
  const std::ptrdiff_t swapped[] = {3, 1, 2, 0};
  CHECK(am(after) == swapped[am(before)]);
}

TEST_CASE("envelope is bounded and integrates to peaks * sigma * sqrt(2 pi)") {
  const std::vector<int> peaks{100, 300, 520, 800};
  const auto env = make_envelope(peaks, 1024);
  for (double v : env) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  const double area = std::accumulate(env.begin(), env.end(), 0.0);
  const double expected = 4 * kEnvelopeSigma * std::sqrt(2 * M_PI);
  CHECK(std::abs(area - expected) / expected < 0.05);
  for (int p : peaks) CHECK(env[static_cast<std::size_t>(p)] == 1.0);
}

TEST_CASE("extract_peaks inverts a constructed envelope") {
  const auto env = make_envelope({100, 500, 900}, 1024);
  const auto got = extract_peaks(env, 0.5);
  REQUIRE(got.size() == 3);
  const int want[] = {100, 500, 900};
  for (int i = 0; i < 3; ++i) CHECK(std::abs(got[static_cast<std::size_t>(i)] - want[i]) <= 2);
  CHECK(extract_peaks(std::vector<double>(1024, 0.0), 0.5).empty());
}

TEST_CASE("refractory suppression keeps the higher peak") {
  std::vector<double> env(200, 0.0);
  env[50] = 0.9;
  env[60] = 0.7;
  env[150] = 0.8;
  const auto got = extract_peaks(env, 0.5, 20);
  CHECK(got == std::vector<int>{50, 150});
}

TEST_CASE("peak f1") {
  const std::vector<int> a{10, 200, 400};
  auto s = peak_f1(a, a, 10);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == 1.0);
  s = peak_f1({}, a, 10);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);
  s = peak_f1({100}, {103}, 5);
  CHECK(s.f1 == 1.0);
  // Two predictions compete for one truth peak; only one can match.
  s = peak_f1({100, 104}, {103}, 5);
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 1.0);
  CHECK_THROWS(peak_f1(a, a, -1));
}

TEST_CASE("task losses") {
  const auto ts = TaskSet::make_default(1024);
  data::GeneratorParams p;
  const auto s = data::generate_segment(p, ClassId::normal, 1);
  GroundTruth gt{0, make_envelope(*s.peak_positions, 1024), *s.peak_positions};
  CHECK(task_loss(ts.classifier, s.samples, gt) >= 0.0);
  CHECK(task_loss(ts.peaks, s.samples, gt) >= 0.0);
  GroundTruth same{0, ts.peaks.envelope(s.samples), {}};
  CHECK(task_loss(ts.peaks, s.samples, same) == 0.0);
  CHECK_THROWS(task_loss(ts.classifier, s.samples, GroundTruth{}));
  CHECK_THROWS(task_loss(ts.peaks, s.samples, GroundTruth{1, std::nullopt, {}}));
  const std::map<std::string, double> w{{"hr_classify", 1.0}, {"rr_peaks", 0.0}};
  CHECK(measured_task_error(ts, s.samples, gt, w) == doctest::Approx(task_loss(ts.classifier, s.samples, gt)));
}

TEST_CASE("small input perturbations move the loss only slightly") {
  const auto ts = TaskSet::make_default(1024);
  data::GeneratorParams p;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e-6, 1e-6);
  for (int c = 0; c < kNumClasses; ++c) {
    auto s = data::generate_segment(p, static_cast<ClassId>(c), 100 + c);
    const GroundTruth gt{c, std::nullopt, {}};
    const double base = task_loss(ts.classifier, s.samples, gt);
    for (auto& v : s.samples) v += static_cast<float>(u(rng));
    CHECK(std::abs(task_loss(ts.classifier, s.samples, gt) - base) < 1e-3);
  }
}

TEST_CASE("ground truth falls back to the task models") {
  const auto ts = TaskSet::make_default(1024);
  data::GeneratorParams p;
  auto s = data::generate_segment(p, ClassId::noisy, 2);
  const auto exact = resolve_ground_truth(s, ts);
  CHECK(*exact.label == 2);
  CHECK(exact.peaks == *s.peak_positions);
  s.label.reset();
  s.peak_positions.reset();
  const auto derived = resolve_ground_truth(s, ts);
  const auto prob = ts.classifier.classify(s.samples);
  CHECK(*derived.label == std::max_element(prob.begin(), prob.end()) - prob.begin());
  CHECK(*derived.envelope == ts.peaks.envelope(s.samples));
}

TEST_CASE("frozen tasks refuse mutable access and survive checkpoints") {
  auto ts = TaskSet::make_default(1024);
  ts.freeze_all();
  CHECK(ts.all_frozen());
  CHECK_THROWS_AS(ts.classifier.params(), std::logic_error);
  const auto path = (std::filesystem::temp_directory_path() / "tac_tasks.ckpt").string();
  ts.save(path);
  const auto back = TaskSet::load(path);
  CHECK(back.all_frozen());
  const auto& a = static_cast<const TaskModel&>(ts.classifier).params();
  const auto& b = static_cast<const TaskModel&>(back.classifier).params();
  CHECK(a.checksum() == b.checksum());
  CHECK(back.get("rr_peaks").id() == "rr_peaks");
  std::filesystem::remove(path);
}
