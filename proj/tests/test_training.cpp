#include <cmath>
#include <random>

#include "doctest.h"
#include "tac/data.hpp"
#include "tac/training.hpp"

using namespace tac;
using namespace tac::training;

namespace {

codec::CodecConfig mini_config() {
  codec::CodecConfig c;
  c.segment_length = 64;
  c.level_cgs = {4, 2, 1};
  c.trunk_channels = {3};
  c.trunk_kernels = {3};
  c.head_channels = 3;
  c.head_kernel = 3;
  c.latent_kernel = 3;
  c.decoder_channels = {4, 3};
  c.decoder_kernel = 3;
  c.output_kernel = 3;
  c.adapter_channels = 2;
  c.adapter_kernel = 3;
  c.seed = 3;
  return c;
}

std::vector<Segment> segments(int m, int n, std::uint64_t seed) {
  data::GeneratorParams p;
  p.segment_length = m;
  p.sample_rate = m / 8.0;
  return data::generate_dataset(p, n, seed);
}

// Analytic gradient of the per-sample objective vs central differences over
// every codec parameter.
void check_objective_gradient(const tasks::TaskSet* ts, double w0) {
  codec::Codec c(mini_config());
  REQUIRE(c.params().size() <= 1000);
  for (auto& v : c.params().values()) v += 0.02;  // move biases off zero
  const auto seg = segments(64, 1, 4)[0];
  std::optional<tasks::GroundTruth> truth;
  if (ts) truth = tasks::resolve_ground_truth(seg, *ts);
  const std::map<std::string, double> w{{"hr_classify", 0.7}, {"rr_peaks", 2.0}};

  for (const auto& level : c.levels()) {
    if (level.is_identity) continue;
    auto& store = c.params();
    std::vector<double> grads(store.size(), 0.0);
    {
      nn::Graph g;
      g.bind(store, grads, c.reconstruction_groups());
      g.backward(sample_objective(g, c, level, seg, ts, truth ? &*truth : nullptr, w0, w));
    }
    auto f = [&]() {
      nn::Graph g;
      return g.value(sample_objective(g, c, level, seg, ts, truth ? &*truth : nullptr, w0, w)).scalar();
    };
    const auto ranges = store.ranges(c.reconstruction_groups());
    auto values = store.values();
    double worst = 0.0;
    int checked = 0;
    for (const auto& [lo, hi] : ranges)
      for (auto i = lo; i < hi; ++i) {
        const double keep = values[i], h = 1e-6;
        values[i] = keep + h;
        const double up = f();
        values[i] = keep - h;
        const double down = f();
        values[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max(std::abs(fd), std::abs(grads[i]));
        if (scale < 1e-7) continue;
        worst = std::max(worst, std::abs(fd - grads[i]) / scale);
        ++checked;
      }
    INFO("cg " << level.cg << " checked " << checked);
    CHECK(checked > 50);
    CHECK(worst < 1e-4);
  }
}

}  // namespace

TEST_CASE("reconstruction loss examples") {
  const std::vector<float> x{1, 1, 1, 1}, same{1, 1, 1, 1}, lower{0.9f, 0.9f, 0.9f, 0.9f};
  CHECK(reconstruction_loss(x, same) == 0.0);
  CHECK(reconstruction_loss(x, lower) == doctest::Approx(10.0).epsilon(1e-6));
  // Exact in double when the inputs are exact binary fractions.
  const std::vector<float> a{0.5f, 1.0f}, b{0.375f, 1.125f};
  CHECK(std::abs(reconstruction_loss(a, b) - (25.0 + 12.5) / 2) < 1e-9);
  // Zero samples use the epsilon denominator.
  const std::vector<float> z{0.0f}, zh{0.001f};
  CHECK(reconstruction_loss(z, zh) == doctest::Approx(100.0).epsilon(1e-4));
  CHECK_THROWS(reconstruction_loss(a, x));
}

TEST_CASE("reconstruction loss hand example from float inputs") {
  const std::vector<float> x{0.5f, 1.0f}, x_hat{0.4f, 1.1f};
  // float rounding of 0.4 and 1.1 moves the result by ~1e-6
  CHECK(reconstruction_loss(x, x_hat) == doctest::Approx(15.0).epsilon(1e-6));
  const std::vector<double> xd{0.5, 1.0}, xhd{0.4, 1.1};
  CHECK(std::abs(reconstruction_loss(xd, xhd) - 15.0) < 1e-9);
  const std::vector<double> ones(8, 1.0), nines(8, 0.9);
  CHECK(std::abs(reconstruction_loss(ones, nines) - 10.0) < 1e-9);
}

TEST_CASE("weighted task loss and combined loss") {
  CHECK(std::abs(weighted_task_loss({{"a", 2.0}, {"b", 3.0}}, {{"a", 0.5}, {"b", 1.0}}) - 4.0) < 1e-9);
  CHECK(weighted_task_loss({{"a", 2.5}}, {{"a", 1.0}}) == 2.5);
  CHECK(weighted_task_loss({{"a", 2.0}, {"b", 3.0}}, {{"a", 0.0}, {"b", 0.0}}) == 0.0);
  CHECK_THROWS(weighted_task_loss({{"a", 1.0}}, {{"b", 1.0}}));
  CHECK(std::abs(combined_loss(10.0, 0.5, 0.1) - 1.5) < 1e-9);
  CHECK(combined_loss(7.0, 0.25, 0.0) == 0.25);
  CHECK(combined_loss(7.0, 0.0, 1.0) == 7.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 100);
  for (int i = 0; i < 100; ++i) {
    const double r = u(rng), w = u(rng), w0 = u(rng) / 100;
    CHECK(combined_loss(r, w, w0) == w0 * r + w);
  }
}

TEST_CASE("gradient of the reconstruction objective") { check_objective_gradient(nullptr, 1.0); }

TEST_CASE("gradient of the combined objective through task models") {
  auto ts = tasks::TaskSet::make_default(64, 5);
  ts.freeze_all();
  check_objective_gradient(&ts, 0.1);
}

TEST_CASE("objective value equals the loss functions") {
  const codec::Codec c(mini_config());
  auto ts = tasks::TaskSet::make_default(64, 5);
  ts.freeze_all();
  const auto seg = segments(64, 1, 9)[0];
  const auto truth = tasks::resolve_ground_truth(seg, ts);
  const std::map<std::string, double> w{{"hr_classify", 1.0}, {"rr_peaks", 1.0}};
  const auto& level = c.level(2);
  nn::Graph g;
  SampleLosses sl;
  const double v = g.value(sample_objective(g, c, level, seg, &ts, &truth, 0.1, w, &sl)).scalar();
  CompressedRecord r;
  r.cg = 2;
  r.latent = c.encode(seg, level);
  const auto x_hat_f = c.decode(r);
  // Float rounding of the latent and output moves L_R slightly.
  CHECK(sl.l_r == doctest::Approx(reconstruction_loss(seg.samples, x_hat_f)).epsilon(1e-4));
  CHECK(sl.l_c == doctest::Approx(combined_loss(sl.l_r, sl.l_w, 0.1)));
  CHECK(v == doctest::Approx(sl.l_c));

  // All task weights zero: the phase-2 objective equals the phase-1 objective scaled by w0.
  const std::map<std::string, double> zero{{"hr_classify", 0.0}, {"rr_peaks", 0.0}};
  nn::Graph g0, g1;
  const double with_tasks = g0.value(sample_objective(g0, c, level, seg, &ts, &truth, 1.0, zero)).scalar();
  const double without = g1.value(sample_objective(g1, c, level, seg, nullptr, nullptr, 1.0, w)).scalar();
  CHECK(with_tasks == without);
  CHECK_THROWS(sample_objective(g1, c, c.level(1), seg, nullptr, nullptr, 1.0, w));
}

TEST_CASE("phases enforce ordering and freezing") {
  codec::Codec c(mini_config());
  auto ts = tasks::TaskSet::make_default(64, 5);
  const auto train = segments(64, 12, 2);
  TrainConfig cfg;
  cfg.epochs_tasks = 1;
  cfg.epochs_phase1 = 2;
  cfg.epochs_phase2 = 2;
  cfg.epochs_phase3 = 2;
  cfg.batch_size = 4;

  CHECK_THROWS_AS(train_phase2(c, ts, train, cfg), std::invalid_argument);  // tasks not frozen
  pretrain_tasks(ts, train, cfg);
  CHECK(ts.all_frozen());
  CHECK_THROWS_AS(train_phase2(c, ts, train, cfg), std::logic_error);  // no phase 1 yet
  CHECK_THROWS_AS(train_phase3(c, ts, train, cfg), std::logic_error);

  const auto pred_before = c.params().checksum("predictor.cg4");
  const auto trunk_before = c.params().checksum("trunk");
  MetricsLog log;
  train_phase1(c, train, cfg, &log);
  CHECK(c.completed_phase() == 1);
  CHECK(c.params().checksum("predictor.cg4") == pred_before);
  CHECK(c.params().checksum("trunk") != trunk_before);
  CHECK(log.series(1, 4).size() == 2);
  CHECK(log.series(1, 1).empty());

  const auto cs = static_cast<const tasks::TaskModel&>(ts.classifier).params().checksum();
  const auto ps = static_cast<const tasks::TaskModel&>(ts.peaks).params().checksum();
  train_phase2(c, ts, train, cfg, &log);
  CHECK(static_cast<const tasks::TaskModel&>(ts.classifier).params().checksum() == cs);
  CHECK(static_cast<const tasks::TaskModel&>(ts.peaks).params().checksum() == ps);

  std::map<std::string, std::uint64_t> frozen;
  for (const auto& g : c.reconstruction_groups()) frozen[g] = c.params().checksum(g);
  train_phase3(c, ts, train, cfg, &log);
  for (const auto& [g, sum] : frozen) CHECK(c.params().checksum(g) == sum);
  CHECK(c.completed_phase() == 3);
  for (const auto& s : train)
    for (const auto& l : c.levels()) CHECK(c.predict_error(s, l) >= 0.0);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.adam_beta1 = 1.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  const nlohmann::json j = TrainConfig{};
  CHECK(j.get<TrainConfig>().epochs_phase2 == 20);
}

TEST_CASE("divergence guard aborts on non-finite loss") {
  codec::Codec c(mini_config());
  auto train = segments(64, 2, 3);
  train[0].samples[5] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs_phase1 = 1;
  CHECK_THROWS_WITH_AS(train_phase1(c, train, cfg), doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("pearson correlation") {
  std::vector<std::pair<double, double>> lin, neg;
  for (int i = 0; i < 10; ++i) {
    lin.emplace_back(i, 2.0 * i + 1);
    neg.emplace_back(i, -i);
  }
  CHECK(correlation_report(lin) == doctest::Approx(1.0));
  CHECK(correlation_report(neg) == doctest::Approx(-1.0));
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::pair<double, double>> ind;
  for (int i = 0; i < 1000; ++i) ind.emplace_back(n(rng), n(rng));
  CHECK(std::abs(correlation_report(ind)) < 0.1);
  const std::vector<std::pair<double, double>> flat{{1, 1}, {1, 2}, {1, 3}};
  CHECK_THROWS_AS(correlation_report(flat), std::domain_error);
  CHECK_THROWS_AS(correlation_report(std::vector<std::pair<double, double>>{{1, 2}, {2, 3}}), std::domain_error);
}
