#include "tac/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tac::training {

namespace {

template <class T>
double relative_error(std::span<const T> x, std::span<const T> x_hat, double eps) {
  if (x.size() != x_hat.size()) throw std::invalid_argument("reconstruction_loss: length mismatch");
  if (x.empty()) throw std::invalid_argument("reconstruction_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    s += std::abs(xi - static_cast<double>(x_hat[i])) / std::max(std::abs(xi), eps);
  }
  return 100.0 * s / static_cast<double>(x.size());
}

}  // namespace

double reconstruction_loss(std::span<const float> x, std::span<const float> x_hat, double eps) {
  return relative_error(x, x_hat, eps);
}

double reconstruction_loss(std::span<const double> x, std::span<const double> x_hat, double eps) {
  return relative_error(x, x_hat, eps);
}

double weighted_task_loss(const std::map<std::string, double>& losses, const std::map<std::string, double>& weights) {
  double s = 0.0;
  for (const auto& [task, loss] : losses) {
    const auto it = weights.find(task);
    if (it == weights.end()) throw std::invalid_argument("no weight for task " + task);
    s += it->second * loss;
  }
  return s;
}

double combined_loss(double l_r, double l_w, double w0) { return w0 * l_r + l_w; }

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("adam betas must lie in (0, 1)");
  if (!(lr_decay >= 0.0)) throw std::invalid_argument("lr_decay must be nonnegative");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (epochs_tasks < 0 || epochs_phase1 < 0 || epochs_phase2 < 0 || epochs_phase3 < 0)
    throw std::invalid_argument("epoch counts must be nonnegative");
  weights.validate();
}

nn::AdamConfig TrainConfig::adam() const {
  nn::AdamConfig a;
  a.learning_rate = learning_rate;
  a.beta1 = adam_beta1;
  a.beta2 = adam_beta2;
  a.decay = lr_decay;
  return a;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"lr_decay", c.lr_decay},
                     {"batch_size", c.batch_size},
                     {"epochs_tasks", c.epochs_tasks},
                     {"epochs_phase1", c.epochs_phase1},
                     {"epochs_phase2", c.epochs_phase2},
                     {"epochs_phase3", c.epochs_phase3},
                     {"seed", c.seed},
                     {"w0", c.weights.reconstruction_weight},
                     {"task_weights", c.weights.task_weights},
                     {"upper_bound", c.weights.upper_bound}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.lr_decay = j.value("lr_decay", d.lr_decay);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs_tasks = j.value("epochs_tasks", d.epochs_tasks);
  c.epochs_phase1 = j.value("epochs_phase1", d.epochs_phase1);
  c.epochs_phase2 = j.value("epochs_phase2", d.epochs_phase2);
  c.epochs_phase3 = j.value("epochs_phase3", d.epochs_phase3);
  c.seed = j.value("seed", d.seed);
  c.weights.reconstruction_weight = j.value("w0", d.weights.reconstruction_weight);
  c.weights.task_weights = j.value("task_weights", d.weights.task_weights);
  c.weights.upper_bound = j.value("upper_bound", d.weights.upper_bound);
}

std::vector<EpochMetrics> MetricsLog::series(int phase, int level) const {
  std::vector<EpochMetrics> out;
  for (const auto& r : rows_)
    if (r.phase == phase && r.level == level) out.push_back(r);
  return out;
}

void MetricsLog::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(10);
  f << "phase,epoch,level,l_r,l_w,l_c,predictor_mse\n";
  for (const auto& r : rows_)
    f << r.phase << ',' << r.epoch << ',' << r.level << ',' << r.l_r << ',' << r.l_w << ',' << r.l_c << ','
      << r.predictor_mse << '\n';
}

nn::Var sample_objective(nn::Graph& g, const codec::Codec& codec, const LevelSpec& level, const Segment& segment,
                         const tasks::TaskSet* tasks, const tasks::GroundTruth* truth, double w0,
                         const std::map<std::string, double>& weights, SampleLosses* losses) {
  if (level.is_identity) throw std::invalid_argument("identity level has no trainable objective");
  const auto x = nn::Tensor::from_samples(segment.samples);
  const auto in = g.input(x);
  const auto head = codec.head_forward(g, codec.trunk_forward(g, in), level);
  const auto x_hat = codec.decoder_forward(g, head.latent, level);
  const auto l_r = nn::relative_error_percent(g, x_hat, x, kRelativeErrorEps);

  std::vector<nn::Var> terms;
  if (w0 != 0.0) terms.push_back(nn::scale(g, l_r, w0));
  SampleLosses sl;
  sl.l_r = g.value(l_r).scalar();
  if (tasks) {
    if (!truth) throw std::invalid_argument("task objective needs ground truth");
    for (const auto& [id, w] : weights) {
      if (w == 0.0) continue;
      const auto& task = tasks->get(id);
      const auto out = task.forward(g, x_hat);
      nn::Var loss;
      if (task.kind() == tasks::TaskKind::hr_classify) {
        if (!truth->label) throw std::invalid_argument("hr_classify: missing class label");
        loss = nn::cross_entropy(g, out, *truth->label, 0.0);
      } else {
        if (!truth->envelope) throw std::invalid_argument("rr_peaks: missing peak envelope");
        loss = nn::mean_squared_error(g, out, nn::Tensor::from_values(*truth->envelope));
      }
      sl.task[id] = g.value(loss).scalar();
      sl.l_w += w * sl.task[id];
      terms.push_back(nn::scale(g, loss, w));
    }
  }
  sl.l_c = combined_loss(sl.l_r, sl.l_w, w0);
  if (losses) *losses = sl;
  if (terms.empty()) return nn::scale(g, l_r, 0.0);
  return nn::sum(g, terms);
}

namespace {

void guard(double v, int phase, int epoch) {
  if (!std::isfinite(v))
    throw std::runtime_error("training diverged: non-finite loss in phase " + std::to_string(phase) + " epoch " +
                             std::to_string(epoch));
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<LevelSpec> compressing_levels(const codec::Codec& codec) {
  std::vector<LevelSpec> out;
  for (const auto& l : codec.levels())
    if (!l.is_identity) out.push_back(l);
  return out;
}

struct LevelAccum {
  double l_r = 0.0, l_w = 0.0, l_c = 0.0;
  std::size_t n = 0;
};

// Minibatch loop shared by phases 1 and 2: the per-sample objective is summed
// over levels, gradients averaged over the batch.
void run_codec_phase(codec::Codec& codec, const tasks::TaskSet* tasks, const std::vector<Segment>& train,
                     const std::vector<tasks::GroundTruth>* truths, const TrainConfig& cfg, int phase, int epochs,
                     double w0, MetricsLog* log) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  const auto levels = compressing_levels(codec);
  auto& store = codec.params();
  const auto trainable = codec.reconstruction_groups();
  const auto ranges = store.ranges(trainable);
  nn::Adam opt(store.size(), cfg.adam());
  std::vector<double> grads(store.size(), 0.0);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::vector<LevelAccum> acc(levels.size());
    const auto order = shuffled(train.size(), cfg.seed * 1000003ULL + static_cast<std::uint64_t>(phase * 100 + epoch));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grads.begin(), grads.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        for (std::size_t li = 0; li < levels.size(); ++li) {
          nn::Graph g;
          g.bind(store, grads, trainable);
          SampleLosses sl;
          const auto obj = sample_objective(g, codec, levels[li], train[idx], tasks, truths ? &(*truths)[idx] : nullptr,
                                            w0, cfg.weights.task_weights, &sl);
          guard(sl.l_c, phase, epoch);
          g.backward(obj, 1.0 / static_cast<double>(end - start));
          acc[li].l_r += sl.l_r;
          acc[li].l_w += sl.l_w;
          acc[li].l_c += sl.l_c;
          ++acc[li].n;
        }
      }
      opt.step(store.values(), grads, ranges);
    }
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const double n = static_cast<double>(acc[li].n);
      if (log) log->add({phase, epoch, levels[li].cg, acc[li].l_r / n, acc[li].l_w / n, acc[li].l_c / n, 0.0});
    }
  }
}

std::vector<tasks::GroundTruth> resolve_all(const std::vector<Segment>& segs, const tasks::TaskSet& tasks) {
  std::vector<tasks::GroundTruth> out;
  out.reserve(segs.size());
  for (const auto& s : segs) out.push_back(tasks::resolve_ground_truth(s, tasks));
  return out;
}

}  // namespace

void pretrain_tasks(tasks::TaskSet& ts, const std::vector<Segment>& train, const TrainConfig& cfg, MetricsLog* log) {
  cfg.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train[i].label && train[i].peak_positions) usable.push_back(i);
  if (usable.empty()) throw std::invalid_argument("task pre-training needs segments with labels and peak positions");

  ts.classifier.unfreeze();
  ts.peaks.unfreeze();
  auto& cs = ts.classifier.params();
  auto& ps = ts.peaks.params();
  nn::Adam copt(cs.size(), cfg.adam()), popt(ps.size(), cfg.adam());
  std::vector<double> cg(cs.size()), pg(ps.size());
  const auto crange = cs.ranges({ts.classifier.id()});
  const auto prange = ps.ranges({ts.peaks.id()});

  std::vector<std::vector<double>> envelopes(train.size());
  for (std::size_t i : usable) envelopes[i] = tasks::make_envelope(*train[i].peak_positions, train[i].length());

  for (int epoch = 1; epoch <= cfg.epochs_tasks; ++epoch) {
    double ce_sum = 0.0, mse_sum = 0.0;
    const auto perm = shuffled(usable.size(), cfg.seed * 7919ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(perm.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(cg.begin(), cg.end(), 0.0);
      std::fill(pg.begin(), pg.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const Segment& s = train[usable[perm[b]]];
        {
          nn::Graph g;
          g.bind(cs, cg);
          const auto loss = nn::cross_entropy(g, ts.classifier.forward(g, g.input(nn::Tensor::from_samples(s.samples))),
                                              static_cast<int>(*s.label), 0.0);
          ce_sum += g.value(loss).scalar();
          g.backward(loss, inv);
        }
        {
          nn::Graph g;
          g.bind(ps, pg);
          const auto loss = nn::mean_squared_error(
              g, ts.peaks.forward(g, g.input(nn::Tensor::from_samples(s.samples))),
              nn::Tensor::from_values(envelopes[usable[perm[b]]]));
          mse_sum += g.value(loss).scalar();
          g.backward(loss, inv);
        }
      }
      guard(ce_sum + mse_sum, 0, epoch);
      copt.step(cs.values(), cg, crange);
      popt.step(ps.values(), pg, prange);
    }
    const double n = static_cast<double>(usable.size());
    if (log) log->add({0, epoch, 0, 0.0, (ce_sum + mse_sum) / n, ce_sum / n, mse_sum / n});
  }
  ts.freeze_all();
}

void train_phase1(codec::Codec& codec, const std::vector<Segment>& train, const TrainConfig& cfg, MetricsLog* log) {
  cfg.validate();
  run_codec_phase(codec, nullptr, train, nullptr, cfg, 1, cfg.epochs_phase1, 1.0, log);
  codec.set_completed_phase(1);
}

void train_phase2(codec::Codec& codec, const tasks::TaskSet& ts, const std::vector<Segment>& train,
                  const TrainConfig& cfg, MetricsLog* log) {
  cfg.validate();
  if (!ts.all_frozen()) throw std::invalid_argument("phase 2 requires frozen task models");
  if (codec.completed_phase() < 1) throw std::logic_error("phase 2 requires a phase-1 checkpoint");
  const auto task_sums = std::make_pair(ts.classifier.params().checksum(), ts.peaks.params().checksum());
  const auto truths = resolve_all(train, ts);
  run_codec_phase(codec, &ts, train, &truths, cfg, 2, cfg.epochs_phase2, cfg.weights.reconstruction_weight, log);
  if (task_sums != std::make_pair(ts.classifier.params().checksum(), ts.peaks.params().checksum()))
    throw std::logic_error("task parameters changed during phase 2");
  codec.set_completed_phase(2);
}

double measured_level_error(const codec::Codec& codec, const tasks::TaskSet& ts, const Segment& segment,
                            const LevelSpec& level, const tasks::GroundTruth& truth,
                            const std::map<std::string, double>& weights) {
  CompressedRecord r;
  r.segment_id = static_cast<std::uint32_t>(segment.id);
  r.cg = static_cast<std::uint16_t>(level.cg);
  r.latent = codec.encode(segment, level);
  return tasks::measured_task_error(ts, codec.decode(r), truth, weights);
}

void train_phase3(codec::Codec& codec, const tasks::TaskSet& ts, const std::vector<Segment>& train,
                  const TrainConfig& cfg, MetricsLog* log) {
  cfg.validate();
  if (!ts.all_frozen()) throw std::invalid_argument("phase 3 requires frozen task models");
  if (codec.completed_phase() < 2) throw std::logic_error("phase 3 requires a phase-2 checkpoint");
  if (train.empty()) throw std::invalid_argument("empty training set");

  auto& store = codec.params();
  const auto frozen_groups = codec.reconstruction_groups();
  std::map<std::string, std::uint64_t> frozen_sums;
  for (const auto& grp : frozen_groups) frozen_sums[grp] = store.checksum(grp);

  // The compressor is fixed, so head features and targets are computed once.
  struct Cached {
    nn::Tensor features;
    double target;
  };
  const auto levels = compressing_levels(codec);
  std::vector<std::vector<Cached>> cache(levels.size());
  for (const auto& s : train) {
    const auto truth = tasks::resolve_ground_truth(s, ts);
    nn::Graph g;
    const auto trunk = codec.trunk_forward(g, g.input(nn::Tensor::from_samples(s.samples)));
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const auto head = codec.head_forward(g, trunk, levels[li]);
      const double target = measured_level_error(codec, ts, s, levels[li], truth, cfg.weights.task_weights);
      guard(target, 3, 0);
      cache[li].push_back({g.value(head.features), target});
    }
  }

  for (std::size_t li = 0; li < levels.size(); ++li) {
    const std::string group = "predictor.cg" + std::to_string(levels[li].cg);
    const auto ranges = store.ranges({group});

    // Train on standardized pooled features, then fold the affine map into
    // the first predictor layer. Per-channel standardization commutes with
    // the global average pool.
    const int channels = cache[li].front().features.channels;
    const int length = cache[li].front().features.length;
    std::vector<double> shift(static_cast<std::size_t>(channels), 0.0), scale(static_cast<std::size_t>(channels), 1.0);
    {
      std::vector<double> sq(static_cast<std::size_t>(channels), 0.0);
      for (const auto& c : cache[li])
        for (int ch = 0; ch < channels; ++ch) {
          double m = 0.0;
          for (int t = 0; t < length; ++t) m += c.features.data[static_cast<std::size_t>(ch * length + t)];
          m /= length;
          shift[static_cast<std::size_t>(ch)] += m;
          sq[static_cast<std::size_t>(ch)] += m * m;
        }
      const double n = static_cast<double>(cache[li].size());
      for (std::size_t ch = 0; ch < shift.size(); ++ch) {
        shift[ch] /= n;
        const double var = sq[ch] / n - shift[ch] * shift[ch];
        scale[ch] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
      }
      for (auto& c : cache[li])
        for (int ch = 0; ch < channels; ++ch)
          for (int t = 0; t < length; ++t) {
            double& v = c.features.data[static_cast<std::size_t>(ch * length + t)];
            v = (v - shift[static_cast<std::size_t>(ch)]) * scale[static_cast<std::size_t>(ch)];
          }
    }

    double mean = 0.0;
    for (const auto& c : cache[li]) mean += c.target;
    mean /= static_cast<double>(cache[li].size());
    codec.init_predictor_constant(levels[li], mean);

    nn::Adam opt(store.size(), cfg.adam());
    std::vector<double> grads(store.size());
    for (int epoch = 1; epoch <= cfg.epochs_phase3; ++epoch) {
      double mse = 0.0;
      const auto order = shuffled(cache[li].size(), cfg.seed * 31337ULL + static_cast<std::uint64_t>(epoch * 10 + li));
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        std::fill(grads.begin(), grads.end(), 0.0);
        for (std::size_t b = start; b < end; ++b) {
          const auto& c = cache[li][order[b]];
          nn::Graph g;
          g.bind(store, grads, {group});
          const auto pred = codec.predictor_forward(g, g.input(c.features), levels[li]);
          const auto loss = nn::mean_squared_error(g, pred, nn::Tensor(1, 1, c.target));
          mse += g.value(loss).scalar();
          g.backward(loss, 1.0 / static_cast<double>(end - start));
        }
        guard(mse, 3, epoch);
        opt.step(store.values(), grads, ranges);
      }
      mse /= static_cast<double>(order.size());
      if (log) log->add({3, epoch, levels[li].cg, 0.0, mean, 0.0, mse});
    }
    codec.fold_predictor_input(levels[li], shift, scale);
  }

  for (const auto& [grp, sum] : frozen_sums)
    if (store.checksum(grp) != sum) throw std::logic_error("phase 3 modified frozen group " + grp);
  codec.set_completed_phase(3);
}

double correlation_report(std::span<const std::pair<double, double>> pts) {
  if (pts.size() < 3) throw std::domain_error("correlation needs at least 3 points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw std::domain_error("correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace tac::training
