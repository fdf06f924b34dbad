#include "tac/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tac::tasks {

std::string task_id(TaskKind k) { return k == TaskKind::hr_classify ? "hr_classify" : "rr_peaks"; }

TaskKind task_from_id(const std::string& id) {
  if (id == "hr_classify") return TaskKind::hr_classify;
  if (id == "rr_peaks") return TaskKind::rr_peaks;
  throw std::invalid_argument("unknown task id " + id);
}

TaskConfig TaskConfig::classifier(int segment_length, std::uint64_t seed) {
  return TaskConfig{TaskKind::hr_classify, segment_length, {8, 16, 16, 32}, {9, 9, 9, 9}, seed};
}

TaskConfig TaskConfig::peak_locator(int segment_length, std::uint64_t seed) {
  return TaskConfig{TaskKind::rr_peaks, segment_length, {8, 12}, {7, 5, 5, 5, 5}, seed};
}

void to_json(nlohmann::json& j, const TaskConfig& c) {
  j = nlohmann::json{{"kind", task_id(c.kind)},
                     {"segment_length", c.segment_length},
                     {"channels", c.channels},
                     {"kernels", c.kernels},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TaskConfig& c) {
  c.kind = task_from_id(j.at("kind").get<std::string>());
  c.segment_length = j.at("segment_length").get<int>();
  c.channels = j.at("channels").get<std::vector<int>>();
  c.kernels = j.at("kernels").get<std::vector<int>>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

TaskModel::TaskModel(TaskConfig cfg) : cfg_(std::move(cfg)) {
  auto conv = [this](const std::string& name, int out, int in, int k, int stride) {
    Layer l;
    l.weight = params_.add(name + ".weight", id(), {out, in, k});
    l.bias = params_.add(name + ".bias", id(), {out});
    l.stride = stride;
    return l;
  };
  const auto& ch = cfg_.channels;
  const auto& ks = cfg_.kernels;
  if (cfg_.kind == TaskKind::hr_classify) {
    if (ch.size() != 4 || ks.size() != 4) throw std::invalid_argument("classifier needs 4 stages");
    if (cfg_.segment_length % 16 != 0) throw std::invalid_argument("classifier needs M divisible by 16");
    int in = 1;
    for (std::size_t s = 0; s < 4; ++s) {
      layers_.push_back(conv("conv" + std::to_string(s), ch[s], in, ks[s], 2));
      in = ch[s];
    }
    Layer out;
    out.weight = params_.add("logits.weight", id(), {kNumClasses, in});
    out.bias = params_.add("logits.bias", id(), {kNumClasses});
    layers_.push_back(out);
  } else {
    if (ch.size() != 2 || ks.size() != 5) throw std::invalid_argument("peak locator needs 2 widths and 5 kernels");
    if (cfg_.segment_length % 2 != 0) throw std::invalid_argument("peak locator needs even M");
    layers_.push_back(conv("enc", ch[0], 1, ks[0], 1));
    layers_.push_back(conv("down", ch[1], ch[0], ks[1], 2));
    layers_.push_back(conv("mid", ch[1], ch[1], ks[2], 1));
    layers_.push_back(conv("up", ch[0], ch[1], ks[3], 1));
    layers_.push_back(conv("out", 1, ch[0], ks[4], 1));
  }
  params_.init_glorot(cfg_.seed);
}

std::string TaskModel::loss_kind() const {
  return cfg_.kind == TaskKind::hr_classify ? "categorical-cross-entropy" : "mean-squared-error-on-peak-envelope";
}

nn::ParameterStore& TaskModel::params() {
  if (frozen_) throw std::logic_error("task " + id() + " is frozen");
  return params_;
}

nn::Var TaskModel::apply(nn::Graph& g, nn::Var x, const Layer& l) const {
  const nn::Param w{&params_, l.weight}, b{&params_, l.bias};
  return params_.info(l.weight).shape.size() == 2 ? nn::dense(g, x, w, b) : nn::conv1d(g, x, w, b, l.stride);
}

nn::Var TaskModel::forward(nn::Graph& g, nn::Var x) const {
  check_length(g.value(x).size());
  if (cfg_.kind == TaskKind::hr_classify) {
    for (std::size_t s = 0; s < 4; ++s) x = nn::relu(g, apply(g, x, layers_[s]));
    return apply(g, nn::global_avg_pool(g, x), layers_[4]);
  }
  const auto enc = nn::relu(g, apply(g, x, layers_[0]));
  auto h = nn::relu(g, apply(g, enc, layers_[1]));
  h = nn::relu(g, apply(g, h, layers_[2]));
  h = nn::relu(g, apply(g, nn::upsample2(g, h), layers_[3]));
  h = nn::add(g, h, enc);
  return nn::sigmoid(g, apply(g, h, layers_[4]));
}

void TaskModel::check_length(std::size_t n) const {
  if (n != static_cast<std::size_t>(cfg_.segment_length))
    throw std::invalid_argument(id() + ": input length " + std::to_string(n) + " != " +
                                std::to_string(cfg_.segment_length));
}

std::vector<double> TaskModel::classify(std::span<const float> samples) const {
  if (cfg_.kind != TaskKind::hr_classify) throw std::logic_error("classify on a non-classifier task");
  check_length(samples.size());
  nn::Graph g;
  const auto logits = forward(g, g.input(nn::Tensor::from_samples(samples)));
  return nn::softmax(g.value(logits).data);
}

std::vector<double> TaskModel::envelope(std::span<const float> samples) const {
  if (cfg_.kind != TaskKind::rr_peaks) throw std::logic_error("envelope on a non-peak task");
  check_length(samples.size());
  nn::Graph g;
  return g.value(forward(g, g.input(nn::Tensor::from_samples(samples)))).data;
}

nlohmann::json TaskModel::to_json() const {
  return nlohmann::json{{"config", cfg_}, {"frozen", frozen_}, {"tensors", params_.to_json()}};
}

TaskModel TaskModel::from_json(const nlohmann::json& j) {
  TaskModel m(j.at("config").get<TaskConfig>());
  m.params_.load_json(j.at("tensors"));
  m.frozen_ = j.value("frozen", false);
  return m;
}

TaskSet TaskSet::make_default(int segment_length, std::uint64_t seed) {
  return TaskSet{TaskModel(TaskConfig::classifier(segment_length, seed)),
                 TaskModel(TaskConfig::peak_locator(segment_length, seed + 2))};
}

const TaskModel& TaskSet::get(const std::string& id) const {
  if (id == classifier.id()) return classifier;
  if (id == peaks.id()) return peaks;
  throw std::invalid_argument("unknown task id " + id);
}

void TaskSet::freeze_all() {
  classifier.freeze();
  peaks.freeze();
}

void TaskSet::save(const std::string& path) const {
  nlohmann::json doc{{"format", "tac-tasks"}, {"version", 1}, {"tasks", {{classifier.id(), classifier.to_json()}, {peaks.id(), peaks.to_json()}}}};
  nn::write_archive(path, doc);
}

TaskSet TaskSet::load(const std::string& path) {
  const auto doc = nn::read_archive(path);
  if (doc.value("format", "") != "tac-tasks") throw std::runtime_error(path + " is not a task checkpoint");
  const auto& t = doc.at("tasks");
  return TaskSet{TaskModel::from_json(t.at("hr_classify")), TaskModel::from_json(t.at("rr_peaks"))};
}

std::vector<double> make_envelope(const std::vector<int>& peaks, int length, double sigma) {
  std::vector<double> env(static_cast<std::size_t>(length), 0.0);
  const int reach = static_cast<int>(std::ceil(6.0 * sigma));
  for (int c : peaks) {
    for (int t = std::max(0, c - reach); t < std::min(length, c + reach + 1); ++t) {
      const double d = (t - c) / sigma;
      env[static_cast<std::size_t>(t)] = std::max(env[static_cast<std::size_t>(t)], std::exp(-0.5 * d * d));
    }
  }
  return env;
}

GroundTruth resolve_ground_truth(const Segment& raw, const TaskSet& tasks) {
  GroundTruth gt;
  if (raw.label) {
    gt.label = static_cast<int>(*raw.label);
  } else {
    const auto p = tasks.classifier.classify(raw.samples);
    gt.label = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  if (raw.peak_positions) {
    gt.envelope = make_envelope(*raw.peak_positions, raw.length());
    gt.peaks = *raw.peak_positions;
  } else {
    gt.envelope = tasks.peaks.envelope(raw.samples);
    gt.peaks = extract_peaks(*gt.envelope, kPeakThreshold);
  }
  return gt;
}

double task_loss(const TaskModel& task, std::span<const float> reconstructed, const GroundTruth& truth) {
  if (task.kind() == TaskKind::hr_classify) {
    if (!truth.label) throw std::invalid_argument("hr_classify: missing class label");
    const auto p = task.classify(reconstructed);
    const int l = *truth.label;
    if (l < 0 || l >= static_cast<int>(p.size())) throw std::invalid_argument("hr_classify: label out of range");
    return -std::log(std::max(p[static_cast<std::size_t>(l)], 1e-7));
  }
  if (!truth.envelope) throw std::invalid_argument("rr_peaks: missing peak envelope");
  const auto env = task.envelope(reconstructed);
  if (env.size() != truth.envelope->size()) throw std::invalid_argument("rr_peaks: envelope length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < env.size(); ++i) s += (env[i] - (*truth.envelope)[i]) * (env[i] - (*truth.envelope)[i]);
  return s / static_cast<double>(env.size());
}

double measured_task_error(const TaskSet& tasks, std::span<const float> reconstructed, const GroundTruth& truth,
                           const std::map<std::string, double>& weights) {
  double total = 0.0;
  for (const auto& [id, w] : weights) {
    if (w == 0.0) continue;
    total += w * task_loss(tasks.get(id), reconstructed, truth);
  }
  return total;
}

std::vector<int> extract_peaks(std::span<const double> envelope, double threshold, int refractory) {
  const int n = static_cast<int>(envelope.size());
  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    const double v = envelope[static_cast<std::size_t>(i)];
    if (v <= threshold) continue;
    const bool left = i == 0 || v >= envelope[static_cast<std::size_t>(i - 1)];
    const bool right = i == n - 1 || v > envelope[static_cast<std::size_t>(i + 1)];
    if (left && right) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return envelope[static_cast<std::size_t>(a)] > envelope[static_cast<std::size_t>(b)];
  });
  std::vector<int> kept;
  for (int c : candidates) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](int k) { return std::abs(k - c) < refractory; });
    if (!clash) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

PeakScore peak_f1(const std::vector<int>& predicted, const std::vector<int>& truth, int tolerance) {
  if (tolerance < 0) throw std::invalid_argument("tolerance must be nonnegative");
  struct Pair {
    int dist;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const int d = std::abs(predicted[i] - truth[j]);
      if (d <= tolerance) pairs.push_back({d, i, j});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
  std::vector<bool> used_p(predicted.size()), used_t(truth.size());
  int matched = 0;
  for (const auto& pr : pairs) {
    if (used_p[pr.p] || used_t[pr.t]) continue;
    used_p[pr.p] = used_t[pr.t] = true;
    ++matched;
  }
  PeakScore s;
  s.precision = predicted.empty() ? 0.0 : static_cast<double>(matched) / predicted.size();
  s.recall = truth.empty() ? 0.0 : static_cast<double>(matched) / truth.size();
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace tac::tasks
