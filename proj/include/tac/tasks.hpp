#pragma once

// Differentiable downstream tasks: a 4-class rhythm classifier and an
// R-peak envelope regressor. Both are trained on raw segments and then
// frozen while the codec is fine-tuned through them.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tac/core.hpp"
#include "tac/nn.hpp"

namespace tac::tasks {

enum class TaskKind { hr_classify, rr_peaks };

std::string task_id(TaskKind k);
TaskKind task_from_id(const std::string& id);

inline constexpr double kEnvelopeSigma = 5.0;
inline constexpr int kPeakTolerance = 10;
inline constexpr double kPeakThreshold = 0.5;

struct TaskConfig {
  TaskKind kind = TaskKind::hr_classify;
  int segment_length = 1024;
  std::vector<int> channels;
  std::vector<int> kernels;
  std::uint64_t seed = 11;

  /// 4 stride-2 conv stages, global average pooling, dense to 4 logits.
  static TaskConfig classifier(int segment_length, std::uint64_t seed = 11);
  /// Conv, stride-2 conv, conv, upsample, conv, skip add, conv + sigmoid.
  static TaskConfig peak_locator(int segment_length, std::uint64_t seed = 13);

  friend bool operator==(const TaskConfig&, const TaskConfig&) = default;
};

void to_json(nlohmann::json& j, const TaskConfig& c);
void from_json(const nlohmann::json& j, TaskConfig& c);

class TaskModel {
 public:
  explicit TaskModel(TaskConfig cfg);

  TaskKind kind() const { return cfg_.kind; }
  std::string id() const { return task_id(cfg_.kind); }
  const TaskConfig& config() const { return cfg_; }
  /// "categorical-cross-entropy" or "mean-squared-error-on-peak-envelope".
  std::string loss_kind() const;

  /// Logits (4, 1) for the classifier, envelope (1, M) in (0, 1) for peaks.
  nn::Var forward(nn::Graph& g, nn::Var x) const;

  std::vector<double> classify(std::span<const float> samples) const;
  std::vector<double> envelope(std::span<const float> samples) const;

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  void unfreeze() { frozen_ = false; }

  nn::ParameterStore& params();
  const nn::ParameterStore& params() const { return params_; }

  nlohmann::json to_json() const;
  static TaskModel from_json(const nlohmann::json& j);

 private:
  struct Layer {
    int weight = -1;
    int bias = -1;
    int stride = 1;
  };
  nn::Var apply(nn::Graph& g, nn::Var x, const Layer& l) const;
  void check_length(std::size_t n) const;

  TaskConfig cfg_;
  nn::ParameterStore params_;
  std::vector<Layer> layers_;
  bool frozen_ = false;
};

struct TaskSet {
  TaskModel classifier;
  TaskModel peaks;

  static TaskSet make_default(int segment_length, std::uint64_t seed = 11);
  const TaskModel& get(const std::string& id) const;
  void freeze_all();
  bool all_frozen() const { return classifier.frozen() && peaks.frozen(); }

  /// Archive with one entry per task id.
  void save(const std::string& path) const;
  static TaskSet load(const std::string& path);
};

/// Targets for one segment. Missing entries are filled from the task models'
/// outputs on the raw segment (see resolve_ground_truth).
struct GroundTruth {
  std::optional<int> label;
  std::optional<std::vector<double>> envelope;
  /// Peak indices used to score extracted peaks.
  std::vector<int> peaks;
};

/// Gaussian bumps of height 1 at each peak (maximum where bumps overlap).
std::vector<double> make_envelope(const std::vector<int>& peaks, int length, double sigma = kEnvelopeSigma);

/// Exact ground truth where the segment carries it, model-derived otherwise
/// (argmax class, predicted envelope and the peaks extracted from it).
GroundTruth resolve_ground_truth(const Segment& raw, const TaskSet& tasks);

/// hr_classify: cross-entropy of classify(reconstructed); rr_peaks: MSE of the
/// predicted envelope. Throws std::invalid_argument if the needed target is missing.
double task_loss(const TaskModel& task, std::span<const float> reconstructed, const GroundTruth& truth);

/// Sum over tasks of weight * loss; weights keyed by task id.
double measured_task_error(const TaskSet& tasks, std::span<const float> reconstructed, const GroundTruth& truth,
                           const std::map<std::string, double>& weights);

/// Local maxima above threshold, strongest first, suppressing anything
/// within `refractory` samples of an accepted peak. Returned sorted.
std::vector<int> extract_peaks(std::span<const double> envelope, double threshold, int refractory = 20);

struct PeakScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Greedy one-to-one matching of closest pairs within tolerance.
PeakScore peak_f1(const std::vector<int>& predicted, const std::vector<int>& truth, int tolerance);

}  // namespace tac::tasks
