#pragma once

// Loss functions and the staged training procedure.
//
//   tasks   pre-train classifier and peak locator on raw segments, freeze
//   phase 1 reconstruction only, summed over non-identity levels
//   phase 2 w0 * L_R + sum_i w_i * L_i through the frozen tasks
//   phase 3 predictor heads only, regressing the measured weighted task error

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tac/codec.hpp"
#include "tac/core.hpp"
#include "tac/nn.hpp"
#include "tac/tasks.hpp"

namespace tac::training {

inline constexpr double kRelativeErrorEps = 1e-3;

/// Percentage units: (100 / M) * sum |x - x_hat| / max(|x|, eps).
double reconstruction_loss(std::span<const float> x, std::span<const float> x_hat, double eps = kRelativeErrorEps);
double reconstruction_loss(std::span<const double> x, std::span<const double> x_hat, double eps = kRelativeErrorEps);
/// Sum of w_i * L_i over the tasks present in `losses`.
double weighted_task_loss(const std::map<std::string, double>& losses, const std::map<std::string, double>& weights);
double combined_loss(double l_r, double l_w, double w0);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double lr_decay = 1e-5;
  int batch_size = 32;
  int epochs_tasks = 60;
  int epochs_phase1 = 10;
  int epochs_phase2 = 20;
  int epochs_phase3 = 10;
  std::uint64_t seed = 5;
  BoundConfig weights;

  void validate() const;
  nn::AdamConfig adam() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochMetrics {
  int phase = 0;  // 0 marks task pre-training
  int epoch = 0;
  int level = 0;  // cg; 0 for task rows
  double l_r = 0.0;
  double l_w = 0.0;
  double l_c = 0.0;
  double predictor_mse = 0.0;
};

class MetricsLog {
 public:
  void add(const EpochMetrics& m) { rows_.push_back(m); }
  const std::vector<EpochMetrics>& rows() const { return rows_; }
  /// Rows of one phase and level, in epoch order.
  std::vector<EpochMetrics> series(int phase, int level) const;
  void write_csv(const std::string& path) const;

 private:
  std::vector<EpochMetrics> rows_;
};

/// Losses of one sample at one level, filled by sample_objective.
struct SampleLosses {
  double l_r = 0.0;
  std::map<std::string, double> task;
  double l_w = 0.0;
  double l_c = 0.0;
};

/// Builds w0 * L_R + L_w for one segment at one non-identity level. With
/// `tasks` null (or every weight zero) the objective is w0 * L_R.
nn::Var sample_objective(nn::Graph& g, const codec::Codec& codec, const LevelSpec& level, const Segment& segment,
                         const tasks::TaskSet* tasks, const tasks::GroundTruth* truth, double w0,
                         const std::map<std::string, double>& weights, SampleLosses* losses = nullptr);

/// Trains both task models on labelled raw segments and freezes them.
void pretrain_tasks(tasks::TaskSet& tasks, const std::vector<Segment>& train, const TrainConfig& cfg,
                    MetricsLog* log = nullptr);

void train_phase1(codec::Codec& codec, const std::vector<Segment>& train, const TrainConfig& cfg,
                  MetricsLog* log = nullptr);
void train_phase2(codec::Codec& codec, const tasks::TaskSet& tasks, const std::vector<Segment>& train,
                  const TrainConfig& cfg, MetricsLog* log = nullptr);
void train_phase3(codec::Codec& codec, const tasks::TaskSet& tasks, const std::vector<Segment>& train,
                  const TrainConfig& cfg, MetricsLog* log = nullptr);

/// Measured weighted task error of decode(encode(segment, level)).
double measured_level_error(const codec::Codec& codec, const tasks::TaskSet& tasks, const Segment& segment,
                            const LevelSpec& level, const tasks::GroundTruth& truth,
                            const std::map<std::string, double>& weights);

/// Pearson correlation. Needs at least 3 points and nonzero variance in
/// both coordinates; throws std::domain_error otherwise.
double correlation_report(std::span<const std::pair<double, double>> points);

}  // namespace tac::training
