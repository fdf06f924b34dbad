#pragma once

// Level selection: the on-device dynamic policy, which sees only predicted
// errors, and the feedback-aware oracles, which see measured task errors.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tac/codec.hpp"
#include "tac/core.hpp"
#include "tac/eval.hpp"
#include "tac/tasks.hpp"

namespace tac::policy {

struct SelectionResult {
  std::int64_t segment_id = 0;
  LevelSpec chosen;
  /// Predicted (dynamic) or measured (oracle) error per cg considered.
  std::map<int, double> errors;
  bool fallback_used = false;
};

/// Highest cg whose error is <= bound, scanning `levels` in descending cg;
/// identity with fallback_used when no compressing level qualifies. Every
/// compressing level must have an entry in `errors`.
SelectionResult select_by_error(std::span<const LevelSpec> levels, const std::map<int, double>& errors, double bound,
                                std::int64_t segment_id = 0);

/// Dynamic selection: errors are the codec's predictions.
SelectionResult select_dynamic(std::span<const LevelSpec> levels, const std::map<int, double>& predicted,
                               double bound, std::int64_t segment_id = 0);
SelectionResult select_dynamic(const codec::Codec& codec, const Segment& segment, double bound);

/// Feedback-aware oracle on already measured losses.
SelectionResult select_oracle(std::span<const LevelSpec> levels, const std::map<int, double>& measured, double bound,
                              std::int64_t segment_id = 0);
/// Measures the weighted task error of every level's reconstruction first.
SelectionResult select_oracle(const Segment& segment, std::span<const LevelSpec> levels, double bound,
                              const tasks::TaskSet& tasks, const codec::Codec& codec,
                              const tasks::GroundTruth& truth, const std::map<std::string, double>& weights);

struct LevelOutcome {
  LevelSpec level;
  double predicted_error = 0.0;
  double measured_error = 0.0;
  std::map<std::string, double> task_losses;
  int predicted_class = 0;
  double peak_f1 = 0.0;
};

struct SegmentOutcomes {
  std::int64_t segment_id = 0;
  int label = 0;
  std::vector<LevelOutcome> levels;  // descending cg, as in the codec

  const LevelOutcome& at(int cg) const;
};

/// Everything the policies and the report need, computed once per segment
/// and level.
using LossTable = std::vector<SegmentOutcomes>;

LossTable build_loss_table(const codec::Codec& codec, const tasks::TaskSet& tasks, std::span<const Segment> segments,
                           const std::map<std::string, double>& weights);

enum class PolicyKind { dynamic, oracle3, oracle2 };
std::string to_string(PolicyKind k);
PolicyKind policy_from_string(const std::string& s);

/// Levels a policy may choose from: all configured levels, or for oracle2
/// only the highest cg and identity.
std::vector<LevelSpec> policy_levels(PolicyKind kind, std::span<const LevelSpec> codec_levels);

std::vector<SelectionResult> select_all(const LossTable& table, PolicyKind kind, double bound);
eval::EvalReport evaluate(const LossTable& table, PolicyKind kind, double bound);
/// Bounds must be ascending; the table must be non-empty.
std::vector<eval::EvalReport> sweep(std::span<const double> bounds, const LossTable& table, PolicyKind kind);

}  // namespace tac::policy
