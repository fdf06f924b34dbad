#pragma once

// Shared domain types and compression-gain arithmetic.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tac {

enum class ClassId : int { normal = 0, af_like = 1, noisy = 2, other = 3 };
inline constexpr int kNumClasses = 4;

std::string to_string(ClassId c);
ClassId class_from_int(int v);
ClassId class_from_string(const std::string& s);

/// One fixed-length window of signal samples. Samples are stored at the same
/// precision as transmitted latents, so the identity level is an exact
/// passthrough.
struct Segment {
  std::int64_t id = 0;
  std::vector<float> samples;
  double sample_rate = 0.0;
  std::optional<ClassId> label;
  std::optional<std::vector<int>> peak_positions;

  int length() const { return static_cast<int>(samples.size()); }
};

/// Throws std::invalid_argument when the segment breaks its invariants
/// (empty, length not divisible by max_cg, peaks unsorted or out of range).
void validate_segment(const Segment& s, int max_cg);

struct LevelSpec {
  int cg = 1;
  int latent_len = 0;
  bool is_identity = true;

  static LevelSpec make(int cg, int segment_length);
  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

/// Task weights are keyed by task id ("hr_classify", "rr_peaks").
struct BoundConfig {
  double upper_bound = 0.75;
  std::map<std::string, double> task_weights{{"hr_classify", 1.0}, {"rr_peaks", 1.0}};
  double reconstruction_weight = 0.1;

  void validate() const;
};

struct CompressedRecord {
  std::uint32_t segment_id = 0;
  std::uint16_t cg = 1;
  std::vector<float> latent;
  float predicted_error = 0.0f;

  friend bool operator==(const CompressedRecord&, const CompressedRecord&) = default;
};

/// Arithmetic mean of per-segment compression gains.
double average_cg(std::span<const int> per_segment_cgs);

/// Throws std::invalid_argument naming the violated constraint.
void validate_level_set(std::span<const LevelSpec> levels, int segment_length);

/// Builds LevelSpecs for the given gains, sorted by descending cg, and
/// validates the set.
std::vector<LevelSpec> make_level_set(std::span<const int> cgs, int segment_length);

}  // namespace tac
