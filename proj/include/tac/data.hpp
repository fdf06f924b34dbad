#pragma once

// Labelled segments: a synthetic ECG-like generator with exact ground truth,
// CSV ingestion with windowing and normalisation, and dataset splitting.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tac/core.hpp"

namespace tac::data {

struct GeneratorParams {
  double mean_rr = 0.8;  // seconds
  double rr_jitter = 0.03;
  double noise_amplitude = 0.01;
  double baseline_wander_amplitude = 0.03;
  std::array<double, kNumClasses> class_mix{0.25, 0.25, 0.25, 0.25};

  // Class-specific knobs. af_like replaces rr_jitter, noisy replaces
  // noise_amplitude, other scales every second pulse.
  double af_rr_jitter = 0.5;
  double noisy_noise_amplitude = 0.12;
  double alternans_ratio = 0.5;

  double rate_variation = 0.1;  // per-segment fraction around mean_rr
  double sample_rate = 128.0;
  int segment_length = 1024;
  double baseline = 0.3;
  double pulse_amplitude = 0.6;
  double pulse_width = 0.03;  // Gaussian sigma, seconds

  void validate() const;
  double min_peak_gap_samples() const { return 0.25 * mean_rr * sample_rate; }
};

void to_json(nlohmann::json& j, const GeneratorParams& p);
void from_json(const nlohmann::json& j, GeneratorParams& p);

/// Sum of Gaussian pulses at quasi-periodic peak times, plus sinusoidal
/// baseline wander and white noise. Deterministic in (params, cls, seed).
Segment generate_segment(const GeneratorParams& params, ClassId cls, std::uint64_t seed, std::int64_t id = 0);

/// `count` segments with classes drawn from params.class_mix; ids 0..count-1.
std::vector<Segment> generate_dataset(const GeneratorParams& params, int count, std::uint64_t seed);

/// Sample standard deviation of consecutive peak gaps (samples).
double rr_interval_std(const std::vector<int>& peaks);

/// In-place min-max scaling to [0, 1]; constant input becomes all 0.5.
void normalize_minmax(std::vector<float>& samples);

/// One sample per row, optional second column holding an integer class label
/// for the whole file. Non-overlapping windows of M samples; the trailing
/// remainder is dropped. Lines starting with '#' are ignored.
std::vector<Segment> load_csv(const std::string& path, int segment_length, double sample_rate, int max_cg = 64,
                              std::int64_t first_id = 0);

struct DatasetSplit {
  std::vector<Segment> train;
  std::vector<Segment> validation;
  std::vector<Segment> test;
  std::uint64_t seed = 0;
};

/// Deterministic shuffled split. Sizes are round(n * f_train),
/// round(n * f_val) and the remainder.
DatasetSplit split_dataset(std::vector<Segment> segments, std::array<double, 3> fractions, std::uint64_t seed);

/// JSON sidecar describing where segments come from and how to split them.
struct DatasetManifest {
  int segment_length = 1024;
  double sample_rate = 128.0;
  int max_cg = 64;
  std::uint64_t seed = 7;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  // Either a synthetic block...
  int synthetic_count = 0;
  GeneratorParams generator;
  // ...or CSV files (relative to the manifest's directory).
  std::vector<std::string> files;
  std::string base_dir;
};

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& m);
std::vector<Segment> load_segments(const DatasetManifest& m);
DatasetSplit load_dataset(const DatasetManifest& m);

}  // namespace tac::data
