#pragma once

// Edge/cloud simulation. The edge sees only the codec: it encodes every
// level, applies the dynamic policy and emits wire records. The cloud decodes
// them, runs the downstream tasks and scores the result.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tac/codec.hpp"
#include "tac/core.hpp"
#include "tac/eval.hpp"
#include "tac/tasks.hpp"

namespace tac::pipeline {

struct EdgeLogRow {
  std::uint32_t segment_id = 0;
  int cg = 1;
  float predicted_error = 0.0f;
  bool fallback = false;
};

struct EdgeOutput {
  std::vector<CompressedRecord> records;
  std::vector<std::uint8_t> bytes;  // concatenated wire records
  std::vector<EdgeLogRow> log;
};

EdgeOutput run_edge(std::span<const Segment> segments, const codec::Codec& codec, double bound);
void write_edge_log(const std::string& path, std::span<const EdgeLogRow> rows);

/// Binds every output of a run to its inputs.
struct RunManifest {
  double bound = 0.75;
  std::uint64_t seed = 7;
  std::vector<int> level_cgs;
  std::string codec_checkpoint;
  std::string tasks_checkpoint;
  std::string data;
  double w0 = 0.1;
  std::map<std::string, double> weights;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

struct CloudRow {
  std::uint32_t segment_id = 0;
  int cg = 1;
  float predicted_error = 0.0f;
  double measured_error = 0.0;
  std::map<std::string, double> task_losses;
  int label = 0;
  int predicted_class = 0;
  double peak_f1 = 0.0;
};

struct CloudResult {
  eval::EvalReport report;
  std::vector<CloudRow> rows;  // ordered by segment id
};

/// Throws std::out_of_range for a record whose segment has no ground truth
/// and std::invalid_argument when a record's level is not in the codec.
CloudResult run_cloud(std::span<const CompressedRecord> records, const codec::Codec& codec,
                      const tasks::TaskSet& tasks, const std::map<std::uint32_t, tasks::GroundTruth>& truth,
                      const RunManifest& manifest);
void write_cloud_csv(const std::string& path, std::span<const CloudRow> rows);

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace tac::pipeline
