#pragma once

// Multi-level compressor / decompressor.
//
// Layout for the default level set {64, 32, 1} and M = 1024:
//
//   x (1, 1024) -> trunk: 5 x [conv stride 2 + relu] -> (64, 32)      shared
//     cg32 head: conv(1, 3)                        -> latent (1, 32)
//     cg64 head: conv(32, 7, stride 2) + relu -> conv(1, 3) -> (1, 16)
//   predictor per level: global average pool of the head's pre-latent
//     features -> dense -> relu -> predicted task error
//   main decoder (cg32): conv -> 5 x [upsample 2 + conv + relu] -> conv(1)
//   cg64 adapter: conv(16, 7), conv(32, 3), upsample, conv(32, 3), upsample,
//     then joins the main decoder after its first stage.
//
// Every level above the smallest non-identity gain adds one stride-2 head
// stage and one adapter upsample stage per factor of two.

#include <atomic>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tac/core.hpp"
#include "tac/nn.hpp"

namespace tac::codec {

struct CodecConfig {
  int segment_length = 1024;
  std::vector<int> level_cgs{64, 32, 1};
  std::vector<int> trunk_channels{16, 24, 32, 48, 64};
  std::vector<int> trunk_kernels{7, 3, 3, 3, 3};
  int head_channels = 32;
  int head_kernel = 7;
  int latent_kernel = 3;
  std::vector<int> decoder_channels{64, 32, 32, 24, 16, 8};
  int decoder_kernel = 3;
  int output_kernel = 5;
  int adapter_channels = 16;
  int adapter_kernel = 7;
  int predictor_hidden = 0;
  double identity_prediction = 0.0;
  std::uint64_t seed = 1;

  /// Descending cg.
  std::vector<LevelSpec> levels() const;
  /// log2 of the smallest non-identity cg; 0 for an identity-only set.
  int trunk_stages() const;
  void validate() const;

  friend bool operator==(const CodecConfig&, const CodecConfig&) = default;
};

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

struct LevelEncoding {
  LevelSpec level;
  std::vector<float> latent;
  double predicted_error = 0.0;
};

struct LayerDesc {
  std::string name;
  std::string kind;  // conv, dense, global_avg_pool
  int stride = 1;
};

/// Pre-latent features and latent of one level head.
struct HeadOutput {
  nn::Var features;
  nn::Var latent;
};

class Codec {
 public:
  explicit Codec(CodecConfig cfg);
  Codec(const Codec& other);
  Codec& operator=(const Codec& other);

  const CodecConfig& config() const { return cfg_; }
  const std::vector<LevelSpec>& levels() const { return levels_; }
  const LevelSpec& level(int cg) const;
  bool has_level(int cg) const;

  /// Identity returns the samples bitwise; other levels return M / cg values.
  std::vector<float> encode(const Segment& segment, const LevelSpec& level) const;
  /// Nonnegative; identity_prediction for the identity level.
  double predict_error(const Segment& segment, const LevelSpec& level) const;
  /// One entry per level, descending cg, from a single trunk pass.
  std::vector<LevelEncoding> encode_all(const Segment& segment) const;
  /// Reconstruction of length M.
  std::vector<float> decode(const CompressedRecord& record) const;

  /// Parameter counts per group plus "total"; the trunk is counted once.
  std::map<std::string, std::size_t> count_parameters() const;
  /// Parameters of a design with one private encoder (trunk + head +
  /// predictor) per configured level.
  std::size_t independent_encoder_parameters() const;
  std::vector<LayerDesc> encoder_layers() const;

  // Graph builders. Level indices refer to levels(); identity has no head.
  nn::Var trunk_forward(nn::Graph& g, nn::Var x) const;
  HeadOutput head_forward(nn::Graph& g, nn::Var trunk_out, const LevelSpec& level) const;
  nn::Var predictor_forward(nn::Graph& g, nn::Var features, const LevelSpec& level) const;
  nn::Var decoder_forward(nn::Graph& g, nn::Var latent, const LevelSpec& level) const;

  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  /// Parameter groups: trunk, head.cgN, predictor.cgN, decoder, adapter.cgN.
  std::set<std::string> reconstruction_groups() const;
  std::set<std::string> predictor_groups() const;
  /// Zeroes the predictor's output weights and sets its output bias, so the
  /// head starts as the constant predictor `value`.
  void init_predictor_constant(const LevelSpec& level, double value);
  /// Rewrites the first predictor layer, trained on pooled features mapped
  /// through (f - shift) * scale, so that it consumes the raw pooled features.
  void fold_predictor_input(const LevelSpec& level, std::span<const double> shift, std::span<const double> scale);

  int completed_phase() const { return completed_phase_; }
  void set_completed_phase(int phase) { completed_phase_ = phase; }

  std::uint64_t trunk_passes() const { return trunk_passes_.load(std::memory_order_relaxed); }
  void reset_trunk_passes() { trunk_passes_.store(0, std::memory_order_relaxed); }

  void save(const std::string& path) const;
  static Codec load(const std::string& path);
  /// Throws std::runtime_error if the stored config differs from `expected`.
  static Codec load(const std::string& path, const CodecConfig& expected);

 private:
  struct Layer {
    int weight = -1;
    int bias = -1;
    int stride = 1;
  };
  struct LevelModules {
    int cg = 0;
    int extra_stages = 0;  // log2(cg / min cg)
    std::vector<Layer> head;  // stride-2 stages, then the latent conv
    std::vector<Layer> predictor;
    std::vector<Layer> adapter;  // convs; upsampling is implied by position
  };

  void build();
  nn::Var apply(nn::Graph& g, nn::Var x, const Layer& l, bool relu) const;
  nn::Param p(int id) const { return nn::Param{&params_, id}; }
  const LevelModules& modules(const LevelSpec& level) const;
  void check_segment(const Segment& s) const;

  CodecConfig cfg_;
  std::vector<LevelSpec> levels_;
  nn::ParameterStore params_;
  std::vector<Layer> trunk_;
  std::vector<Layer> decoder_;  // stage 0, stages 1..S, output conv
  std::vector<LevelModules> level_modules_;
  int completed_phase_ = 0;
  mutable std::atomic<std::uint64_t> trunk_passes_{0};
};

}  // namespace tac::codec
