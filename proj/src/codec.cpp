#include "tac/codec.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace tac::codec {

namespace {

bool is_pow2(int v) { return v > 0 && std::has_single_bit(static_cast<unsigned>(v)); }
int log2i(int v) { return std::countr_zero(static_cast<unsigned>(v)); }
std::string level_tag(int cg) { return "cg" + std::to_string(cg); }

}  // namespace

std::vector<LevelSpec> CodecConfig::levels() const { return make_level_set(level_cgs, segment_length); }

int CodecConfig::trunk_stages() const {
  int min_cg = 0;
  for (int cg : level_cgs)
    if (cg > 1 && (min_cg == 0 || cg < min_cg)) min_cg = cg;
  return min_cg == 0 ? 0 : log2i(min_cg);
}

void CodecConfig::validate() const {
  (void)levels();
  for (int cg : level_cgs)
    if (!is_pow2(cg)) throw std::invalid_argument("cg must be a power of two: " + std::to_string(cg));
  const int stages = trunk_stages();
  if (stages == 0) return;
  if (static_cast<int>(trunk_channels.size()) != stages || static_cast<int>(trunk_kernels.size()) != stages)
    throw std::invalid_argument("trunk needs " + std::to_string(stages) + " stages for the configured levels");
  if (static_cast<int>(decoder_channels.size()) != stages + 1)
    throw std::invalid_argument("decoder needs " + std::to_string(stages + 1) + " channel widths");
  auto odd = [](int k) { return k > 0 && k % 2 == 1; };
  for (int k : trunk_kernels)
    if (!odd(k)) throw std::invalid_argument("kernel sizes must be odd");
  if (!odd(head_kernel) || !odd(latent_kernel) || !odd(decoder_kernel) || !odd(output_kernel) || !odd(adapter_kernel))
    throw std::invalid_argument("kernel sizes must be odd");
  for (int c : trunk_channels)
    if (c <= 0) throw std::invalid_argument("channel widths must be positive");
  for (int c : decoder_channels)
    if (c <= 0) throw std::invalid_argument("channel widths must be positive");
  if (head_channels <= 0 || adapter_channels <= 0 || predictor_hidden < 0)
    throw std::invalid_argument("channel widths must be positive");
  if (!(identity_prediction >= 0.0)) throw std::invalid_argument("identity prediction must be nonnegative");
}

void to_json(nlohmann::json& j, const CodecConfig& c) {
  j = nlohmann::json{{"segment_length", c.segment_length},   {"level_cgs", c.level_cgs},
                     {"trunk_channels", c.trunk_channels},   {"trunk_kernels", c.trunk_kernels},
                     {"head_channels", c.head_channels},     {"head_kernel", c.head_kernel},
                     {"latent_kernel", c.latent_kernel},     {"decoder_channels", c.decoder_channels},
                     {"decoder_kernel", c.decoder_kernel},   {"output_kernel", c.output_kernel},
                     {"adapter_channels", c.adapter_channels}, {"adapter_kernel", c.adapter_kernel},
                     {"predictor_hidden", c.predictor_hidden}, {"identity_prediction", c.identity_prediction},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CodecConfig& c) {
  const CodecConfig d;
  c.segment_length = j.value("segment_length", d.segment_length);
  c.level_cgs = j.value("level_cgs", d.level_cgs);
  c.trunk_channels = j.value("trunk_channels", d.trunk_channels);
  c.trunk_kernels = j.value("trunk_kernels", d.trunk_kernels);
  c.head_channels = j.value("head_channels", d.head_channels);
  c.head_kernel = j.value("head_kernel", d.head_kernel);
  c.latent_kernel = j.value("latent_kernel", d.latent_kernel);
  c.decoder_channels = j.value("decoder_channels", d.decoder_channels);
  c.decoder_kernel = j.value("decoder_kernel", d.decoder_kernel);
  c.output_kernel = j.value("output_kernel", d.output_kernel);
  c.adapter_channels = j.value("adapter_channels", d.adapter_channels);
  c.adapter_kernel = j.value("adapter_kernel", d.adapter_kernel);
  c.predictor_hidden = j.value("predictor_hidden", d.predictor_hidden);
  c.identity_prediction = j.value("identity_prediction", d.identity_prediction);
  c.seed = j.value("seed", d.seed);
}

Codec::Codec(CodecConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  levels_ = cfg_.levels();
  build();
  params_.init_glorot(cfg_.seed);
}

Codec::Codec(const Codec& o)
    : cfg_(o.cfg_),
      levels_(o.levels_),
      params_(o.params_),
      trunk_(o.trunk_),
      decoder_(o.decoder_),
      level_modules_(o.level_modules_),
      completed_phase_(o.completed_phase_),
      trunk_passes_(o.trunk_passes()) {}

Codec& Codec::operator=(const Codec& o) {
  if (this == &o) return *this;
  cfg_ = o.cfg_;
  levels_ = o.levels_;
  params_ = o.params_;
  trunk_ = o.trunk_;
  decoder_ = o.decoder_;
  level_modules_ = o.level_modules_;
  completed_phase_ = o.completed_phase_;
  trunk_passes_.store(o.trunk_passes(), std::memory_order_relaxed);
  return *this;
}

void Codec::build() {
  const int stages = cfg_.trunk_stages();
  if (stages == 0) return;

  auto conv = [this](const std::string& name, const std::string& group, int out, int in, int k, int stride) {
    Layer l;
    l.weight = params_.add(name + ".weight", group, {out, in, k});
    l.bias = params_.add(name + ".bias", group, {out});
    l.stride = stride;
    return l;
  };
  auto dense = [this](const std::string& name, const std::string& group, int out, int in) {
    Layer l;
    l.weight = params_.add(name + ".weight", group, {out, in});
    l.bias = params_.add(name + ".bias", group, {out});
    return l;
  };

  int in = 1;
  for (int s = 0; s < stages; ++s) {
    trunk_.push_back(conv("trunk." + std::to_string(s), "trunk", cfg_.trunk_channels[s], in, cfg_.trunk_kernels[s], 2));
    in = cfg_.trunk_channels[s];
  }
  const int trunk_out = in;
  const auto& dc = cfg_.decoder_channels;

  decoder_.push_back(conv("decoder.0", "decoder", dc[0], 1, cfg_.decoder_kernel, 1));
  for (int s = 1; s <= stages; ++s)
    decoder_.push_back(conv("decoder." + std::to_string(s), "decoder", dc[s], dc[s - 1], cfg_.decoder_kernel, 1));
  decoder_.push_back(conv("decoder.out", "decoder", 1, dc[stages], cfg_.output_kernel, 1));

  const int min_cg = 1 << stages;
  std::vector<LevelSpec> ascending(levels_.rbegin(), levels_.rend());
  for (const auto& lv : ascending) {
    if (lv.is_identity) continue;
    LevelModules m;
    m.cg = lv.cg;
    m.extra_stages = log2i(lv.cg / min_cg);
    const std::string tag = level_tag(lv.cg);
    int c = trunk_out;
    for (int e = 0; e < m.extra_stages; ++e) {
      m.head.push_back(conv("head." + tag + "." + std::to_string(e), "head." + tag, cfg_.head_channels, c,
                            cfg_.head_kernel, 2));
      c = cfg_.head_channels;
    }
    m.head.push_back(conv("head." + tag + ".latent", "head." + tag, 1, c, cfg_.latent_kernel, 1));
    const int feat = c;
    if (cfg_.predictor_hidden > 0) {
      m.predictor.push_back(dense("predictor." + tag + ".hidden", "predictor." + tag, cfg_.predictor_hidden, feat));
      m.predictor.push_back(dense("predictor." + tag + ".out", "predictor." + tag, 1, cfg_.predictor_hidden));
    } else {
      m.predictor.push_back(dense("predictor." + tag + ".out", "predictor." + tag, 1, feat));
    }
    if (m.extra_stages > 0) {
      const std::string g = "adapter." + tag;
      m.adapter.push_back(conv(g + ".0", g, cfg_.adapter_channels, 1, cfg_.adapter_kernel, 1));
      m.adapter.push_back(conv(g + ".1", g, dc[1], cfg_.adapter_channels, 3, 1));
      for (int e = 0; e < m.extra_stages; ++e) m.adapter.push_back(conv(g + "." + std::to_string(e + 2), g, dc[1], dc[1], 3, 1));
    }
    level_modules_.push_back(std::move(m));
  }
}

const LevelSpec& Codec::level(int cg) const {
  for (const auto& l : levels_)
    if (l.cg == cg) return l;
  throw std::invalid_argument("unknown level cg " + std::to_string(cg));
}

bool Codec::has_level(int cg) const {
  return std::any_of(levels_.begin(), levels_.end(), [cg](const LevelSpec& l) { return l.cg == cg; });
}

const Codec::LevelModules& Codec::modules(const LevelSpec& level) const {
  for (const auto& m : level_modules_)
    if (m.cg == level.cg) return m;
  throw std::invalid_argument("unknown level cg " + std::to_string(level.cg));
}

void Codec::check_segment(const Segment& s) const {
  if (s.length() != cfg_.segment_length)
    throw std::invalid_argument("segment " + std::to_string(s.id) + ": length " + std::to_string(s.length()) +
                                " != M " + std::to_string(cfg_.segment_length));
}

nn::Var Codec::apply(nn::Graph& g, nn::Var x, const Layer& l, bool relu) const {
  const bool is_dense = params_.info(l.weight).shape.size() == 2;
  nn::Var y = is_dense ? nn::dense(g, x, p(l.weight), p(l.bias)) : nn::conv1d(g, x, p(l.weight), p(l.bias), l.stride);
  return relu ? nn::relu(g, y) : y;
}

nn::Var Codec::trunk_forward(nn::Graph& g, nn::Var x) const {
  trunk_passes_.fetch_add(1, std::memory_order_relaxed);
  for (const auto& l : trunk_) x = apply(g, x, l, true);
  return x;
}

HeadOutput Codec::head_forward(nn::Graph& g, nn::Var trunk_out, const LevelSpec& level) const {
  const auto& m = modules(level);
  nn::Var f = trunk_out;
  for (std::size_t i = 0; i + 1 < m.head.size(); ++i) f = apply(g, f, m.head[i], true);
  return HeadOutput{f, apply(g, f, m.head.back(), false)};
}

nn::Var Codec::predictor_forward(nn::Graph& g, nn::Var features, const LevelSpec& level) const {
  const auto& m = modules(level);
  nn::Var h = nn::global_avg_pool(g, features);
  for (const auto& l : m.predictor) h = apply(g, h, l, true);
  return h;
}

nn::Var Codec::decoder_forward(nn::Graph& g, nn::Var latent, const LevelSpec& level) const {
  const auto& m = modules(level);
  const int stages = cfg_.trunk_stages();
  nn::Var h;
  int next_stage;
  if (m.extra_stages == 0) {
    h = apply(g, latent, decoder_[0], true);
    next_stage = 1;
  } else {
    h = apply(g, latent, m.adapter[0], true);
    h = apply(g, h, m.adapter[1], true);
    for (int e = 0; e < m.extra_stages; ++e) {
      h = nn::upsample2(g, h);
      h = apply(g, h, m.adapter[static_cast<std::size_t>(e) + 2], true);
    }
    h = nn::upsample2(g, h);
    next_stage = 2;
  }
  for (int s = next_stage; s <= stages; ++s) {
    h = nn::upsample2(g, h);
    h = apply(g, h, decoder_[static_cast<std::size_t>(s)], true);
  }
  return apply(g, h, decoder_.back(), false);
}

std::vector<float> Codec::encode(const Segment& segment, const LevelSpec& level) const {
  check_segment(segment);
  const LevelSpec& lv = this->level(level.cg);
  if (lv.is_identity) return segment.samples;
  nn::Graph g;
  const auto x = g.input(nn::Tensor::from_samples(segment.samples));
  const auto head = head_forward(g, trunk_forward(g, x), lv);
  const auto& v = g.value(head.latent).data;
  return std::vector<float>(v.begin(), v.end());
}

double Codec::predict_error(const Segment& segment, const LevelSpec& level) const {
  check_segment(segment);
  const LevelSpec& lv = this->level(level.cg);
  if (lv.is_identity) return cfg_.identity_prediction;
  nn::Graph g;
  const auto x = g.input(nn::Tensor::from_samples(segment.samples));
  const auto head = head_forward(g, trunk_forward(g, x), lv);
  return g.value(predictor_forward(g, head.features, lv)).scalar();
}

std::vector<LevelEncoding> Codec::encode_all(const Segment& segment) const {
  check_segment(segment);
  std::vector<LevelEncoding> out;
  nn::Graph g;
  nn::Var trunk{};
  if (!level_modules_.empty()) trunk = trunk_forward(g, g.input(nn::Tensor::from_samples(segment.samples)));
  for (const auto& lv : levels_) {
    if (lv.is_identity) {
      out.push_back(LevelEncoding{lv, segment.samples, cfg_.identity_prediction});
      continue;
    }
    const auto head = head_forward(g, trunk, lv);
    const auto& v = g.value(head.latent).data;
    std::vector<float> latent(v.begin(), v.end());
    const double pred = g.value(predictor_forward(g, head.features, lv)).scalar();
    out.push_back(LevelEncoding{lv, std::move(latent), pred});
  }
  return out;
}

std::vector<float> Codec::decode(const CompressedRecord& record) const {
  const LevelSpec& lv = level(record.cg);
  if (static_cast<int>(record.latent.size()) != lv.latent_len)
    throw std::invalid_argument("latent length " + std::to_string(record.latent.size()) + " does not match cg " +
                                std::to_string(record.cg));
  if (lv.is_identity) return record.latent;
  nn::Graph g;
  const auto z = g.input(nn::Tensor::from_samples(record.latent));
  const auto& v = g.value(decoder_forward(g, z, lv)).data;
  return std::vector<float>(v.begin(), v.end());
}

std::map<std::string, std::size_t> Codec::count_parameters() const {
  std::map<std::string, std::size_t> out;
  for (const auto& g : params_.groups()) out[g] = params_.group_size(g);
  out["total"] = params_.size();
  return out;
}

std::size_t Codec::independent_encoder_parameters() const {
  const std::size_t trunk = params_.group_size("trunk");
  std::size_t total = 0;
  for (const auto& lv : levels_) {
    total += trunk;
    if (lv.is_identity) continue;
    total += params_.group_size("head." + level_tag(lv.cg)) + params_.group_size("predictor." + level_tag(lv.cg));
  }
  return total;
}

std::vector<LayerDesc> Codec::encoder_layers() const {
  std::vector<LayerDesc> out;
  auto desc = [this](const Layer& l, const std::string& kind) {
    const auto& name = params_.info(l.weight).name;
    return LayerDesc{name.substr(0, name.size() - std::string(".weight").size()), kind, l.stride};
  };
  for (const auto& l : trunk_) out.push_back(desc(l, "conv"));
  for (const auto& m : level_modules_) {
    for (const auto& l : m.head) out.push_back(desc(l, "conv"));
    out.push_back(LayerDesc{"predictor." + level_tag(m.cg) + ".pool", "global_avg_pool", 1});
    for (const auto& l : m.predictor) out.push_back(desc(l, "dense"));
  }
  return out;
}

std::set<std::string> Codec::reconstruction_groups() const {
  std::set<std::string> out;
  for (const auto& g : params_.groups())
    if (g.rfind("predictor.", 0) != 0) out.insert(g);
  return out;
}

void Codec::init_predictor_constant(const LevelSpec& level, double value) {
  const auto& out = modules(level).predictor.back();
  auto w = params_.values(out.weight);
  std::fill(w.begin(), w.end(), 0.0);
  params_.values(out.bias)[0] = value;
}

void Codec::fold_predictor_input(const LevelSpec& level, std::span<const double> shift, std::span<const double> scale) {
  const auto& first = modules(level).predictor.front();
  const auto& shape = params_.info(first.weight).shape;
  const auto nout = static_cast<std::size_t>(shape[0]), nin = static_cast<std::size_t>(shape[1]);
  if (shift.size() != nin || scale.size() != nin)
    throw std::invalid_argument("fold_predictor_input: expected " + std::to_string(nin) + " features");
  auto w = params_.values(first.weight);
  auto b = params_.values(first.bias);
  for (std::size_t o = 0; o < nout; ++o) {
    double offset = 0.0;
    for (std::size_t i = 0; i < nin; ++i) {
      double& wi = w[o * nin + i];
      wi *= scale[i];
      offset += wi * shift[i];
    }
    b[o] -= offset;
  }
}

std::set<std::string> Codec::predictor_groups() const {
  std::set<std::string> out;
  for (const auto& g : params_.groups())
    if (g.rfind("predictor.", 0) == 0) out.insert(g);
  return out;
}

void Codec::save(const std::string& path) const {
  nlohmann::json doc{{"format", "tac-codec"},
                     {"version", 1},
                     {"config", cfg_},
                     {"completed_phase", completed_phase_},
                     {"tensors", params_.to_json()}};
  nn::write_archive(path, doc);
}

Codec Codec::load(const std::string& path) {
  const auto doc = nn::read_archive(path);
  if (doc.value("format", "") != "tac-codec") throw std::runtime_error(path + " is not a codec checkpoint");
  Codec c(doc.at("config").get<CodecConfig>());
  c.params_.load_json(doc.at("tensors"));
  c.completed_phase_ = doc.value("completed_phase", 0);
  return c;
}

Codec Codec::load(const std::string& path, const CodecConfig& expected) {
  Codec c = load(path);
  if (!(c.config() == expected)) throw std::runtime_error("checkpoint config mismatch: " + path);
  return c;
}

}  // namespace tac::codec
