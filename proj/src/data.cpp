#include "tac/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tac::data {

void GeneratorParams::validate() const {
  const double vals[] = {mean_rr, rr_jitter, noise_amplitude, baseline_wander_amplitude, af_rr_jitter,
                         noisy_noise_amplitude, alternans_ratio, rate_variation, sample_rate, pulse_amplitude,
                         pulse_width};
  for (double v : vals)
    if (!(v >= 0.0)) throw std::invalid_argument("generator parameters must be nonnegative");
  if (!(mean_rr > 0.0) || !(sample_rate > 0.0)) throw std::invalid_argument("mean_rr and sample_rate must be positive");
  if (segment_length <= 0) throw std::invalid_argument("segment_length must be positive");
  double total = 0.0;
  for (double p : class_mix) {
    if (!(p >= 0.0)) throw std::invalid_argument("class_mix entries must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("class_mix must sum to 1");
}

void to_json(nlohmann::json& j, const GeneratorParams& p) {
  j = nlohmann::json{{"mean_rr", p.mean_rr},
                     {"rr_jitter", p.rr_jitter},
                     {"noise_amplitude", p.noise_amplitude},
                     {"baseline_wander_amplitude", p.baseline_wander_amplitude},
                     {"class_mix", p.class_mix},
                     {"af_rr_jitter", p.af_rr_jitter},
                     {"noisy_noise_amplitude", p.noisy_noise_amplitude},
                     {"alternans_ratio", p.alternans_ratio},
                     {"rate_variation", p.rate_variation},
                     {"sample_rate", p.sample_rate},
                     {"segment_length", p.segment_length},
                     {"baseline", p.baseline},
                     {"pulse_amplitude", p.pulse_amplitude},
                     {"pulse_width", p.pulse_width}};
}

void from_json(const nlohmann::json& j, GeneratorParams& p) {
  const GeneratorParams d;
  p.mean_rr = j.value("mean_rr", d.mean_rr);
  p.rr_jitter = j.value("rr_jitter", d.rr_jitter);
  p.noise_amplitude = j.value("noise_amplitude", d.noise_amplitude);
  p.baseline_wander_amplitude = j.value("baseline_wander_amplitude", d.baseline_wander_amplitude);
  p.class_mix = j.value("class_mix", d.class_mix);
  p.af_rr_jitter = j.value("af_rr_jitter", d.af_rr_jitter);
  p.noisy_noise_amplitude = j.value("noisy_noise_amplitude", d.noisy_noise_amplitude);
  p.alternans_ratio = j.value("alternans_ratio", d.alternans_ratio);
  p.rate_variation = j.value("rate_variation", d.rate_variation);
  p.sample_rate = j.value("sample_rate", d.sample_rate);
  p.segment_length = j.value("segment_length", d.segment_length);
  p.baseline = j.value("baseline", d.baseline);
  p.pulse_amplitude = j.value("pulse_amplitude", d.pulse_amplitude);
  p.pulse_width = j.value("pulse_width", d.pulse_width);
}

Segment generate_segment(const GeneratorParams& params, ClassId cls, std::uint64_t seed, std::int64_t id) {
  params.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(cls)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int m = params.segment_length;
  const double fs = params.sample_rate;
  const double jitter = cls == ClassId::af_like ? params.af_rr_jitter : params.rr_jitter;
  const double noise = cls == ClassId::noisy ? params.noisy_noise_amplitude : params.noise_amplitude;

  const double sigma = params.pulse_width * fs;
  const int margin = static_cast<int>(std::ceil(3.0 * sigma));
  const int min_gap = static_cast<int>(std::ceil(params.min_peak_gap_samples()));
  const double rr = params.mean_rr * fs * (1.0 + params.rate_variation * unit(rng));

  std::vector<int> peaks;
  int pos = margin + static_cast<int>(std::floor(u01(rng) * rr));
  while (pos < m - margin) {
    peaks.push_back(pos);
    const int gap = static_cast<int>(std::lround(rr * (1.0 + jitter * unit(rng))));
    pos += std::max(gap, min_gap);
  }

  std::vector<double> x(static_cast<std::size_t>(m), params.baseline);
  for (std::size_t b = 0; b < peaks.size(); ++b) {
    double amp = params.pulse_amplitude * (1.0 + 0.05 * unit(rng));
    if (cls == ClassId::other && b % 2 == 1) amp *= params.alternans_ratio;
    const int c = peaks[b];
    const int reach = static_cast<int>(std::ceil(6.0 * sigma)) + 1;
    for (int t = std::max(0, c - reach); t < std::min(m, c + reach + 1); ++t) {
      const double d = (t - c) / std::max(sigma, 1e-9);
      x[static_cast<std::size_t>(t)] += amp * std::exp(-0.5 * d * d);
    }
  }
  if (params.baseline_wander_amplitude > 0.0) {
    const double f = 0.15 + 0.25 * u01(rng);
    const double phase = 2.0 * M_PI * u01(rng);
    for (int t = 0; t < m; ++t)
      x[static_cast<std::size_t>(t)] += params.baseline_wander_amplitude * std::sin(2.0 * M_PI * f * t / fs + phase);
  }
  if (noise > 0.0) {
    std::normal_distribution<double> n(0.0, noise);
    for (double& v : x) v += n(rng);
  }

  Segment s;
  s.id = id;
  s.sample_rate = fs;
  s.label = cls;
  s.samples.assign(x.begin(), x.end());
  s.peak_positions = std::move(peaks);
  return s;
}

std::vector<Segment> generate_dataset(const GeneratorParams& params, int count, std::uint64_t seed) {
  params.validate();
  if (count < 0) throw std::invalid_argument("count must be nonnegative");
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(params.class_mix.begin(), params.class_mix.end());
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto cls = static_cast<ClassId>(pick(rng));
    const std::uint64_t s = rng();
    out.push_back(generate_segment(params, cls, s, i));
  }
  return out;
}

double rr_interval_std(const std::vector<int>& peaks) {
  if (peaks.size() < 3) return 0.0;
  std::vector<double> gaps;
  for (std::size_t i = 1; i < peaks.size(); ++i) gaps.push_back(peaks[i] - peaks[i - 1]);
  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  double ss = 0.0;
  for (double g : gaps) ss += (g - mean) * (g - mean);
  return std::sqrt(ss / static_cast<double>(gaps.size() - 1));
}

void normalize_minmax(std::vector<float>& samples) {
  if (samples.empty()) return;
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double mn = *lo, mx = *hi;
  if (mx - mn <= 1e-12) {
    std::fill(samples.begin(), samples.end(), 0.5f);
    return;
  }
  for (float& v : samples) v = static_cast<float>(std::clamp((v - mn) / (mx - mn), 0.0, 1.0));
}

std::vector<Segment> load_csv(const std::string& path, int segment_length, double sample_rate, int max_cg,
                              std::int64_t first_id) {
  if (segment_length <= 0) throw std::invalid_argument("M must be positive");
  if (max_cg <= 0 || segment_length % max_cg != 0)
    throw std::invalid_argument("M not divisible by " + std::to_string(max_cg));
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::vector<float> values;
  std::optional<ClassId> label;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string first, second;
    std::getline(ss, first, ',');
    std::getline(ss, second, ',');
    try {
      std::size_t used = 0;
      const double v = std::stod(first, &used);
      if (used != first.size() || !std::isfinite(v)) throw std::invalid_argument(first);
      values.push_back(static_cast<float>(v));
      if (!second.empty() && !label) label = class_from_int(std::stoi(second));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": parse error at row " + std::to_string(row));
    }
  }

  std::vector<Segment> out;
  const std::size_t n = values.size() / static_cast<std::size_t>(segment_length);
  for (std::size_t w = 0; w < n; ++w) {
    Segment s;
    s.id = first_id + static_cast<std::int64_t>(w);
    s.sample_rate = sample_rate;
    s.label = label;
    s.samples.assign(values.begin() + static_cast<std::ptrdiff_t>(w * segment_length),
                     values.begin() + static_cast<std::ptrdiff_t>((w + 1) * segment_length));
    normalize_minmax(s.samples);
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSplit split_dataset(std::vector<Segment> segments, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) throw std::invalid_argument("split fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  std::set<std::int64_t> ids;
  for (const auto& s : segments)
    if (!ids.insert(s.id).second) throw std::invalid_argument("duplicate segment id " + std::to_string(s.id));

  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = segments.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(n * fractions[0])));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(n * fractions[1])));

  DatasetSplit out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_val ? out.validation : out.test);
    dst.push_back(std::move(segments[order[i]]));
  }
  return out;
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed manifest " + path + ": " + e.what());
  }
  DatasetManifest m;
  m.segment_length = j.value("segment_length", m.segment_length);
  m.sample_rate = j.value("sample_rate", m.sample_rate);
  m.max_cg = j.value("max_cg", m.max_cg);
  m.seed = j.value("seed", m.seed);
  m.split = j.value("split", m.split);
  if (j.contains("synthetic")) {
    m.synthetic_count = j["synthetic"].value("count", 0);
    if (j["synthetic"].contains("params")) m.generator = j["synthetic"]["params"].get<GeneratorParams>();
  }
  m.files = j.value("files", std::vector<std::string>{});
  m.base_dir = std::filesystem::path(path).parent_path().string();
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  nlohmann::json j{{"segment_length", m.segment_length}, {"sample_rate", m.sample_rate}, {"max_cg", m.max_cg},
                   {"seed", m.seed}, {"split", m.split}};
  if (m.synthetic_count > 0) j["synthetic"] = {{"count", m.synthetic_count}, {"params", m.generator}};
  if (!m.files.empty()) j["files"] = m.files;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << j.dump(2) << "\n";
}

std::vector<Segment> load_segments(const DatasetManifest& m) {
  std::vector<Segment> all;
  if (m.synthetic_count > 0) {
    GeneratorParams p = m.generator;
    p.segment_length = m.segment_length;
    p.sample_rate = m.sample_rate;
    all = generate_dataset(p, m.synthetic_count, m.seed);
  }
  for (const auto& f : m.files) {
    const auto full = (std::filesystem::path(m.base_dir) / f).string();
    auto segs = load_csv(full, m.segment_length, m.sample_rate, m.max_cg, static_cast<std::int64_t>(all.size()));
    std::move(segs.begin(), segs.end(), std::back_inserter(all));
  }
  if (all.empty()) throw std::runtime_error("manifest yields no segments");
  return all;
}

DatasetSplit load_dataset(const DatasetManifest& m) { return split_dataset(load_segments(m), m.split, m.seed); }

}  // namespace tac::data
