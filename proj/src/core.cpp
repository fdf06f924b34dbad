#include "tac/core.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace tac {

std::string to_string(ClassId c) {
  switch (c) {
    case ClassId::normal: return "normal";
    case ClassId::af_like: return "af_like";
    case ClassId::noisy: return "noisy";
    case ClassId::other: return "other";
  }
  return "unknown";
}

ClassId class_from_int(int v) {
  if (v < 0 || v >= kNumClasses) throw std::invalid_argument("class id out of range: " + std::to_string(v));
  return static_cast<ClassId>(v);
}

ClassId class_from_string(const std::string& s) {
  for (int i = 0; i < kNumClasses; ++i)
    if (to_string(static_cast<ClassId>(i)) == s) return static_cast<ClassId>(i);
  return class_from_int(std::stoi(s));
}

void validate_segment(const Segment& s, int max_cg) {
  if (s.samples.empty()) throw std::invalid_argument("segment " + std::to_string(s.id) + ": empty");
  if (max_cg <= 0 || s.length() % max_cg != 0)
    throw std::invalid_argument("segment " + std::to_string(s.id) + ": length " + std::to_string(s.length()) +
                                " not divisible by " + std::to_string(max_cg));
  if (s.peak_positions) {
    const auto& p = *s.peak_positions;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < 0 || p[i] >= s.length())
        throw std::invalid_argument("segment " + std::to_string(s.id) + ": peak position out of range");
      if (i > 0 && p[i] <= p[i - 1])
        throw std::invalid_argument("segment " + std::to_string(s.id) + ": peak positions not strictly increasing");
    }
  }
}

LevelSpec LevelSpec::make(int cg, int segment_length) {
  if (cg <= 0) throw std::invalid_argument("cg must be positive");
  if (segment_length <= 0 || segment_length % cg != 0)
    throw std::invalid_argument("M not divisible by " + std::to_string(cg));
  return LevelSpec{cg, segment_length / cg, cg == 1};
}

void BoundConfig::validate() const {
  if (!(upper_bound >= 0.0)) throw std::invalid_argument("upper bound must be nonnegative");
  if (!(reconstruction_weight >= 0.0)) throw std::invalid_argument("reconstruction weight must be nonnegative");
  bool any = false;
  for (const auto& [task, w] : task_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("task weight for " + task + " must be nonnegative");
    any = any || w > 0.0;
  }
  if (!any) throw std::invalid_argument("at least one task weight must be positive");
}

double average_cg(std::span<const int> per_segment_cgs) {
  if (per_segment_cgs.empty()) throw std::invalid_argument("average_cg: empty list");
  double sum = 0.0;
  for (int cg : per_segment_cgs) {
    if (cg <= 0) throw std::invalid_argument("average_cg: non-positive cg");
    sum += cg;
  }
  return sum / static_cast<double>(per_segment_cgs.size());
}

void validate_level_set(std::span<const LevelSpec> levels, int segment_length) {
  if (segment_length <= 0) throw std::invalid_argument("M must be positive");
  std::set<int> seen;
  bool has_identity = false;
  for (const auto& l : levels) {
    if (l.cg <= 0) throw std::invalid_argument("cg must be positive");
    if (!seen.insert(l.cg).second) throw std::invalid_argument("duplicate cg " + std::to_string(l.cg));
    if (segment_length % l.cg != 0) throw std::invalid_argument("M not divisible by " + std::to_string(l.cg));
    if (l.latent_len * l.cg != segment_length)
      throw std::invalid_argument("latent_len x cg != M for cg " + std::to_string(l.cg));
    if (l.is_identity != (l.cg == 1)) throw std::invalid_argument("is_identity inconsistent with cg");
    has_identity = has_identity || l.cg == 1;
  }
  if (!has_identity) throw std::invalid_argument("missing identity level");
}

std::vector<LevelSpec> make_level_set(std::span<const int> cgs, int segment_length) {
  std::vector<LevelSpec> out;
  for (int cg : cgs) {
    if (cg <= 0) throw std::invalid_argument("cg must be positive");
    out.push_back(LevelSpec{cg, segment_length % cg == 0 ? segment_length / cg : 0, cg == 1});
  }
  validate_level_set(out, segment_length);
  std::sort(out.begin(), out.end(), [](const LevelSpec& a, const LevelSpec& b) { return a.cg > b.cg; });
  return out;
}

}  // namespace tac
