#include "tac/policy.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace tac::policy {

SelectionResult select_by_error(std::span<const LevelSpec> levels, const std::map<int, double>& errors, double bound,
                                std::int64_t segment_id) {
  if (!(bound >= 0.0)) throw std::invalid_argument("bound must be nonnegative");
  std::vector<LevelSpec> sorted(levels.begin(), levels.end());
  std::sort(sorted.begin(), sorted.end(), [](const LevelSpec& a, const LevelSpec& b) { return a.cg > b.cg; });
  SelectionResult r;
  r.segment_id = segment_id;
  std::optional<LevelSpec> identity;
  for (const auto& l : sorted) {
    if (l.is_identity) {
      identity = l;
      continue;
    }
    const auto it = errors.find(l.cg);
    if (it == errors.end()) throw std::invalid_argument("no error given for level cg " + std::to_string(l.cg));
    r.errors[l.cg] = it->second;
  }
  if (!identity) throw std::invalid_argument("level set has no identity level");
  if (const auto it = errors.find(1); it != errors.end()) r.errors[1] = it->second;
  for (const auto& l : sorted) {
    if (l.is_identity) continue;
    if (r.errors[l.cg] <= bound) {
      r.chosen = l;
      return r;
    }
  }
  r.chosen = *identity;
  r.fallback_used = true;
  return r;
}

SelectionResult select_dynamic(std::span<const LevelSpec> levels, const std::map<int, double>& predicted,
                               double bound, std::int64_t segment_id) {
  return select_by_error(levels, predicted, bound, segment_id);
}

SelectionResult select_dynamic(const codec::Codec& codec, const Segment& segment, double bound) {
  std::map<int, double> predicted;
  for (const auto& e : codec.encode_all(segment)) predicted[e.level.cg] = e.predicted_error;
  return select_by_error(codec.levels(), predicted, bound, segment.id);
}

SelectionResult select_oracle(std::span<const LevelSpec> levels, const std::map<int, double>& measured, double bound,
                              std::int64_t segment_id) {
  return select_by_error(levels, measured, bound, segment_id);
}

namespace {

std::vector<float> reconstruct(const codec::Codec& codec, const Segment& s, const LevelSpec& l) {
  CompressedRecord r;
  r.segment_id = static_cast<std::uint32_t>(s.id);
  r.cg = static_cast<std::uint16_t>(l.cg);
  r.latent = codec.encode(s, l);
  return codec.decode(r);
}

}  // namespace

SelectionResult select_oracle(const Segment& segment, std::span<const LevelSpec> levels, double bound,
                              const tasks::TaskSet& tasks, const codec::Codec& codec,
                              const tasks::GroundTruth& truth, const std::map<std::string, double>& weights) {
  if (codec.completed_phase() < 1 || !tasks.all_frozen())
    throw std::logic_error("oracle selection needs trained models");
  std::map<int, double> measured;
  for (const auto& l : levels)
    measured[l.cg] = tasks::measured_task_error(tasks, reconstruct(codec, segment, l), truth, weights);
  return select_by_error(levels, measured, bound, segment.id);
}

const LevelOutcome& SegmentOutcomes::at(int cg) const {
  for (const auto& l : levels)
    if (l.level.cg == cg) return l;
  throw std::out_of_range("segment " + std::to_string(segment_id) + " has no outcome for cg " + std::to_string(cg));
}

LossTable build_loss_table(const codec::Codec& codec, const tasks::TaskSet& ts, std::span<const Segment> segments,
                           const std::map<std::string, double>& weights) {
  LossTable table;
  table.reserve(segments.size());
  for (const auto& s : segments) {
    const auto truth = tasks::resolve_ground_truth(s, ts);
    SegmentOutcomes so;
    so.segment_id = s.id;
    so.label = *truth.label;
    for (const auto& enc : codec.encode_all(s)) {
      CompressedRecord r;
      r.segment_id = static_cast<std::uint32_t>(s.id);
      r.cg = static_cast<std::uint16_t>(enc.level.cg);
      r.latent = enc.latent;
      const auto x_hat = codec.decode(r);
      LevelOutcome o;
      o.level = enc.level;
      o.predicted_error = enc.predicted_error;
      for (const auto* t : {&ts.classifier, &ts.peaks}) o.task_losses[t->id()] = tasks::task_loss(*t, x_hat, truth);
      o.measured_error = tasks::measured_task_error(ts, x_hat, truth, weights);
      const auto p = ts.classifier.classify(x_hat);
      o.predicted_class = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      const auto env = ts.peaks.envelope(x_hat);
      o.peak_f1 = tasks::peak_f1(tasks::extract_peaks(env, tasks::kPeakThreshold), truth.peaks, tasks::kPeakTolerance).f1;
      so.levels.push_back(std::move(o));
    }
    table.push_back(std::move(so));
  }
  return table;
}

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::dynamic:
      return "dynamic";
    case PolicyKind::oracle3:
      return "oracle3";
    case PolicyKind::oracle2:
      return "oracle2";
  }
  return "?";
}

PolicyKind policy_from_string(const std::string& s) {
  if (s == "dynamic") return PolicyKind::dynamic;
  if (s == "oracle3") return PolicyKind::oracle3;
  if (s == "oracle2") return PolicyKind::oracle2;
  throw std::invalid_argument("unknown policy " + s + " (expected dynamic, oracle3 or oracle2)");
}

std::vector<LevelSpec> policy_levels(PolicyKind kind, std::span<const LevelSpec> codec_levels) {
  std::vector<LevelSpec> all(codec_levels.begin(), codec_levels.end());
  std::sort(all.begin(), all.end(), [](const LevelSpec& a, const LevelSpec& b) { return a.cg > b.cg; });
  if (kind != PolicyKind::oracle2) return all;
  std::vector<LevelSpec> two{all.front()};
  if (!all.front().is_identity) two.push_back(all.back());
  return two;
}

std::vector<SelectionResult> select_all(const LossTable& table, PolicyKind kind, double bound) {
  std::vector<SelectionResult> out;
  out.reserve(table.size());
  for (const auto& so : table) {
    std::vector<LevelSpec> levels;
    for (const auto& l : so.levels) levels.push_back(l.level);
    const auto allowed = policy_levels(kind, levels);
    std::map<int, double> errors;
    for (const auto& l : allowed)
      errors[l.cg] = kind == PolicyKind::dynamic ? so.at(l.cg).predicted_error : so.at(l.cg).measured_error;
    out.push_back(select_by_error(allowed, errors, bound, so.segment_id));
  }
  return out;
}

eval::EvalReport evaluate(const LossTable& table, PolicyKind kind, double bound) {
  if (table.empty()) throw std::invalid_argument("cannot evaluate an empty dataset");
  const auto picks = select_all(table, kind, bound);
  eval::EvalReport r;
  r.policy = to_string(kind);
  r.bound = bound;
  r.n_segments = table.size();
  std::vector<int> cgs, preds, labels;
  std::vector<double> losses;
  double peak = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& o = table[i].at(picks[i].chosen.cg);
    cgs.push_back(o.level.cg);
    losses.push_back(o.measured_error);
    preds.push_back(o.predicted_class);
    labels.push_back(table[i].label);
    peak += o.peak_f1;
    if (picks[i].fallback_used) ++r.n_fallback;
  }
  r.avg_cg = average_cg(cgs);
  r.effective_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  r.violation_rate = eval::violation_rate(losses, bound);
  r.classification = eval::classification_metrics(preds, labels);
  r.peak_f1 = peak / static_cast<double>(table.size());
  if (table.size() >= 4) {
    std::map<int, std::vector<double>> cce;
    for (const auto& so : table)
      for (const auto& l : so.levels) {
        const auto it = l.task_losses.find("hr_classify");
        if (it != l.task_losses.end()) cce[l.level.cg].push_back(it->second);
      }
    r.cce_quartiles = eval::cce_quartiles(cce);
  }
  return r;
}

std::vector<eval::EvalReport> sweep(std::span<const double> bounds, const LossTable& table, PolicyKind kind) {
  if (table.empty()) throw std::invalid_argument("sweep over an empty dataset");
  if (!std::is_sorted(bounds.begin(), bounds.end())) throw std::invalid_argument("sweep bounds must be ascending");
  std::vector<eval::EvalReport> out;
  for (double b : bounds) out.push_back(evaluate(table, kind, b));
  return out;
}

}  // namespace tac::policy
