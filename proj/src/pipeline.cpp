#include "tac/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "tac/policy.hpp"
#include "tac/wire.hpp"

namespace tac::pipeline {

EdgeOutput run_edge(std::span<const Segment> segments, const codec::Codec& codec, double bound) {
  EdgeOutput out;
  for (const auto& s : segments) {
    try {
      const auto encodings = codec.encode_all(s);
      std::map<int, double> predicted;
      for (const auto& e : encodings) predicted[e.level.cg] = e.predicted_error;
      const auto pick = policy::select_dynamic(codec.levels(), predicted, bound, s.id);
      const auto& chosen = *std::find_if(encodings.begin(), encodings.end(),
                                         [&](const codec::LevelEncoding& e) { return e.level == pick.chosen; });
      CompressedRecord r;
      r.segment_id = static_cast<std::uint32_t>(s.id);
      r.cg = static_cast<std::uint16_t>(chosen.level.cg);
      r.latent = chosen.latent;
      r.predicted_error = static_cast<float>(chosen.predicted_error);
      wire::append(out.bytes, r);
      out.log.push_back({r.segment_id, chosen.level.cg, r.predicted_error, pick.fallback_used});
      out.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("edge: segment " + std::to_string(s.id) + ": " + e.what());
    }
  }
  return out;
}

void write_edge_log(const std::string& path, std::span<const EdgeLogRow> rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(9);
  f << "segment_id,cg,predicted_error,fallback\n";
  for (const auto& r : rows) f << r.segment_id << ',' << r.cg << ',' << r.predicted_error << ',' << r.fallback << '\n';
}

void to_json(nlohmann::json& j, const RunManifest& m) {
  j = nlohmann::json{{"bound", m.bound},
                     {"seed", m.seed},
                     {"level_cgs", m.level_cgs},
                     {"codec_checkpoint", m.codec_checkpoint},
                     {"tasks_checkpoint", m.tasks_checkpoint},
                     {"data", m.data},
                     {"w0", m.w0},
                     {"weights", m.weights}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
  m.bound = j.at("bound").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.level_cgs = j.at("level_cgs").get<std::vector<int>>();
  m.codec_checkpoint = j.value("codec_checkpoint", "");
  m.tasks_checkpoint = j.value("tasks_checkpoint", "");
  m.data = j.value("data", "");
  m.w0 = j.value("w0", 0.1);
  m.weights = j.at("weights").get<std::map<std::string, double>>();
}

CloudResult run_cloud(std::span<const CompressedRecord> records, const codec::Codec& codec,
                      const tasks::TaskSet& ts, const std::map<std::uint32_t, tasks::GroundTruth>& truth,
                      const RunManifest& manifest) {
  if (records.empty()) throw std::invalid_argument("cloud: no records");
  std::vector<int> manifest_levels = manifest.level_cgs;
  std::vector<int> codec_levels;
  for (const auto& l : codec.levels()) codec_levels.push_back(l.cg);
  std::sort(manifest_levels.rbegin(), manifest_levels.rend());
  if (!manifest_levels.empty() && manifest_levels != codec_levels)
    throw std::invalid_argument("cloud: run manifest level set does not match the codec checkpoint");

  CloudResult res;
  for (const auto& r : records) {
    const auto it = truth.find(r.segment_id);
    if (it == truth.end()) throw std::out_of_range("cloud: unknown segment id " + std::to_string(r.segment_id));
    if (!codec.has_level(r.cg))
      throw std::invalid_argument("cloud: segment " + std::to_string(r.segment_id) + " uses cg " +
                                  std::to_string(r.cg) + ", which the codec checkpoint does not configure");
    const auto x_hat = codec.decode(r);
    CloudRow row;
    row.segment_id = r.segment_id;
    row.cg = r.cg;
    row.predicted_error = r.predicted_error;
    for (const auto* t : {&ts.classifier, &ts.peaks}) row.task_losses[t->id()] = tasks::task_loss(*t, x_hat, it->second);
    row.measured_error = tasks::measured_task_error(ts, x_hat, it->second, manifest.weights);
    row.label = it->second.label.value_or(0);
    const auto p = ts.classifier.classify(x_hat);
    row.predicted_class = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    row.peak_f1 = tasks::peak_f1(tasks::extract_peaks(ts.peaks.envelope(x_hat), tasks::kPeakThreshold),
                                 it->second.peaks, tasks::kPeakTolerance)
                      .f1;
    res.rows.push_back(std::move(row));
  }
  std::stable_sort(res.rows.begin(), res.rows.end(),
                   [](const CloudRow& a, const CloudRow& b) { return a.segment_id < b.segment_id; });

  auto& rep = res.report;
  rep.policy = "dynamic";
  rep.bound = manifest.bound;
  rep.n_segments = res.rows.size();
  std::vector<int> cgs, preds, labels;
  std::vector<double> losses;
  std::map<int, std::vector<double>> cce;
  for (const auto& row : res.rows) {
    cgs.push_back(row.cg);
    losses.push_back(row.measured_error);
    preds.push_back(row.predicted_class);
    labels.push_back(row.label);
    rep.peak_f1 += row.peak_f1;
    cce[row.cg].push_back(row.task_losses.at("hr_classify"));
  }
  rep.avg_cg = average_cg(cgs);
  rep.effective_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  rep.violation_rate = eval::violation_rate(losses, manifest.bound);
  // The dynamic policy only reaches identity through the fallback.
  rep.n_fallback = static_cast<std::size_t>(std::count(cgs.begin(), cgs.end(), 1));
  rep.classification = eval::classification_metrics(preds, labels);
  rep.peak_f1 /= static_cast<double>(res.rows.size());
  for (const auto& [cg, v] : cce)
    if (v.size() >= 4) rep.cce_quartiles[cg] = eval::quartiles(v);
  return res;
}

void write_cloud_csv(const std::string& path, std::span<const CloudRow> rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(10);
  f << "segment_id,cg,predicted_error,measured_error,hr_classify,rr_peaks,label,predicted_class,peak_f1\n";
  for (const auto& r : rows)
    f << r.segment_id << ',' << r.cg << ',' << r.predicted_error << ',' << r.measured_error << ','
      << r.task_losses.at("hr_classify") << ',' << r.task_losses.at("rr_peaks") << ',' << r.label << ','
      << r.predicted_class << ',' << r.peak_f1 << '\n';
}

}  // namespace tac::pipeline
