#include "tac/eval.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace tac::eval {

double violation_rate(std::span<const double> losses, double bound) {
  if (losses.empty()) throw std::invalid_argument("violation_rate: empty input");
  if (!(bound >= 0.0)) throw std::invalid_argument("violation_rate: bound must be nonnegative");
  const auto over = std::count_if(losses.begin(), losses.end(), [bound](double l) { return l > bound; });
  return static_cast<double>(over) / static_cast<double>(losses.size());
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

ClassificationMetrics classification_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("classification_metrics: length mismatch");
  std::array<std::array<int, kNumClasses>, kNumClasses> cm{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i], p = predictions[i];
    if (l < 0 || l >= kNumClasses || p < 0 || p >= kNumClasses)
      throw std::invalid_argument("classification_metrics: class out of range");
    ++cm[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)];
  }
  ClassificationMetrics m;
  int correct = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    int predicted = 0, actual = 0;
    for (std::size_t o = 0; o < kNumClasses; ++o) {
      predicted += cm[o][c];
      actual += cm[c][o];
    }
    const double tp = cm[c][c];
    correct += cm[c][c];
    m.support[c] = actual;
    m.precision[c] = ratio(tp, predicted);
    m.recall[c] = ratio(tp, actual);
    m.f1[c] = ratio(2.0 * m.precision[c] * m.recall[c], m.precision[c] + m.recall[c]);
    m.macro_precision += m.precision[c] / kNumClasses;
    m.macro_recall += m.recall[c] / kNumClasses;
    m.macro_f1 += m.f1[c] / kNumClasses;
  }
  m.accuracy = ratio(correct, static_cast<double>(labels.size()));
  return m;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  if (values.size() < 4) throw std::invalid_argument("quartiles need at least 4 values");
  return Quartiles{quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

std::map<int, Quartiles> cce_quartiles(const std::map<int, std::vector<double>>& per_level) {
  std::map<int, Quartiles> out;
  for (const auto& [cg, v] : per_level) out[cg] = quartiles(v);
  return out;
}

std::vector<unsigned char> encode_samples_u16(std::span<const float> samples) {
  std::vector<unsigned char> out;
  out.reserve(samples.size() * 2);
  for (float s : samples) {
    const double c = std::clamp(static_cast<double>(s), 0.0, 1.0);
    const auto v = static_cast<std::uint16_t>(std::lround(c * 65535.0));
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
  }
  return out;
}

double lossless_cg(std::span<const float> samples) {
  if (samples.empty()) throw std::invalid_argument("lossless_cg: empty segment");
  const auto raw = encode_samples_u16(samples);
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<Bytef> buf(len);
  if (compress2(buf.data(), &len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("zlib compression failed");
  return static_cast<double>(raw.size()) / static_cast<double>(len);
}

LosslessSummary lossless_baseline_cg(std::span<const Segment> segments) {
  LosslessSummary s;
  s.n = segments.size();
  if (segments.empty()) return s;
  std::vector<double> cgs;
  cgs.reserve(segments.size());
  for (const auto& seg : segments) cgs.push_back(lossless_cg(seg.samples));
  s.mean = std::accumulate(cgs.begin(), cgs.end(), 0.0) / static_cast<double>(cgs.size());
  if (cgs.size() > 1) {
    double ss = 0.0;
    for (double c : cgs) ss += (c - s.mean) * (c - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(cgs.size() - 1));
  }
  return s;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 points");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

nlohmann::json to_json(const EvalReport& r) {
  const auto& c = r.classification;
  nlohmann::json per_class = nlohmann::json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    const auto i = static_cast<std::size_t>(k);
    per_class[to_string(static_cast<ClassId>(k))] = {
        {"precision", c.precision[i]}, {"recall", c.recall[i]}, {"f1", c.f1[i]}, {"support", c.support[i]}};
  }
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [cg, v] : r.cce_quartiles)
    q["cg" + std::to_string(cg)] = {{"q1", v.q1}, {"median", v.median}, {"q3", v.q3}};
  return nlohmann::json{{"policy", r.policy},
                        {"bound", r.bound},
                        {"n_segments", r.n_segments},
                        {"avg_cg", r.avg_cg},
                        {"effective_loss", r.effective_loss},
                        {"violation_rate", r.violation_rate},
                        {"n_fallback", r.n_fallback},
                        {"accuracy", c.accuracy},
                        {"macro_precision", c.macro_precision},
                        {"macro_recall", c.macro_recall},
                        {"macro_f1", c.macro_f1},
                        {"per_class", per_class},
                        {"peak_f1", r.peak_f1},
                        {"cce_quartiles", q}};
}

void write_report_json(const std::string& path, const EvalReport& r) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << to_json(r).dump(2) << '\n';
}

void write_sweep_csv(const std::string& path, std::span<const EvalReport> rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(10);
  f << "bound,policy,avg_cg,effective_loss,violation_rate,n_fallback\n";
  for (const auto& r : rows)
    f << r.bound << ',' << r.policy << ',' << r.avg_cg << ',' << r.effective_loss << ',' << r.violation_rate << ','
      << r.n_fallback << '\n';
}

}  // namespace tac::eval
