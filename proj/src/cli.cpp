#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "tac/codec.hpp"
#include "tac/costmodel.hpp"
#include "tac/data.hpp"
#include "tac/eval.hpp"
#include "tac/pipeline.hpp"
#include "tac/policy.hpp"
#include "tac/training.hpp"
#include "tac/wire.hpp"

namespace fs = std::filesystem;

namespace tac::pipeline {

namespace {

struct Options {
  std::string data;
  std::string checkpoint = "checkpoints";
  std::string out = "out";
  std::string config;
  std::string levels;
  std::string weights;
  std::string input;
  std::string bounds = "0.1,0.3,0.5,0.75,1.0";
  std::string policy = "dynamic";
  double bound = 0.75;
  double w0 = -1.0;
  double avg_cg = -1.0;
  std::uint64_t seed = 7;
  int count = 400;
  int phase = 0;
};

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::map<std::string, double> parse_weights(const std::string& s) {
  std::map<std::string, double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("weights must look like task=value,...");
    tasks::task_from_id(item.substr(0, eq));
    out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return out;
}

// Everything a subcommand needs, resolved from flags and the optional
// config file.
class Context {
 public:
  explicit Context(const Options& o) : opt_(o) {
    if (!o.config.empty()) {
      std::ifstream f(o.config);
      if (!f) throw std::runtime_error("cannot open config " + o.config);
      config_ = nlohmann::json::parse(f);
    }
    if (config_.contains("codec")) codec_cfg_ = config_["codec"].get<codec::CodecConfig>();
    if (config_.contains("train")) train_cfg_ = config_["train"].get<training::TrainConfig>();
    train_cfg_.seed = o.seed;
    if (!o.levels.empty()) {
      codec_cfg_.level_cgs.clear();
      for (double v : parse_doubles(o.levels)) codec_cfg_.level_cgs.push_back(static_cast<int>(v));
    }
    if (o.w0 >= 0.0) train_cfg_.weights.reconstruction_weight = o.w0;
    if (!o.weights.empty()) train_cfg_.weights.task_weights = parse_weights(o.weights);
    train_cfg_.weights.upper_bound = o.bound;
    train_cfg_.validate();
    codec_cfg_.validate();
    fs::create_directories(o.out);
  }

  const Options& opt() const { return opt_; }
  const codec::CodecConfig& codec_config() const { return codec_cfg_; }
  const training::TrainConfig& train_config() const { return train_cfg_; }
  std::string out(const std::string& name) const { return (fs::path(opt_.out) / name).string(); }
  std::string ckpt(const std::string& name) const { return (fs::path(opt_.checkpoint) / name).string(); }
  std::string codec_ckpt(int phase) const { return ckpt("codec.phase" + std::to_string(phase) + ".ckpt"); }

  data::DatasetManifest manifest() const {
    data::DatasetManifest m;
    if (opt_.data.empty()) {
      m.seed = opt_.seed;
      m.synthetic_count = opt_.count;
      if (config_.contains("generator")) m.generator = config_["generator"].get<data::GeneratorParams>();
      m.segment_length = codec_cfg_.segment_length;
      m.sample_rate = m.generator.sample_rate;
    } else if (fs::path(opt_.data).extension() == ".json") {
      m = data::read_manifest(opt_.data);
    } else {
      m.files = {fs::path(opt_.data).filename().string()};
      m.base_dir = fs::path(opt_.data).parent_path().string();
      m.segment_length = codec_cfg_.segment_length;
      m.seed = opt_.seed;
    }
    m.max_cg = std::max(m.max_cg, *std::max_element(codec_cfg_.level_cgs.begin(), codec_cfg_.level_cgs.end()));
    return m;
  }

  const data::DatasetSplit& split() {
    if (!split_) split_ = data::load_dataset(manifest());
    return *split_;
  }

  std::string data_label() const { return opt_.data.empty() ? "synthetic:" + std::to_string(opt_.count) : opt_.data; }

  tasks::TaskSet tasks(bool train_if_missing) {
    const auto path = ckpt("tasks.ckpt");
    if (fs::exists(path)) return tasks::TaskSet::load(path);
    if (!train_if_missing) throw std::runtime_error("missing task checkpoint " + path + " (run train-tasks)");
    std::cerr << "training task models\n";
    auto ts = tasks::TaskSet::make_default(codec_cfg_.segment_length);
    training::pretrain_tasks(ts, split().train, train_cfg_, &metrics_);
    save_tasks(ts);
    return ts;
  }

  void save_tasks(const tasks::TaskSet& ts) {
    fs::create_directories(opt_.checkpoint);
    ts.save(ckpt("tasks.ckpt"));
  }

  /// Loads the checkpoint of `phase`, training the missing phases in order.
  codec::Codec codec(int phase, bool train_if_missing) {
    for (int p = phase; p >= 1; --p) {
      if (!fs::exists(codec_ckpt(p))) continue;
      auto c = codec::Codec::load(codec_ckpt(p), codec_cfg_);
      if (p == phase) return c;
      if (!train_if_missing) break;
      return advance(std::move(c), phase);
    }
    if (!train_if_missing)
      throw std::runtime_error("missing codec checkpoint " + codec_ckpt(phase) + " (run train --phase " +
                               std::to_string(phase) + ")");
    return advance(codec::Codec(codec_cfg_), phase);
  }

  codec::Codec advance(codec::Codec c, int phase) {
    while (c.completed_phase() < phase) train_phase(c, c.completed_phase() + 1);
    return c;
  }

  void train_phase(codec::Codec& c, int phase) {
    std::cerr << "training codec phase " << phase << "\n";
    if (phase == 1) {
      training::train_phase1(c, split().train, train_cfg_, &metrics_);
    } else {
      const auto ts = tasks(true);
      if (phase == 2)
        training::train_phase2(c, ts, split().train, train_cfg_, &metrics_);
      else
        training::train_phase3(c, ts, split().train, train_cfg_, &metrics_);
    }
    fs::create_directories(opt_.checkpoint);
    c.save(codec_ckpt(phase));
  }

  void flush_metrics() {
    if (!metrics_.rows().empty()) metrics_.write_csv(out("metrics.csv"));
  }

  RunManifest run_manifest(double bound) const {
    RunManifest m;
    m.bound = bound;
    m.seed = opt_.seed;
    m.level_cgs = codec_cfg_.level_cgs;
    std::sort(m.level_cgs.rbegin(), m.level_cgs.rend());
    m.codec_checkpoint = codec_ckpt(3);
    m.tasks_checkpoint = ckpt("tasks.ckpt");
    m.data = data_label();
    m.w0 = train_cfg_.weights.reconstruction_weight;
    m.weights = train_cfg_.weights.task_weights;
    return m;
  }

 private:
  Options opt_;
  nlohmann::json config_ = nlohmann::json::object();
  codec::CodecConfig codec_cfg_;
  training::TrainConfig train_cfg_;
  std::optional<data::DatasetSplit> split_;
  training::MetricsLog metrics_;
};

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << '\n';
}

std::map<std::uint32_t, tasks::GroundTruth> truth_map(std::span<const Segment> segs, const tasks::TaskSet& ts) {
  std::map<std::uint32_t, tasks::GroundTruth> out;
  for (const auto& s : segs) out[static_cast<std::uint32_t>(s.id)] = tasks::resolve_ground_truth(s, ts);
  return out;
}

int cmd_gen_data(Context& ctx) {
  auto m = ctx.manifest();
  if (m.synthetic_count == 0) throw std::invalid_argument("gen-data writes synthetic data; drop --data");
  data::write_manifest(ctx.out("manifest.json"), m);
  const auto segs = data::load_segments(m);
  std::ofstream f(ctx.out("segments.csv"));
  f.precision(9);
  f << "segment_id,label,n_peaks,samples\n";
  for (const auto& s : segs) {
    f << s.id << ',' << to_string(*s.label) << ',' << s.peak_positions->size() << ',';
    for (std::size_t i = 0; i < s.samples.size(); ++i) f << (i ? " " : "") << s.samples[i];
    f << '\n';
  }
  std::cout << "wrote " << segs.size() << " segments to " << ctx.out("manifest.json") << "\n";
  return 0;
}

int cmd_train_tasks(Context& ctx) {
  auto ts = tasks::TaskSet::make_default(ctx.codec_config().segment_length);
  training::MetricsLog log;
  training::pretrain_tasks(ts, ctx.split().train, ctx.train_config(), &log);
  ctx.save_tasks(ts);
  log.write_csv(ctx.out("metrics_tasks.csv"));
  int ok = 0;
  for (const auto& s : ctx.split().validation) {
    const auto p = ts.classifier.classify(s.samples);
    ok += static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == static_cast<int>(*s.label);
  }
  std::cout << "validation accuracy " << (ctx.split().validation.empty() ? 0.0 : double(ok) / ctx.split().validation.size())
            << "\n";
  return 0;
}

int cmd_train(Context& ctx) {
  const int phase = ctx.opt().phase;
  if (phase < 1 || phase > 3) throw std::invalid_argument("--phase must be 1, 2 or 3");
  codec::Codec c = phase == 1 ? codec::Codec(ctx.codec_config()) : ctx.codec(phase - 1, false);
  if (phase > 1 && c.completed_phase() < phase - 1)
    throw std::logic_error("phase " + std::to_string(phase) + " requires a phase-" + std::to_string(phase - 1) +
                           " checkpoint");
  if (phase > 1) ctx.tasks(false);
  ctx.train_phase(c, phase);
  ctx.flush_metrics();
  std::cout << "wrote " << ctx.codec_ckpt(phase) << "\n";
  return 0;
}

int cmd_compress(Context& ctx) {
  const auto c = ctx.codec(3, true);
  const auto& segs = ctx.split().test;
  const auto edge = run_edge(segs, c, ctx.opt().bound);
  wire::write_stream(ctx.out("records.bin"), edge.records);
  write_edge_log(ctx.out("edge_log.csv"), edge.log);
  write_json(ctx.out("run_manifest.json"), ctx.run_manifest(ctx.opt().bound));
  ctx.flush_metrics();
  std::vector<int> cgs;
  for (const auto& r : edge.log) cgs.push_back(r.cg);
  std::cout << "compressed " << segs.size() << " segments, average cg " << average_cg(cgs) << ", "
            << edge.bytes.size() << " bytes\n";
  return 0;
}

int cmd_decompress(Context& ctx) {
  const std::string input = ctx.opt().input.empty() ? ctx.out("records.bin") : ctx.opt().input;
  const auto c = ctx.codec(3, false);
  const auto records = wire::read_stream(input);
  std::ofstream f(ctx.out("reconstructions.csv"));
  if (!f) throw std::runtime_error("cannot write reconstructions");
  f.precision(9);
  f << "segment_id,cg,samples\n";
  for (const auto& r : records) {
    const auto x = c.decode(r);
    f << r.segment_id << ',' << r.cg << ',';
    for (std::size_t i = 0; i < x.size(); ++i) f << (i ? " " : "") << x[i];
    f << '\n';
  }
  std::cout << "decompressed " << records.size() << " records of length " << c.config().segment_length << "\n";
  return 0;
}

int cmd_run(Context& ctx) {
  const auto c = ctx.codec(3, true);
  const auto ts = ctx.tasks(true);
  const auto& segs = ctx.split().test;
  const auto manifest = ctx.run_manifest(ctx.opt().bound);
  const auto edge = run_edge(segs, c, manifest.bound);
  const auto received = wire::deserialize_stream(edge.bytes);
  const auto cloud = run_cloud(received, c, ts, truth_map(segs, ts), manifest);
  write_edge_log(ctx.out("edge_log.csv"), edge.log);
  write_cloud_csv(ctx.out("cloud.csv"), cloud.rows);
  eval::write_report_json(ctx.out("report.json"), cloud.report);
  write_json(ctx.out("run_manifest.json"), manifest);
  ctx.flush_metrics();
  const auto& r = cloud.report;
  std::cout << "segments " << r.n_segments << " avg_cg " << r.avg_cg << " effective_loss " << r.effective_loss
            << " violation_rate " << r.violation_rate << " macro_f1 " << r.classification.macro_f1 << "\n";
  return 0;
}

int cmd_sweep(Context& ctx) {
  const auto bounds = parse_doubles(ctx.opt().bounds);
  const auto c = ctx.codec(3, true);
  const auto ts = ctx.tasks(true);
  const auto table = policy::build_loss_table(c, ts, ctx.split().test, ctx.train_config().weights.task_weights);
  std::vector<policy::PolicyKind> kinds;
  if (ctx.opt().policy == "all")
    kinds = {policy::PolicyKind::dynamic, policy::PolicyKind::oracle3, policy::PolicyKind::oracle2};
  else
    kinds = {policy::policy_from_string(ctx.opt().policy)};
  std::vector<eval::EvalReport> rows;
  for (auto k : kinds) {
    auto part = policy::sweep(bounds, table, k);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  eval::write_sweep_csv(ctx.out("sweep.csv"), rows);
  ctx.flush_metrics();
  for (const auto& r : rows)
    std::cout << r.policy << " bound " << r.bound << " avg_cg " << r.avg_cg << " effective_loss " << r.effective_loss
              << " violation_rate " << r.violation_rate << "\n";
  return 0;
}

int cmd_cost(Context& ctx) {
  cost::CostParams p = ctx.opt().config.empty() ? cost::CostParams{} : cost::read_params(ctx.opt().config);
  if (ctx.opt().avg_cg >= 0.0) cost::set_param(p, "avg_cg", ctx.opt().avg_cg);
  cost::write_costs_csv(ctx.out("cost.csv"), p);
  const auto j = cost::costs_json(p);
  write_json(ctx.out("cost.json"), j);
  for (const auto& m : j.at("models"))
    std::cout << m.at("model").get<std::string>() << " total " << m.at("total").get<double>() << " saving "
              << m.at("saving_vs_raw").get<double>() << "\n";
  return 0;
}

int cmd_report(Context& ctx) {
  const auto c = ctx.codec(3, true);
  const auto ts = ctx.tasks(true);
  const auto& test = ctx.split().test;
  const auto weights = ctx.train_config().weights.task_weights;
  const auto table = policy::build_loss_table(c, ts, test, weights);

  nlohmann::json levels = nlohmann::json::array();
  std::ofstream f(ctx.out("levels.csv"));
  f.precision(10);
  f << "cg,cce_q1,cce_median,cce_q3,mean_measured,mean_predicted,mean_l_r,pearson_lr_lw\n";
  for (const auto& l : c.levels()) {
    std::vector<double> cce, measured, predicted, lr;
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& o = table[i].at(l.cg);
      cce.push_back(o.task_losses.at("hr_classify"));
      measured.push_back(o.measured_error);
      predicted.push_back(o.predicted_error);
      CompressedRecord r;
      r.cg = static_cast<std::uint16_t>(l.cg);
      r.latent = c.encode(test[i], l);
      lr.push_back(training::reconstruction_loss(test[i].samples, c.decode(r)));
      pairs.emplace_back(lr.back(), measured.back());
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const auto q = eval::quartiles(cce);
    double r = std::numeric_limits<double>::quiet_NaN();
    try {
      r = training::correlation_report(pairs);
    } catch (const std::domain_error&) {
    }
    f << l.cg << ',' << q.q1 << ',' << q.median << ',' << q.q3 << ',' << mean(measured) << ',' << mean(predicted)
      << ',' << mean(lr) << ',' << r << '\n';
    levels.push_back({{"cg", l.cg},
                      {"cce_q1", q.q1},
                      {"cce_median", q.median},
                      {"cce_q3", q.q3},
                      {"mean_measured", mean(measured)},
                      {"mean_predicted", mean(predicted)},
                      {"mean_l_r", mean(lr)},
                      {"pearson_lr_lw", std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r)}});
  }
  const auto lossless = eval::lossless_baseline_cg(test);
  write_json(ctx.out("summary.json"),
             {{"levels", levels},
              {"lossless_cg_mean", lossless.mean},
              {"lossless_cg_std", lossless.std},
              {"n_segments", test.size()},
              {"dynamic", eval::to_json(policy::evaluate(table, policy::PolicyKind::dynamic, ctx.opt().bound))}});
  ctx.flush_metrics();
  std::cout << "lossless cg " << lossless.mean << " (std " << lossless.std << ") over " << test.size()
            << " segments; see " << ctx.out("summary.json") << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Task-aware variable-rate compression of 1-D biosignals"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* c) {
    c->add_option("--data", o.data, "Dataset manifest (.json) or CSV file; synthetic data when omitted");
    c->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->capture_default_str();
    c->add_option("--out", o.out, "Output directory")->capture_default_str();
    c->add_option("--config", o.config, "JSON config with codec/train/generator sections (cost: cost parameters)");
    c->add_option("--levels", o.levels, "Compression gains, e.g. 64,32,1");
    c->add_option("--w0", o.w0, "Reconstruction weight");
    c->add_option("--weights", o.weights, "Task weights, e.g. hr_classify=1,rr_peaks=1");
    c->add_option("--seed", o.seed, "Seed")->capture_default_str();
    c->add_option("--count", o.count, "Synthetic segment count")->capture_default_str();
    c->add_option("--bound", o.bound, "Upper bound on the weighted task error")->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset manifest and its segments");
  auto* tt = app.add_subcommand("train-tasks", "Pre-train and freeze the downstream task models");
  auto* tr = app.add_subcommand("train", "Run one codec training phase");
  tr->add_option("--phase", o.phase, "1, 2 or 3")->required();
  auto* comp = app.add_subcommand("compress", "Edge: select levels and write wire records");
  auto* dec = app.add_subcommand("decompress", "Decode wire records");
  dec->add_option("--input", o.input, "Record stream (default <out>/records.bin)");
  auto* run = app.add_subcommand("run", "End-to-end edge and cloud simulation");
  auto* sw = app.add_subcommand("sweep", "Policy sweep over bounds");
  sw->add_option("--bounds", o.bounds, "Ascending bounds")->capture_default_str();
  sw->add_option("--policy", o.policy, "dynamic, oracle3, oracle2 or all")->capture_default_str();
  auto* cst = app.add_subcommand("cost", "Yearly cloud cost per operational model");
  cst->add_option("--avg-cg", o.avg_cg, "Average gain of the two dynamic operational models");
  auto* rep = app.add_subcommand("report", "Per-level loss quartiles, correlation and lossless baseline");
  for (auto* c : {gen, tt, tr, comp, dec, run, sw, cst, rep}) common(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    Context ctx(o);
    if (*gen) return cmd_gen_data(ctx);
    if (*tt) return cmd_train_tasks(ctx);
    if (*tr) return cmd_train(ctx);
    if (*comp) return cmd_compress(ctx);
    if (*dec) return cmd_decompress(ctx);
    if (*run) return cmd_run(ctx);
    if (*sw) return cmd_sweep(ctx);
    if (*cst) return cmd_cost(ctx);
    if (*rep) return cmd_report(ctx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace tac::pipeline
