#include "tac/costmodel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tac::cost {

std::string to_string(OperationalModel m) {
  switch (m) {
    case OperationalModel::no_compression:
      return "no-compression";
    case OperationalModel::lossless:
      return "lossless";
    case OperationalModel::dynamic_deep:
      return "dynamic-deep";
    case OperationalModel::dynamic_deep_uncompressed:
      return "dynamic-deep-with-uncompressed";
  }
  return "?";
}

OperationalModel model_from_string(const std::string& s) {
  for (auto m : kAllModels)
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown operational model " + s);
}

namespace {

struct Field {
  const char* name;
  double CostParams::*member;
};

constexpr Field kFields[] = {
    {"n_beds", &CostParams::n_beds},
    {"samples_per_second", &CostParams::samples_per_second},
    {"bytes_per_sample", &CostParams::bytes_per_sample},
    {"hours_per_year", &CostParams::hours_per_year},
    {"storage_price", &CostParams::storage_price},
    {"compute_price", &CostParams::compute_price},
    {"decompress_throughput", &CostParams::decompress_throughput},
    {"fetch_fraction", &CostParams::fetch_fraction},
    {"segment_samples", &CostParams::segment_samples},
    {"cg_lossless", &CostParams::cg_lossless},
    {"cg_dynamic_deep", &CostParams::cg_dynamic_deep},
    {"cg_dynamic_deep_uncompressed", &CostParams::cg_dynamic_deep_uncompressed},
};

}  // namespace

void CostParams::validate() const {
  for (const auto& f : kFields)
    if (!(this->*f.member >= 0.0) || !std::isfinite(this->*f.member))
      throw std::invalid_argument(std::string("cost parameter ") + f.name + " must be finite and nonnegative");
  if (fetch_fraction > 1.0) throw std::invalid_argument("fetch_fraction must lie in [0, 1]");
}

double CostParams::raw_bytes_per_year() const {
  return n_beds * samples_per_second * bytes_per_sample * hours_per_year * 3600.0;
}

double CostParams::segments_per_year() const {
  if (segment_samples <= 0.0) throw std::invalid_argument("segment_samples must be positive");
  return n_beds * samples_per_second * hours_per_year * 3600.0 / segment_samples;
}

double CostParams::cg(OperationalModel m) const {
  switch (m) {
    case OperationalModel::no_compression:
      return 1.0;
    case OperationalModel::lossless:
      return cg_lossless;
    case OperationalModel::dynamic_deep:
      return cg_dynamic_deep;
    case OperationalModel::dynamic_deep_uncompressed:
      return cg_dynamic_deep_uncompressed;
  }
  return 1.0;
}

CostBreakdown yearly_cost(const CostParams& p, OperationalModel m) {
  p.validate();
  const double gain = p.cg(m);
  if (gain <= 0.0) throw std::domain_error("compression gain of " + to_string(m) + " is zero");
  const double stored_gb = p.raw_bytes_per_year() / gain / 1e9;
  CostBreakdown c;
  c.storage_cost = p.storage_price * 12.0 * stored_gb / 2.0;

  double share = 0.0;
  switch (m) {
    case OperationalModel::no_compression:
      share = 0.0;
      break;
    case OperationalModel::lossless:
    case OperationalModel::dynamic_deep:
      share = p.fetch_fraction + 1.0;
      break;
    case OperationalModel::dynamic_deep_uncompressed:
      share = p.fetch_fraction;
      break;
  }
  if (share > 0.0) {
    if (p.decompress_throughput <= 0.0) throw std::domain_error("decompress_throughput is zero");
    c.compute_cost = share * p.segments_per_year() / p.decompress_throughput * p.compute_price;
  }
  c.total = c.storage_cost + c.compute_cost;
  return c;
}

void set_param(CostParams& p, const std::string& name, double value) {
  if (name == "avg_cg") {
    p.cg_dynamic_deep = p.cg_dynamic_deep_uncompressed = value;
    return;
  }
  for (const auto& f : kFields)
    if (name == f.name) {
      p.*f.member = value;
      return;
    }
  throw std::invalid_argument("unknown cost parameter " + name);
}

double get_param(const CostParams& p, const std::string& name) {
  if (name == "avg_cg") return p.cg_dynamic_deep;
  for (const auto& f : kFields)
    if (name == f.name) return p.*f.member;
  throw std::invalid_argument("unknown cost parameter " + name);
}

std::vector<std::string> param_names() {
  std::vector<std::string> out;
  for (const auto& f : kFields) out.emplace_back(f.name);
  out.emplace_back("avg_cg");
  return out;
}

std::vector<std::pair<double, CostBreakdown>> cost_sensitivity(const CostParams& p, OperationalModel m,
                                                               const std::string& name,
                                                               const std::vector<double>& values) {
  CostParams q = p;
  get_param(q, name);
  std::vector<std::pair<double, CostBreakdown>> out;
  for (double v : values) {
    set_param(q, name, v);
    out.emplace_back(v, yearly_cost(q, m));
  }
  return out;
}

nlohmann::json to_json(const CostParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : kFields) j[f.name] = p.*f.member;
  return j;
}

CostParams params_from_json(const nlohmann::json& j) {
  CostParams p;
  for (const auto& [k, v] : j.items()) set_param(p, k, v.get<double>());
  p.validate();
  return p;
}

CostParams read_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return params_from_json(nlohmann::json::parse(text));

  CostParams p;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      set_param(p, key, v);
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  p.validate();
  return p;
}

nlohmann::json costs_json(const CostParams& p) {
  const double base = yearly_cost(p, OperationalModel::no_compression).total;
  nlohmann::json models = nlohmann::json::array();
  for (auto m : kAllModels) {
    const auto c = yearly_cost(p, m);
    models.push_back({{"model", to_string(m)},
                      {"cg", p.cg(m)},
                      {"storage_cost", c.storage_cost},
                      {"compute_cost", c.compute_cost},
                      {"total", c.total},
                      {"saving_vs_raw", base > 0.0 ? 1.0 - c.total / base : 0.0}});
  }
  return nlohmann::json{{"params", to_json(p)}, {"models", models}};
}

void write_costs_csv(const std::string& path, const CostParams& p) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(10);
  f << "model,storage_cost,compute_cost,total,saving_vs_raw\n";
  const auto all = costs_json(p);
  for (const auto& m : all.at("models"))
    f << m.at("model").get<std::string>() << ',' << m.at("storage_cost").get<double>() << ','
      << m.at("compute_cost").get<double>() << ',' << m.at("total").get<double>() << ','
      << m.at("saving_vs_raw").get<double>() << '\n';
}

}  // namespace tac::cost
