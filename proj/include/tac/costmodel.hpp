#pragma once

// Parametric yearly cloud cost of storing and decompressing a fleet of
// bedside monitors under four operational models.
//
//   raw volume     = beds * rate * bytes/sample * seconds/year
//   storage cost   = price/GB-month * 12 * (volume / cg) / 2
//                    (data accumulates linearly, so on average half the
//                     year-end volume is retained)
//   compute cost   = decompressed segments / throughput * price/hour
//
// Decompressed share of the yearly segments per model:
//   no-compression 0, lossless x + 1, dynamic-deep x + 1,
//   dynamic-deep-with-uncompressed x (tasks ran on the raw copy at ingest)

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace tac::cost {

enum class OperationalModel { no_compression, lossless, dynamic_deep, dynamic_deep_uncompressed };

std::string to_string(OperationalModel m);
OperationalModel model_from_string(const std::string& s);
inline constexpr OperationalModel kAllModels[] = {OperationalModel::no_compression, OperationalModel::lossless,
                                                  OperationalModel::dynamic_deep,
                                                  OperationalModel::dynamic_deep_uncompressed};

struct CostParams {
  double n_beds = 200;
  double samples_per_second = 300;
  double bytes_per_sample = 2;
  double hours_per_year = 8760;
  double storage_price = 0.02;  // per GB-month, GB = 1e9 bytes
  double compute_price = 0.03;  // per instance-hour
  double decompress_throughput = 2e6;  // segments per instance-hour
  double fetch_fraction = 0.05;
  double segment_samples = 1024;
  double cg_lossless = 2.7;
  double cg_dynamic_deep = 48.31;
  double cg_dynamic_deep_uncompressed = 48.31;

  void validate() const;
  double raw_bytes_per_year() const;
  double segments_per_year() const;
  double cg(OperationalModel m) const;
};

struct CostBreakdown {
  double storage_cost = 0.0;
  double compute_cost = 0.0;
  double total = 0.0;
};

CostBreakdown yearly_cost(const CostParams& p, OperationalModel m);

/// Parameter names are the CostParams field names; "avg_cg" sets both
/// dynamic-deep gains.
void set_param(CostParams& p, const std::string& name, double value);
double get_param(const CostParams& p, const std::string& name);
std::vector<std::string> param_names();

std::vector<std::pair<double, CostBreakdown>> cost_sensitivity(const CostParams& p, OperationalModel m,
                                                               const std::string& name,
                                                               const std::vector<double>& values);

nlohmann::json to_json(const CostParams& p);
CostParams params_from_json(const nlohmann::json& j);
/// JSON object or `key = value` lines ('#' starts a comment).
CostParams read_params(const std::string& path);

/// One row per model: model, storage_cost, compute_cost, total, saving_vs_raw.
void write_costs_csv(const std::string& path, const CostParams& p);
nlohmann::json costs_json(const CostParams& p);

}  // namespace tac::cost
