#pragma once

// Minimal reverse-mode differentiation over 1-D feature maps.
//
// A Graph is a tape built per sample: every op appends a node holding its
// forward value and a closure that propagates the node's gradient to its
// inputs. Parameters live in flat ParameterStores; a store bound to a graph
// with a gradient buffer receives gradients for its trainable groups, any
// other store acts as a constant.

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tac::nn {

/// Channels-major feature map: data[c * length + t].
struct Tensor {
  int channels = 0;
  int length = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int l, double fill = 0.0) : channels(c), length(l), data(static_cast<std::size_t>(c) * l, fill) {}

  static Tensor from_samples(std::span<const float> s);
  static Tensor from_values(std::span<const double> v);

  double* row(int c) { return data.data() + static_cast<std::size_t>(c) * length; }
  const double* row(int c) const { return data.data() + static_cast<std::size_t>(c) * length; }
  std::size_t size() const { return data.size(); }
  double scalar() const { return data.at(0); }
};

struct ParamInfo {
  std::string name;
  std::string group;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class ParameterStore {
 public:
  /// Shapes: [out, in, kernel] for conv weights, [out, in] for dense
  /// weights, [out] for biases.
  int add(std::string name, std::string group, std::vector<int> shape);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values(int id);
  std::span<const double> values(int id) const;

  const ParamInfo& info(int id) const { return infos_.at(static_cast<std::size_t>(id)); }
  const std::vector<ParamInfo>& infos() const { return infos_; }
  int find(std::string_view name) const;

  std::vector<std::string> groups() const;
  std::size_t group_size(std::string_view group) const;
  /// Element ranges [begin, end) covered by the given groups.
  std::vector<std::pair<std::size_t, std::size_t>> ranges(const std::set<std::string>& groups) const;

  /// FNV-1a over the raw bytes of all values, or of one group's values.
  std::uint64_t checksum() const;
  std::uint64_t checksum(std::string_view group) const;

  /// Glorot-uniform weights, zero biases.
  void init_glorot(std::uint64_t seed);

  nlohmann::json to_json() const;
  /// Names, groups and shapes must match exactly.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<ParamInfo> infos_;
  std::vector<double> values_;
};

struct Param {
  const ParameterStore* store = nullptr;
  int id = -1;
};

struct Var {
  int id = -1;
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, const std::vector<double>& out_grad)>;

  /// `trainable` empty means every group of the store is trainable.
  void bind(const ParameterStore& store, std::span<double> grads, std::set<std::string> trainable = {});

  Var input(Tensor value, bool requires_grad = false);
  Var emit(Tensor value, bool requires_grad, Backward back);

  const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }
  /// Gradient of the last backward() w.r.t. v; empty if it never received one.
  const std::vector<double>& grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).grad; }
  /// Zero-initialised on first access.
  std::vector<double>& grad_mut(Var v);

  /// Pointer into the bound gradient buffer, or nullptr if p is constant.
  double* param_grad(Param p);
  bool param_trainable(Param p) const;
  std::span<const double> param_values(Param p) const { return p.store->values(p.id); }

  void backward(Var root, double seed = 1.0);
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward back;
  };
  struct Binding {
    const ParameterStore* store;
    std::span<double> grads;
    std::set<std::string> trainable;
  };
  const Binding* binding_for(Param p) const;

  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
};

// ---- layers -------------------------------------------------------------

/// Same-padded 1-D convolution, odd kernel, stride 1 or 2; output length is
/// input length / stride. Weight shape [out, in, kernel], bias [out].
Var conv1d(Graph& g, Var x, Param weight, Param bias, int stride);
/// y = W x + b over the flattened input. Weight [out, in], bias [out].
Var dense(Graph& g, Var x, Param weight, Param bias);
Var relu(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
/// Nearest-neighbour upsampling by 2 along time.
Var upsample2(Graph& g, Var x);
Var add(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double s);
/// Mean over time per channel, shape (C, 1).
Var global_avg_pool(Graph& g, Var x);
/// Sum of scalar nodes.
Var sum(Graph& g, std::span<const Var> terms);

// ---- losses (scalar outputs) ---------------------------------------------

/// -log(max(softmax(logits)[label], eps)); the gradient is zero where the
/// clamp is active. eps <= 0 gives the unclamped log-softmax form.
Var cross_entropy(Graph& g, Var logits, int label, double eps = 1e-7);
Var mean_squared_error(Graph& g, Var pred, const Tensor& target);
/// (100 / M) * sum |x - x_hat| / max(|x|, eps).
Var relative_error_percent(Graph& g, Var x_hat, const Tensor& x, double eps = 1e-3);

std::vector<double> softmax(std::span<const double> logits);

// ---- optimizer -----------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  /// lr_t = lr / (1 + decay * iterations)
  double decay = 1e-5;
};

class Adam {
 public:
  Adam(std::size_t n, AdamConfig cfg);
  void step(std::span<double> values, std::span<const double> grads,
            const std::vector<std::pair<std::size_t, std::size_t>>& ranges);
  std::int64_t iterations() const { return iterations_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::int64_t iterations_ = 0;
};

// ---- archives ------------------------------------------------------------

/// Self-describing binary archive (CBOR encoding of a JSON document).
void write_archive(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_archive(const std::string& path);

}  // namespace tac::nn
