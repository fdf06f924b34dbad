#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "tac/nn.hpp"

namespace tac::nn {

Tensor Tensor::from_samples(std::span<const float> s) {
  Tensor t(1, static_cast<int>(s.size()));
  std::copy(s.begin(), s.end(), t.data.begin());
  return t;
}

Tensor Tensor::from_values(std::span<const double> v) {
  Tensor t(1, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), t.data.begin());
  return t;
}

int ParameterStore::add(std::string name, std::string group, std::vector<int> shape) {
  if (find(name) >= 0) throw std::invalid_argument("duplicate parameter name " + name);
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("parameter " + name + ": non-positive dimension");
    n *= static_cast<std::size_t>(d);
  }
  infos_.push_back(ParamInfo{std::move(name), std::move(group), std::move(shape), values_.size(), n});
  values_.resize(values_.size() + n, 0.0);
  return static_cast<int>(infos_.size() - 1);
}

std::span<double> ParameterStore::values(int id) {
  const auto& i = info(id);
  return std::span<double>(values_).subspan(i.offset, i.size);
}

std::span<const double> ParameterStore::values(int id) const {
  const auto& i = info(id);
  return std::span<const double>(values_).subspan(i.offset, i.size);
}

int ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < infos_.size(); ++i)
    if (infos_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> ParameterStore::groups() const {
  std::vector<std::string> out;
  for (const auto& i : infos_)
    if (std::find(out.begin(), out.end(), i.group) == out.end()) out.push_back(i.group);
  return out;
}

std::size_t ParameterStore::group_size(std::string_view group) const {
  std::size_t n = 0;
  for (const auto& i : infos_)
    if (i.group == group) n += i.size;
  return n;
}

std::vector<std::pair<std::size_t, std::size_t>> ParameterStore::ranges(const std::set<std::string>& groups) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& i : infos_) {
    if (!groups.contains(i.group)) continue;
    if (!out.empty() && out.back().second == i.offset)
      out.back().second = i.offset + i.size;
    else
      out.emplace_back(i.offset, i.offset + i.size);
  }
  return out;
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::uint64_t h, std::span<const double> v) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t i = 0; i < v.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace

std::uint64_t ParameterStore::checksum() const { return fnv1a(kFnvOffset, values_); }

std::uint64_t ParameterStore::checksum(std::string_view group) const {
  std::uint64_t h = kFnvOffset;
  for (std::size_t id = 0; id < infos_.size(); ++id)
    if (infos_[id].group == group) h = fnv1a(h, values(static_cast<int>(id)));
  return h;
}

void ParameterStore::init_glorot(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t id = 0; id < infos_.size(); ++id) {
    const auto& i = infos_[id];
    auto v = values(static_cast<int>(id));
    if (i.shape.size() < 2) {
      std::fill(v.begin(), v.end(), 0.0);
      continue;
    }
    const int receptive = i.shape.size() == 3 ? i.shape[2] : 1;
    const double fan_in = static_cast<double>(i.shape[1]) * receptive;
    const double fan_out = static_cast<double>(i.shape[0]) * receptive;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& x : v) x = dist(rng);
  }
}

nlohmann::json ParameterStore::to_json() const {
  auto arr = nlohmann::json::array();
  for (std::size_t id = 0; id < infos_.size(); ++id) {
    const auto& i = infos_[id];
    auto v = values(static_cast<int>(id));
    arr.push_back({{"name", i.name}, {"group", i.group}, {"shape", i.shape}, {"data", std::vector<double>(v.begin(), v.end())}});
  }
  return arr;
}

void ParameterStore::load_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != infos_.size())
    throw std::runtime_error("checkpoint tensor count mismatch: expected " + std::to_string(infos_.size()));
  for (std::size_t id = 0; id < infos_.size(); ++id) {
    const auto& i = infos_[id];
    const auto& t = j[id];
    if (t.at("name").get<std::string>() != i.name || t.at("group").get<std::string>() != i.group ||
        t.at("shape").get<std::vector<int>>() != i.shape)
      throw std::runtime_error("checkpoint tensor mismatch at " + i.name);
    const auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != i.size) throw std::runtime_error("checkpoint tensor size mismatch at " + i.name);
    std::copy(data.begin(), data.end(), values(static_cast<int>(id)).begin());
  }
}

}  // namespace tac::nn
