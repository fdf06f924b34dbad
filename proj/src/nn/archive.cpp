#include <fstream>
#include <iterator>
#include <stdexcept>

#include "tac/nn.hpp"

namespace tac::nn {

void write_archive(const std::string& path, const nlohmann::json& doc) {
  const auto bytes = nlohmann::json::to_cbor(doc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

nlohmann::json read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return nlohmann::json::from_cbor(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed archive " + path + ": " + e.what());
  }
}

}  // namespace tac::nn
