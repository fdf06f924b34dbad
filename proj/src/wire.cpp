#include "tac/wire.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tac::wire {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

template <typename T>
T get(const std::uint8_t* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u = static_cast<U>(u | (static_cast<U>(p[i]) << (8 * i)));
  return std::bit_cast<T>(u);
}

}  // namespace

void append(std::vector<std::uint8_t>& out, const CompressedRecord& r) {
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  put(out, r.segment_id);
  put(out, r.cg);
  put(out, static_cast<std::uint32_t>(r.latent.size()));
  put(out, r.predicted_error);
  for (float v : r.latent) put(out, v);
}

std::vector<std::uint8_t> serialize(const CompressedRecord& r) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 4 * r.latent.size());
  append(out, r);
  return out;
}

CompressedRecord deserialize(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < 4) throw Truncated("record shorter than the magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic("bad magic");
  if (bytes.size() < kHeaderSize) throw Truncated("truncated header");
  if (bytes[4] != kVersion)
    throw VersionMismatch("unsupported version " + std::to_string(bytes[4]) + " (expected 1)");
  const std::uint8_t* p = bytes.data();
  CompressedRecord r;
  r.segment_id = get<std::uint32_t>(p + 5);
  r.cg = get<std::uint16_t>(p + 9);
  const auto n = get<std::uint32_t>(p + 11);
  r.predicted_error = get<float>(p + 15);
  const std::size_t need = kHeaderSize + 4 * static_cast<std::size_t>(n);
  if (bytes.size() < need)
    throw Truncated("truncated payload: need " + std::to_string(need) + " bytes, have " + std::to_string(bytes.size()));
  r.latent.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) r.latent[i] = get<float>(p + kHeaderSize + 4 * i);
  if (consumed) *consumed = need;
  return r;
}

CompressedRecord deserialize(std::span<const std::uint8_t> bytes) {
  std::size_t used = 0;
  auto r = deserialize(bytes, &used);
  if (used != bytes.size()) throw WireError(std::to_string(bytes.size() - used) + " trailing bytes after record");
  return r;
}

std::vector<CompressedRecord> deserialize_stream(std::span<const std::uint8_t> bytes) {
  std::vector<CompressedRecord> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t used = 0;
    out.push_back(deserialize(bytes.subspan(pos), &used));
    pos += used;
  }
  return out;
}

void write_stream(const std::string& path, const std::vector<CompressedRecord>& records) {
  std::vector<std::uint8_t> buf;
  for (const auto& r : records) append(buf, r);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<CompressedRecord> read_stream(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_stream(buf);
}

}  // namespace tac::wire
