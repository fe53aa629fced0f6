#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hashcond/core/errors.hpp"

namespace hashcond {

// Version stamp shared by every on-disk container this library writes.
constexpr int kArchiveSchemaVersion = 1;

using json = nlohmann::json;

// Explicit little-endian float32 encoding, independent of host endianness, so
// archives are bit-identical across platforms.
inline void append_f32_le(std::vector<uint8_t>& out, float v) {
  const uint32_t u = std::bit_cast<uint32_t>(v);
  out.push_back(uint8_t(u));
  out.push_back(uint8_t(u >> 8));
  out.push_back(uint8_t(u >> 16));
  out.push_back(uint8_t(u >> 24));
}

inline float read_f32_le(const uint8_t* p) {
  const uint32_t u = uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
                     uint32_t(p[3]) << 24;
  return std::bit_cast<float>(u);
}

inline void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& v) {
  std::vector<uint8_t> bytes;
  bytes.reserve(v.size() * 4);
  for (float x : v) append_f32_le(bytes, x);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), (std::streamsize)bytes.size());
  if (!f) throw IoError("short write: " + path.string());
}

inline std::vector<float> read_f32_blob(const std::filesystem::path& path,
                                        size_t expected_count) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path.string());
  const auto bytes = (size_t)f.tellg();
  if (bytes != expected_count * 4)
    throw CorruptionError("payload length " + std::to_string(bytes) + " does not match manifest (" +
                          std::to_string(expected_count * 4) + " bytes expected): " + path.string());
  f.seekg(0);
  std::vector<uint8_t> raw(bytes);
  f.read(reinterpret_cast<char*>(raw.data()), (std::streamsize)bytes);
  if (!f) throw IoError("short read: " + path.string());
  std::vector<float> out(expected_count);
  for (size_t i = 0; i < expected_count; ++i) out[i] = read_f32_le(raw.data() + i * 4);
  return out;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw IoError("short write: " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw CorruptionError("bad JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

// FNV-1a over the canonical dump (nlohmann objects keep keys sorted), used to
// stamp configs into provenance records.
inline uint64_t json_hash(const json& j) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace hashcond
