#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "errors.hpp"

namespace dacmdp {

inline uint64_t fnv1a64(const void* data, std::size_t len, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file: " + path);
  char buf[1 << 16];
  uint64_t h = 1469598103934665603ull;
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(buf, std::size_t(in.gcount()), h);
  }
  return hash_hex(h);
}

// Reproducibility record written beside every CLI output: the subcommand,
// the fully resolved configuration, input/output artifact hashes, timings.
struct RunManifest {
  std::string subcommand;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  double wall_time_ms = 0.0;

  void add_input(const std::string& path) { inputs[path] = file_hash_hex(path); }
  void add_output(const std::string& path) { outputs[path] = file_hash_hex(path); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_time_ms"] = wall_time_ms;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << to_json().dump(2) << '\n';
  }
};

} // namespace dacmdp
