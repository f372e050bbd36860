#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace dacmdp {

// One environment transition. State vectors are fixed-width feature vectors
// with a dimension shared across the whole dataset. `terminal` marks genuine
// environment termination; horizon truncation is recorded as non-terminal.
struct ExperienceTuple {
  std::vector<float> state;
  int action = 0;
  float reward = 0.0f;
  std::vector<float> next_state;
  bool terminal = false;

  bool operator==(const ExperienceTuple&) const = default;
};

struct ExperienceDataset {
  std::vector<ExperienceTuple> tuples;
  int action_count = 0;
  int state_dim = 0;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return tuples.size(); }

  void validate() const {
    if (tuples.empty()) throw DataError("dataset is empty");
    if (action_count < 1) throw DataError("dataset action_count must be >= 1");
    if (state_dim < 1) throw DataError("dataset state_dim must be >= 1");
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const auto& t = tuples[i];
      if (int(t.state.size()) != state_dim || int(t.next_state.size()) != state_dim)
        throw DataError("tuple " + std::to_string(i) + ": state dimension mismatch (expected " +
                        std::to_string(state_dim) + ")");
      if (t.action < 0 || t.action >= action_count)
        throw DataError("tuple " + std::to_string(i) + ": action out of range [0, " +
                        std::to_string(action_count) + ")");
      if (!std::isfinite(t.reward))
        throw DataError("tuple " + std::to_string(i) + ": non-finite reward");
      for (float v : t.state)
        if (!std::isfinite(v)) throw DataError("tuple " + std::to_string(i) + ": non-finite state value");
      for (float v : t.next_state)
        if (!std::isfinite(v)) throw DataError("tuple " + std::to_string(i) + ": non-finite next_state value");
    }
  }
};

enum class DatasetFormat { jsonl, binary };

inline DatasetFormat parse_dataset_format(const std::string& s) {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "binary") return DatasetFormat::binary;
  throw ConfigError("unknown dataset format '" + s + "' (expected jsonl or binary)");
}

// Optional ingestion transform; never applied implicitly.
inline ExperienceDataset clip_rewards(ExperienceDataset ds, float lo, float hi) {
  if (!(lo <= hi)) throw ConfigError("clip_rewards: lo must be <= hi");
  for (auto& t : ds.tuples) t.reward = std::clamp(t.reward, lo, hi);
  return ds;
}

namespace detail {

inline float json_to_finite_float(const nlohmann::ordered_json& j, const char* what, std::size_t line) {
  if (!j.is_number()) throw DataError("line " + std::to_string(line) + ": " + what + " is not a number");
  const float v = float(j.get<double>());
  if (!std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ": non-finite " + what);
  return v;
}

inline std::vector<float> json_to_state(const nlohmann::ordered_json& j, const char* what, std::size_t line) {
  if (!j.is_array()) throw DataError("line " + std::to_string(line) + ": " + what + " is not an array");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(json_to_finite_float(e, what, line));
  return out;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError(std::string("unexpected end of file while reading ") + what);
  return v;
}

} // namespace detail

inline ExperienceDataset load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  ExperienceDataset ds;
  bool have_header = false;
  int declared_actions = -1;
  int max_action = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": JSON parse failure: " + e.what());
    }
    if (!have_header && ds.tuples.empty() && !j.contains("s") &&
        (j.contains("action_count") || j.contains("state_dim"))) {
      if (!j.contains("action_count") || !j.contains("state_dim"))
        throw DataError("line " + std::to_string(line_no) + ": header needs both action_count and state_dim");
      declared_actions = j["action_count"].get<int>();
      ds.state_dim = j["state_dim"].get<int>();
      if (j.contains("metadata"))
        for (auto it = j["metadata"].begin(); it != j["metadata"].end(); ++it)
          ds.metadata[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
      have_header = true;
      continue;
    }
    for (const char* key : {"s", "a", "r", "s2"})
      if (!j.contains(key))
        throw DataError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
    ExperienceTuple t;
    t.state = detail::json_to_state(j["s"], "s", line_no);
    t.next_state = detail::json_to_state(j["s2"], "s2", line_no);
    if (!j["a"].is_number_integer())
      throw DataError("line " + std::to_string(line_no) + ": 'a' is not an integer");
    t.action = j["a"].get<int>();
    t.reward = detail::json_to_finite_float(j["r"], "r", line_no);
    t.terminal = j.contains("t") ? j["t"].get<bool>() : false;

    if (ds.tuples.empty() && ds.state_dim == 0) ds.state_dim = int(t.state.size());
    if (int(t.state.size()) != ds.state_dim || int(t.next_state.size()) != ds.state_dim)
      throw DataError("line " + std::to_string(line_no) + ": state dimension mismatch (expected " +
                      std::to_string(ds.state_dim) + ", got " + std::to_string(t.state.size()) + "/" +
                      std::to_string(t.next_state.size()) + ")");
    if (t.action < 0 || (declared_actions >= 0 && t.action >= declared_actions))
      throw DataError("line " + std::to_string(line_no) + ": action out of range");
    max_action = std::max(max_action, t.action);
    ds.tuples.push_back(std::move(t));
  }
  ds.action_count = declared_actions >= 0 ? declared_actions : max_action + 1;
  ds.validate();
  return ds;
}

inline void save_dataset_jsonl(const ExperienceDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  nlohmann::ordered_json header;
  header["action_count"] = ds.action_count;
  header["state_dim"] = ds.state_dim;
  if (!ds.metadata.empty()) {
    nlohmann::ordered_json meta;
    for (const auto& [k, v] : ds.metadata) meta[k] = v;
    header["metadata"] = meta;
  }
  out << header.dump() << '\n';
  for (const auto& t : ds.tuples) {
    nlohmann::ordered_json j;
    j["s"] = t.state;
    j["a"] = t.action;
    j["r"] = t.reward;
    j["s2"] = t.next_state;
    j["t"] = t.terminal;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failure: " + path);
}

// Binary layout: magic "DACD", u32 version=1, u32 action_count, u32 state_dim,
// u64 record count, then per record f32[d] state, u32 action, f32 reward,
// f32[d] next_state, u8 terminal. Little-endian. No metadata slot.
inline void save_dataset_binary(const ExperienceDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write("DACD", 4);
  detail::write_pod(out, uint32_t(1));
  detail::write_pod(out, uint32_t(ds.action_count));
  detail::write_pod(out, uint32_t(ds.state_dim));
  detail::write_pod(out, uint64_t(ds.tuples.size()));
  for (const auto& t : ds.tuples) {
    out.write(reinterpret_cast<const char*>(t.state.data()), std::streamsize(t.state.size() * 4));
    detail::write_pod(out, uint32_t(t.action));
    detail::write_pod(out, t.reward);
    out.write(reinterpret_cast<const char*>(t.next_state.data()), std::streamsize(t.next_state.size() * 4));
    detail::write_pod(out, uint8_t(t.terminal ? 1 : 0));
  }
  if (!out) throw DataError("write failure: " + path);
}

inline ExperienceDataset load_dataset_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DACD", 4) != 0)
    throw DataError("bad magic in " + path + " (expected DACD)");
  const auto version = detail::read_pod<uint32_t>(in, "version");
  if (version != 1) throw DataError("unsupported DACD version " + std::to_string(version));
  ExperienceDataset ds;
  ds.action_count = int(detail::read_pod<uint32_t>(in, "action_count"));
  ds.state_dim = int(detail::read_pod<uint32_t>(in, "state_dim"));
  const auto count = detail::read_pod<uint64_t>(in, "record count");
  ds.tuples.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    auto& t = ds.tuples[i];
    t.state.resize(ds.state_dim);
    in.read(reinterpret_cast<char*>(t.state.data()), std::streamsize(ds.state_dim * 4));
    t.action = int(detail::read_pod<uint32_t>(in, "action"));
    t.reward = detail::read_pod<float>(in, "reward");
    t.next_state.resize(ds.state_dim);
    in.read(reinterpret_cast<char*>(t.next_state.data()), std::streamsize(ds.state_dim * 4));
    t.terminal = detail::read_pod<uint8_t>(in, "terminal") != 0;
    if (!in) throw DataError("unexpected end of file at record " + std::to_string(i));
  }
  ds.validate();
  return ds;
}

inline ExperienceDataset load_dataset(const std::string& path, DatasetFormat format) {
  return format == DatasetFormat::jsonl ? load_dataset_jsonl(path) : load_dataset_binary(path);
}

inline void save_dataset(const ExperienceDataset& ds, const std::string& path, DatasetFormat format) {
  ds.validate();
  if (format == DatasetFormat::jsonl)
    save_dataset_jsonl(ds, path);
  else
    save_dataset_binary(ds, path);
}

} // namespace dacmdp
