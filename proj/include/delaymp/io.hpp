#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace delaymp {

/// %.17g, so that values round-trip and reruns give identical bytes.
std::string format_double(double v);

/// Writes columns of equal length under a header; IoError on failure.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);
void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const nlohmann::json& doc);

std::string sha256_hex(const std::string& bytes);

/// Record of one command: inputs, outputs and timing.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  unsigned long long seed = 0;
  std::size_t threads = 1;
  std::string started, finished;  ///< UTC, ISO 8601
  std::vector<std::string> outputs;
  nlohmann::json to_json() const;
};

std::string utc_now();
/// Creates the directory (and parents) if missing.
void ensure_dir(const std::string& dir);

}  // namespace delaymp
