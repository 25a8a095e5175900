#include "delaymp/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "delaymp/errors.hpp"

namespace delaymp {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) fail(ErrorCode::IoError, "CSV header and column count differ");
  const std::size_t rows = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns)
    if (c.size() != rows) fail(ErrorCode::IoError, "CSV columns differ in length");
  std::ofstream out = open_out(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << format_double(columns[j][i]);
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path + "'");
}

void write_json(const std::string& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::IoError, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},   {"config_path", config_path}, {"config_sha256", config_hash},
          {"seed", seed},         {"threads", threads},         {"started", started},
          {"finished", finished}, {"outputs", outputs},         {"versions", {{"delaymp", "1.0.0"}}}};
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create directory '" + dir + "': " + ec.message());
}

}  // namespace delaymp
