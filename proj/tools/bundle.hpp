#pragma once

// Run directory bookkeeping for the command-line tool: artifact writing,
// SHA-256 digests and the manifest.

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace c14::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha256: cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

class RunBundle {
 public:
  // `exact` names the directory directly; otherwise a fresh
  // <UTC timestamp>-<config hash> directory is created under `base`.
  RunBundle(std::string command, json config, const std::vector<std::string>& inputs, const fs::path& base,
            const std::string& exact = {})
      : command_(std::move(command)), config_(std::move(config)), start_(std::chrono::steady_clock::now()) {
    for (const auto& p : inputs) inputs_.push_back({p, file_digest(p)});
    json keyed = {{"command", command_}, {"config", config_}};
    for (const auto& [p, d] : inputs_) keyed["inputs"].push_back(d);
    config_hash_ = sha256_hex(keyed.dump());
    if (!exact.empty()) {
      dir_ = exact;
    } else {
      const std::time_t now = std::time(nullptr);
      std::tm tm{};
      gmtime_r(&now, &tm);
      char stamp[32];
      std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
      dir_ = base / (std::string(stamp) + "-" + config_hash_.substr(0, 12));
    }
    fs::create_directories(dir_);
  }

  const fs::path& dir() const noexcept { return dir_; }
  const std::string& config_hash() const noexcept { return config_hash_; }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    {
      std::ofstream out(p, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + p.string());
      out << content;
      if (!out) throw std::runtime_error("write failed: " + p.string());
    }
    artifacts_.push_back({name, sha256_hex(content), content.size()});
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  // Re-reads every artifact and input and compares digests; writes the
  // manifest. Returns false if anything changed or is missing.
  bool finish(const json& extra = json::object()) {
    bool ok = true;
    json arts = json::array();
    for (const auto& a : artifacts_) {
      const fs::path p = dir_ / a.name;
      const bool present = fs::exists(p) && fs::file_size(p) == a.bytes && a.bytes > 0;
      const bool same = present && file_digest(p) == a.digest;
      ok = ok && same;
      arts.push_back({{"path", a.name}, {"sha256", a.digest}, {"bytes", a.bytes}, {"validated", same}});
    }
    json ins = json::array();
    for (const auto& [p, d] : inputs_) {
      const bool same = fs::exists(p) && file_digest(p) == d;
      ok = ok && same;
      ins.push_back({{"path", p}, {"sha256", d}, {"unchanged", same}});
    }
    json m;
    m["schema_version"] = schema_version;
    m["command"] = command_;
    m["config"] = config_;
    m["config_hash"] = config_hash_;
    m["seed"] = config_.contains("seed") ? config_["seed"] : json(nullptr);
    m["inputs"] = ins;
    m["artifacts"] = arts;
    m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m["validated"] = ok;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    std::ofstream out(dir_ / "manifest.json");
    out << m.dump(2) << "\n";
    return ok && static_cast<bool>(out);
  }

 private:
  struct Artifact {
    std::string name, digest;
    std::uintmax_t bytes;
  };
  std::string command_;
  json config_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<Artifact> artifacts_;
  std::string config_hash_;
  fs::path dir_;
};

}  // namespace c14::cli
