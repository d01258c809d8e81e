#include "pmgn/manifest.hpp"

#include <ctime>
#include <fstream>

#include <json.hpp>

#include "pmgn/error.hpp"

namespace pmgn {

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string version_string() { return "patchmgn 0.1.0"; }

void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_json, uint64_t seed,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["version"] = version_string();
  j["command"] = command;
  j["seed"] = seed;
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  j["timestamp"] = buf;
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_json)));
  j["config_hash"] = hash;
  j["outputs"] = outputs;
  const std::string path = dir + "/manifest.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pmgn
