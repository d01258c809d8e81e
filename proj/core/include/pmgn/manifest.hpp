#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmgn {

// FNV-1a 64-bit, used to fingerprint configs in run manifests.
uint64_t fnv1a64(const std::string& text);

// Writes <dir>/manifest.json recording the command, seed, config hash and
// produced files. The timestamp field is the only non-reproducible content.
void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_json, uint64_t seed,
                    const std::vector<std::string>& outputs);

std::string version_string();

}  // namespace pmgn
