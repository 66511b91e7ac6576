#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace popgo {

inline constexpr const char* kVersion = "popgo-0.1.0";

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string data_hash;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    double wallclock_s = 0.0;
    std::vector<std::string> outputs;
};

void write_run_manifest(const std::string& path, const RunManifest& man);

}  // namespace popgo
