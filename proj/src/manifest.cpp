#include "popgo/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace popgo {

void write_run_manifest(const std::string& path, const RunManifest& man) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "command=" << man.command << '\n'
        << "config_hash=" << man.config_hash << '\n'
        << "data_hash=" << man.data_hash << '\n'
        << "seed=" << man.seed << '\n'
        << "version=" << man.version << '\n';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", man.wallclock_s);
    out << "wallclock_s=" << buf << '\n';
    out << "outputs=";
    for (std::size_t p = 0; p < man.outputs.size(); ++p) {
        if (p) out << ',';
        out << man.outputs[p];
    }
    out << '\n';
}

}  // namespace popgo
