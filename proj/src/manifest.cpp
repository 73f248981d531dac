#include "gyre/manifest.hpp"

#include <filesystem>
#include <fstream>

#include "gyre/checkpoint.hpp"
#include "gyre/hash.hpp"

namespace gyre {

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["toolkit"] = kToolkitVersion;
    j["command"] = command;
    j["argv"] = argv;
    j["seeds"] = seeds;
    j["config"] = config;
    j["counters"] = {{"env_steps", env_steps}, {"updates", updates}};
    nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
    for (const auto& [name, hex] : checkpoint_hashes) hashes[name] = hex;
    j["checkpoint_hashes"] = hashes;
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (const OutputFile& f : outputs)
        outs.push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv64", f.fnv64}});
    j["outputs"] = outs;
    return j;
}

void RunManifest::record_output(const std::string& out_dir, const std::string& relative_path) {
    const std::string full = (std::filesystem::path(out_dir) / relative_path).string();
    const std::vector<uint8_t> bytes = read_file(full);
    OutputFile f;
    f.path = relative_path;
    f.bytes = bytes.size();
    f.fnv64 = hex64(fnv1a64(bytes.data(), bytes.size()));
    outputs.push_back(std::move(f));
}

void RunManifest::write(const std::string& out_dir, const std::string& filename) const {
    std::ofstream out(std::filesystem::path(out_dir) / filename);
    if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
    out << to_json().dump(2) << "\n";
}

}  // namespace gyre
