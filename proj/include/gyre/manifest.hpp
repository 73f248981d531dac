#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace gyre {

inline constexpr const char* kToolkitVersion = "gyre 0.1.0";

// Everything needed to reproduce a run bit-exactly on the same build:
// the command line, the effective config, the seeds, and content hashes of
// every file the run produced. Deliberately contains no timestamps.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::ordered_json config;
    std::vector<uint64_t> seeds;
    int64_t env_steps = 0;
    int64_t updates = 0;
    std::vector<std::pair<std::string, std::string>> checkpoint_hashes;  // name -> hex

    struct OutputFile {
        std::string path;  // relative to the output directory
        uint64_t bytes = 0;
        std::string fnv64;
    };
    std::vector<OutputFile> outputs;

    nlohmann::ordered_json to_json() const;

    // Hashes `relative_path` under out_dir and appends it to outputs.
    void record_output(const std::string& out_dir, const std::string& relative_path);

    void write(const std::string& out_dir, const std::string& filename = "manifest.json") const;
};

}  // namespace gyre
