#pragma once
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gyre/net.hpp"

namespace gyre {

// Training provenance stored alongside the weights.
struct CheckpointMeta {
    std::string env_id;
    int64_t env_steps = 0;
    int64_t updates = 0;
    double best_episode_reward = 0.0;
    uint64_t seed = 0;
    std::string initial_weights_id;  // hash of the weights training started from
    bool budget_truncated = false;
};

// Binary layout (all integers little-endian):
//   bytes 0..7   magic "GYRECKP1"
//   u32 version (currently 1)
//   u32 flags: bit0 = adam state present, bit1 = tensor data stored as f32
//   u32 tensor count
//   u64 data section byte length
//   u32 metadata length, then metadata JSON (env id, counters, arch, adam step)
//   tensor table: { u16 name length; name; u8 ndim; i32 dims[ndim]; u64 offset }
//     offsets are element offsets into the data section
//   data section: tensor values in table order (f64, or f32 when flagged)
std::vector<uint8_t> save_checkpoint(const ParamSet& params, const AdamState* adam,
                                     const CheckpointMeta& meta, bool store_f32 = false);

struct LoadedCheckpoint {
    ParamSet params;
    std::optional<AdamState> adam;
    CheckpointMeta meta;
};

// Throws CheckpointError with a distinct kind for bad magic, version
// mismatch, truncation, and shape mismatch. Never partially populates.
LoadedCheckpoint load_checkpoint(std::span<const uint8_t> bytes);

// Convenience: load and require a specific architecture (ShapeMismatch otherwise).
LoadedCheckpoint load_checkpoint_expect(std::span<const uint8_t> bytes, const NetArch& expected);

uint64_t checkpoint_hash(std::span<const uint8_t> bytes);

void write_file(const std::string& path, std::span<const uint8_t> bytes);
std::vector<uint8_t> read_file(const std::string& path);

}  // namespace gyre
