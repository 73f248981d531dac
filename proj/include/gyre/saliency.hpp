#pragma once
#include <array>
#include <string>
#include <vector>

#include "gyre/net.hpp"

namespace gyre {

enum class ChannelReduce { Max, Mean };

// Per-pixel attention map for the network's most likely action: the absolute
// gradient of that action's pre-softmax logit with respect to the input,
// reduced over the two input channels and normalized so the peak is 1.
// A network with an identically-zero gradient yields an all-zero map.
struct SaliencyMap {
    std::array<double, Frame::kPixels> values{};
    int action = 0;
    bool all_zero = false;
};

SaliencyMap saliency(const ParamSet& params, const Observation& obs, ForwardCache& cache,
                     ChannelReduce reduce = ChannelReduce::Max);

// Reduction + normalization alone, for callers that already have an input
// gradient (shape [1, 2, 42, 42] or [2, 42, 42]).
SaliencyMap saliency_from_input_grad(const Tensor& input_grad, int action,
                                     ChannelReduce reduce = ChannelReduce::Max);

struct SaliencyEpisodeResult {
    int64_t steps = 0;
    std::vector<std::string> files;  // 3 per step: frame, saliency, overlay
    double episode_reward = 0.0;
};

// Rolls a greedy episode and writes, per step, frame_NNNNNN.pgm,
// saliency_NNNNNN.pgm and overlay_NNNNNN.pgm (frame at half intensity plus
// the map in the remaining range) into out_dir. Step indices are zero-padded
// so names sort in step order.
SaliencyEpisodeResult episode_saliency(const ParamSet& params, const EnvSpec& spec,
                                       uint64_t seed, const std::string& out_dir,
                                       int64_t max_steps = 0 /* 0 = unlimited */,
                                       ChannelReduce reduce = ChannelReduce::Max);

}  // namespace gyre
