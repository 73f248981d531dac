#include "gyre/saliency.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gyre/env.hpp"
#include "gyre/render.hpp"

namespace gyre {

SaliencyMap saliency_from_input_grad(const Tensor& input_grad, int action,
                                     ChannelReduce reduce) {
    if (input_grad.count() != 2 * Frame::kPixels)
        throw ContractViolation("saliency: input gradient must cover 2x42x42");
    SaliencyMap map;
    map.action = action;
    const double* g0 = input_grad.ptr();
    const double* g1 = g0 + Frame::kPixels;
    double mx = 0.0;
    for (int i = 0; i < Frame::kPixels; ++i) {
        const double a = std::fabs(g0[i]);
        const double b = std::fabs(g1[i]);
        const double v = reduce == ChannelReduce::Max ? std::max(a, b) : 0.5 * (a + b);
        map.values[static_cast<size_t>(i)] = v;
        mx = std::max(mx, v);
    }
    if (mx == 0.0) {
        map.all_zero = true;
        return map;
    }
    for (double& v : map.values) v /= mx;
    return map;
}

SaliencyMap saliency(const ParamSet& params, const Observation& obs, ForwardCache& cache,
                     ChannelReduce reduce) {
    const int K = params.arch.actions;
    Tensor input = observation_to_tensor(obs);
    input.shape = {1, 2, Frame::kSide, Frame::kSide};
    ForwardOut out = forward(params, input, cache);

    int argmax = 0;
    for (int k = 1; k < K; ++k)
        if (out.logits[k] > out.logits[argmax]) argmax = k;

    Tensor glogits({1, K});
    glogits[argmax] = 1.0;  // gradient of the argmax logit, pre-softmax
    Tensor gvalue({1});
    Tensor input_grad;
    backward(params, cache, glogits, gvalue, nullptr, &input_grad);
    return saliency_from_input_grad(input_grad, argmax, reduce);
}

SaliencyEpisodeResult episode_saliency(const ParamSet& params, const EnvSpec& spec,
                                       uint64_t seed, const std::string& out_dir,
                                       int64_t max_steps, ChannelReduce reduce) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir))
        throw std::runtime_error("episode_saliency: cannot create output dir " + out_dir);

    SaliencyEpisodeResult result;
    ForwardCache cache;
    GameState state = reset(spec, seed);
    Frame f_prev = render_frame(state);
    Frame f_curr = f_prev;
    int64_t paid = 0;

    auto emit = [&](int64_t step_index, const Frame& frame, const SaliencyMap& map) {
        char name[64];
        std::array<double, Frame::kPixels> frame_vals;
        for (int i = 0; i < Frame::kPixels; ++i)
            frame_vals[static_cast<size_t>(i)] = frame.px[static_cast<size_t>(i)];

        std::snprintf(name, sizeof(name), "frame_%06lld.pgm", static_cast<long long>(step_index));
        std::string p1 = (fs::path(out_dir) / name).string();
        write_pgm(p1, frame_vals, Frame::kSide, Frame::kSide);

        std::snprintf(name, sizeof(name), "saliency_%06lld.pgm",
                      static_cast<long long>(step_index));
        std::string p2 = (fs::path(out_dir) / name).string();
        write_pgm(p2, map.values, Frame::kSide, Frame::kSide);

        std::array<double, Frame::kPixels> overlay;
        for (int i = 0; i < Frame::kPixels; ++i)
            overlay[static_cast<size_t>(i)] =
                0.5 * frame_vals[static_cast<size_t>(i)] + 0.5 * map.values[static_cast<size_t>(i)];
        std::snprintf(name, sizeof(name), "overlay_%06lld.pgm",
                      static_cast<long long>(step_index));
        std::string p3 = (fs::path(out_dir) / name).string();
        write_pgm(p3, overlay, Frame::kSide, Frame::kSide);

        result.files.push_back(p1);
        result.files.push_back(p2);
        result.files.push_back(p3);
    };

    while (state.alive) {
        if (max_steps > 0 && result.steps == max_steps) break;
        const Observation obs = stack(f_prev, f_curr);
        const SaliencyMap map = saliency(params, obs, cache, reduce);
        emit(result.steps, f_curr, map);

        const StepResult res = step(spec, state, static_cast<Action>(map.action));
        result.steps += 1;
        if (res.reward > 0.0) paid += 1;
        f_prev = f_curr;
        f_curr = render_frame(state);
        if (res.terminal) break;
    }
    result.episode_reward = static_cast<double>(paid) * kStepSeconds;
    return result;
}

}  // namespace gyre
