#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "gyre/checkpoint.hpp"
#include "gyre/saliency.hpp"
#include "helpers.hpp"

using namespace gyre;
using namespace gyre::test;

namespace fs = std::filesystem;

TEST_CASE("zero network yields a flagged all-zero map") {
    const NetArch a = tiny_arch();
    const ParamSet p = ParamSet::make(a);
    Rng rng(1);
    ForwardCache cache;
    const SaliencyMap m = saliency(p, random_observation(rng), cache);
    CHECK(m.all_zero);
    for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("linear surrogate: map equals the normalized weight row") {
    // input gradient of a known linear model w.r.t. the argmax action is just
    // that action's weight row; the reduction/normalization path must
    // reproduce it exactly
    Rng rng(7);
    Tensor grad({2, Frame::kSide, Frame::kSide});
    for (auto& v : grad.data) v = rng.uniform(-2.0, 2.0);

    const SaliencyMap m = saliency_from_input_grad(grad, 1, ChannelReduce::Max);
    CHECK(m.action == 1);
    CHECK_FALSE(m.all_zero);

    double mx = 0.0;
    for (int i = 0; i < Frame::kPixels; ++i)
        mx = std::max(mx, std::max(std::fabs(grad[i]), std::fabs(grad[Frame::kPixels + i])));
    for (int i = 0; i < Frame::kPixels; ++i) {
        const double expect =
            std::max(std::fabs(grad[i]), std::fabs(grad[Frame::kPixels + i])) / mx;
        REQUIRE(m.values[static_cast<size_t>(i)] == expect);
    }
    const double peak = *std::max_element(m.values.begin(), m.values.end());
    CHECK(peak == 1.0);

    // mean reduction variant
    const SaliencyMap mm = saliency_from_input_grad(grad, 0, ChannelReduce::Mean);
    double mx2 = 0.0;
    for (int i = 0; i < Frame::kPixels; ++i)
        mx2 = std::max(mx2,
                       0.5 * (std::fabs(grad[i]) + std::fabs(grad[Frame::kPixels + i])));
    for (int i = 0; i < Frame::kPixels; ++i) {
        const double expect =
            0.5 * (std::fabs(grad[i]) + std::fabs(grad[Frame::kPixels + i])) / mx2;
        REQUIRE(mm.values[static_cast<size_t>(i)] == expect);
    }
}

TEST_CASE("saliency input gradient matches finite differences") {
    const NetArch a = tiny_arch();
    const ParamSet params = fd_params(a, 21);  // smooth point for the oracle
    Rng rng(22);
    ForwardCache cache;

    Tensor input = ramp_input(a);
    const ForwardOut out = forward(params, input, cache);
    REQUIRE(min_pool_gap(cache, a) > 1e-3);
    int argmax = 0;
    for (int k = 1; k < a.actions; ++k)
        if (out.logits[k] > out.logits[argmax]) argmax = k;
    Tensor glogits({1, a.actions});
    glogits[argmax] = 1.0;
    Tensor gvalue({1});
    Tensor input_grad;
    backward(params, cache, glogits, gvalue, nullptr, &input_grad);

    const double h = 1e-4;
    for (int c = 0; c < 100; ++c) {
        const auto i = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(input.count())));
        const double saved = input[i];
        input[i] = saved + h;
        const double up = forward(params, input, cache).logits[argmax];
        input[i] = saved - h;
        const double down = forward(params, input, cache).logits[argmax];
        input[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        REQUIRE(rel_err(fd, input_grad[i]) < 1e-4);
    }

}

TEST_CASE("saliency map equals the reduced, normalized argmax-logit gradient") {
    const NetArch a = tiny_arch();
    const ParamSet params = init_params(a, 23);
    Rng rng(24);
    const Observation obs = dense_observation(rng);
    ForwardCache cache;

    Tensor input = observation_to_tensor(obs);
    input.shape = {1, 2, Frame::kSide, Frame::kSide};
    const ForwardOut out = forward(params, input, cache);
    int argmax = 0;
    for (int k = 1; k < a.actions; ++k)
        if (out.logits[k] > out.logits[argmax]) argmax = k;
    Tensor glogits({1, a.actions});
    glogits[argmax] = 1.0;
    Tensor gvalue({1});
    Tensor input_grad;
    backward(params, cache, glogits, gvalue, nullptr, &input_grad);

    const SaliencyMap m = saliency(params, obs, cache);
    REQUIRE(m.action == argmax);
    double mx = 0.0;
    for (int i = 0; i < Frame::kPixels; ++i)
        mx = std::max(mx, std::max(std::fabs(input_grad[i]),
                                   std::fabs(input_grad[Frame::kPixels + i])));
    REQUIRE(mx > 0.0);
    for (int i = 0; i < Frame::kPixels; ++i) {
        const double expect =
            std::max(std::fabs(input_grad[i]), std::fabs(input_grad[Frame::kPixels + i])) / mx;
        REQUIRE(m.values[static_cast<size_t>(i)] == expect);
    }
}

TEST_CASE("saliency ignores non-argmax heads") {
    const NetArch a = tiny_arch();
    ParamSet p = init_params(a, 31);
    Rng rng(32);
    const Observation obs = random_observation(rng);
    ForwardCache cache;
    const SaliencyMap before = saliency(p, obs, cache);

    // perturb the weight rows of the two losing actions; the map must not move
    const int winner = before.action;
    for (int k = 0; k < a.actions; ++k) {
        if (k == winner) continue;
        for (int j = 0; j < a.dense; ++j)
            p.policy_w[static_cast<int64_t>(k) * a.dense + j] -= 0.05;  // keep them losing
    }
    const SaliencyMap after = saliency(p, obs, cache);
    REQUIRE(after.action == winner);
    for (int i = 0; i < Frame::kPixels; ++i)
        REQUIRE(after.values[static_cast<size_t>(i)] == before.values[static_cast<size_t>(i)]);
}

TEST_CASE("episode_saliency writes 3 ordered images per step, deterministically") {
    EnvSpec spec;
    spec.id = "t";
    spec.base_spawn_interval = 40;
    spec.gap_width = 1.3;

    const ParamSet params = init_params(NetArch::standard(), 77);
    const std::string dir1 = (fs::temp_directory_path() / "gyre_sal_a").string();
    const std::string dir2 = (fs::temp_directory_path() / "gyre_sal_b").string();
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    const SaliencyEpisodeResult r1 = episode_saliency(params, spec, 5, dir1, 40);
    CHECK(r1.steps > 0);
    CHECK(r1.files.size() == static_cast<size_t>(3 * r1.steps));

    // lexicographic order of names equals step order
    std::vector<std::string> frames;
    for (const auto& f : r1.files)
        if (f.find("frame_") != std::string::npos) frames.push_back(f);
    CHECK(std::is_sorted(frames.begin(), frames.end()));
    CHECK(frames.size() == static_cast<size_t>(r1.steps));

    // byte-identical re-run
    const SaliencyEpisodeResult r2 = episode_saliency(params, spec, 5, dir2, 40);
    REQUIRE(r2.files.size() == r1.files.size());
    for (size_t i = 0; i < r1.files.size(); ++i) {
        const auto a = read_file(r1.files[i]);
        const auto b = read_file(r2.files[i]);
        REQUIRE(a == b);
    }

    // overlay blends frame at half intensity plus the map
    int w = 0, h = 0;
    const auto frame = read_pgm(dir1 + "/frame_000000.pgm", w, h);
    const auto sal = read_pgm(dir1 + "/saliency_000000.pgm", w, h);
    const auto over = read_pgm(dir1 + "/overlay_000000.pgm", w, h);
    for (size_t i = 0; i < frame.size(); ++i) {
        const double expect = 0.5 * frame[i] + 0.5 * sal[i];
        CHECK(std::fabs(over[i] - expect) <= 1.5 / 255.0);  // per-channel quantization
    }

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("episode_saliency rejects unwritable output paths") {
    const ParamSet params = init_params(tiny_arch(), 1);
    EnvSpec spec;
    spec.id = "t";
    CHECK_THROWS(episode_saliency(params, spec, 1, "/proc/gyre_cannot_write_here", 3));
}
