#pragma once
#include <cmath>
#include <vector>

#include "gyre/env.hpp"
#include "gyre/net.hpp"
#include "gyre/rng.hpp"

namespace gyre::test {

// Scripted reference player: rotate toward the center of the widest free gap
// of the innermost wall group that has not yet passed the player band.
// Independent of the learned policy path; reads simulator state directly.
inline Action oracle_policy(const GameState& s) {
    const double p_in = player_band_inner();
    double nearest = 1e18;
    for (const Wall& w : s.walls)
        if (w.radius_outer >= p_in) nearest = std::min(nearest, w.radius_inner);
    if (nearest > 1e17) return Action::None;

    // walls arriving together form one obstacle event
    std::vector<const Wall*> group;
    for (const Wall& w : s.walls)
        if (w.radius_outer >= p_in && w.radius_inner <= nearest + 1.5) group.push_back(&w);

    // find the widest free arc by scanning blocked intervals from each gap edge
    double best_center = 0.0, best_width = -1.0;
    for (const Wall* w : group) {
        const double edge = norm_angle(w->angle_start + w->angle_extent);  // gap begins here
        double width = kTau;
        for (const Wall* o : group) {
            const double d = norm_angle(o->angle_start - edge);
            if (o != w || d > 1e-12) width = std::min(width, d);
        }
        // skip edges that sit inside another wall
        bool inside = false;
        for (const Wall* o : group) {
            if (o == w) continue;
            const double d = norm_angle(edge - o->angle_start);
            if (d < o->angle_extent - 1e-12) inside = true;
        }
        if (inside || width <= 0.0) continue;
        if (width > best_width) {
            best_width = width;
            best_center = norm_angle(edge + width / 2.0);
        }
    }
    if (best_width < 0.0) return Action::None;  // fully blocked; nothing to do

    double diff = norm_angle(best_center - s.player_angle);
    if (diff > kTau / 2.0) diff -= kTau;
    if (std::fabs(diff) <= kAngularStepPerAction / 2.0) return Action::None;
    Action a = diff > 0.0 ? Action::Right : Action::Left;
    if (s.controls_reversed) a = (a == Action::Right) ? Action::Left : Action::Right;
    return a;
}

// Survival time in seconds of the scripted player, from reset.
inline double oracle_survival_seconds(const EnvSpec& spec, uint64_t seed,
                                      int64_t max_steps = kEpisodeCapSteps) {
    GameState s = reset(spec, seed);
    int64_t paid = 0;
    while (s.alive && paid < max_steps) {
        const StepResult r = step(spec, s, oracle_policy(s));
        if (r.reward > 0.0) paid += 1;
        if (r.terminal) break;
    }
    return static_cast<double>(paid) * kStepSeconds;
}

// Dense angular/radial point-sampling collision oracle; closed endpoints.
inline bool collision_oracle(const GameState& s, int n_ang = 10000, int n_rad = 65) {
    const double a0 = s.player_angle - kPlayerAngularHalfWidth;
    const double span = 2.0 * kPlayerAngularHalfWidth;
    const double r0 = player_band_inner();
    const double r1 = player_band_outer();
    for (const Wall& w : s.walls) {
        for (int i = 0; i < n_ang; ++i) {
            const double a = norm_angle(a0 + span * (static_cast<double>(i) / (n_ang - 1)));
            const double d = norm_angle(a - w.angle_start);
            if (d > w.angle_extent) continue;
            for (int j = 0; j < n_rad; ++j) {
                const double r = r0 + (r1 - r0) * (static_cast<double>(j) / (n_rad - 1));
                if (r >= w.radius_inner && r <= w.radius_outer) return true;
            }
        }
    }
    return false;
}

// Random states with wall geometry on coarse grids (angles in units of
// 2*pi/4096, radii in units of 1/16) so that any true overlap is orders of
// magnitude wider than the oracle's sample spacing.
inline GameState random_quantized_state(Rng& rng, int max_walls = 4) {
    constexpr double qa = kTau / 4096.0;
    constexpr double qr = 1.0 / 16.0;
    GameState s;
    s.player_angle = static_cast<double>(rng.uniform_int(4096)) * qa;
    const int n = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_walls) + 1));
    for (int i = 0; i < n; ++i) {
        Wall w;
        w.angle_start = static_cast<double>(rng.uniform_int(4096)) * qa;
        w.angle_extent = static_cast<double>(1 + rng.uniform_int(4094)) * qa;
        w.radius_inner = 3.0 + static_cast<double>(rng.uniform_int(80)) * qr;
        w.radius_outer = w.radius_inner + static_cast<double>(1 + rng.uniform_int(64)) * qr;
        w.speed = 0.25;
        s.walls.push_back(w);
    }
    return s;
}

// Relative error with a floor so that near-zero pairs compare as equal.
inline double rel_err(double a, double b, double floor = 1e-6) {
    const double denom = std::max({std::fabs(a), std::fabs(b), floor});
    return std::fabs(a - b) / denom;
}

inline NetArch tiny_arch() {
    NetArch a;
    a.c1 = 8;
    a.c2 = 8;
    a.c3 = 8;
    a.dense = 32;
    return a;
}

// Random binary observation resembling rendered frames.
inline Observation random_observation(Rng& rng, double density = 0.12) {
    Observation o;
    for (int i = 0; i < Frame::kPixels; ++i) {
        o.prev.px[static_cast<size_t>(i)] = rng.uniform() < density ? 1 : 0;
        o.curr.px[static_cast<size_t>(i)] = rng.uniform() < density ? 1 : 0;
    }
    return o;
}

// Dense binary observation for gradient checks: at density 0.5 the chance of
// identical (or all-zero) receptive fields, and hence of exact maxpool ties
// that break finite differences, is negligible.
inline Observation dense_observation(Rng& rng) { return random_observation(rng, 0.5); }

// Real-valued input tensor in (0, 1); every pre-activation is then almost
// surely away from the ReLU kink and pool ties cannot occur.
inline Tensor random_real_input(const NetArch& arch, Rng& rng) {
    Tensor t({1, arch.in_ch, arch.in_h, arch.in_w});
    for (double& v : t.data) v = 0.05 + 0.9 * rng.uniform();
    return t;
}

// A central-difference oracle is only valid where the network is locally
// linear in the probed coordinate: no ReLU sign change and no maxpool argmax
// swap may occur inside the +-h interval. The checks construct that regime
// explicitly and assert its preconditions rather than assuming them:
//   - fd_params: positive trunk weights and biases, so every pre-activation
//     keeps a margin far above h (ReLU side fixed);
//   - ramp_input: a strictly increasing spatial field, so pool windows have
//     decisive winners (argmax side fixed), verified via min_pool_gap.
// ReLU masking itself is covered by the dead-unit tests, which hold gradients
// at exactly zero.
inline ParamSet fd_params(const NetArch& arch, uint64_t seed) {
    ParamSet p = init_params(arch, seed);
    Rng rng(derive_seed(seed, "fd-pos"));
    auto positive = [&](Tensor& t, double lo, double hi) {
        for (double& v : t.data) v = rng.uniform(lo, hi);
    };
    positive(p.conv1_w, 0.02, 0.25);
    positive(p.conv1_b, 0.05, 0.2);
    positive(p.conv2_w, 0.005, 0.08);
    positive(p.conv2_b, 0.05, 0.2);
    positive(p.conv3_w, 0.005, 0.08);
    positive(p.conv3_b, 0.05, 0.2);
    positive(p.dense_wt, 0.0005, 0.004);
    positive(p.dense_b, 0.05, 0.2);
    return p;
}

// Strictly increasing over (channel, row, column); positive-weight layers
// then produce strictly increasing activation fields away from the padded
// borders, so pool windows cannot near-tie.
inline Tensor ramp_input(const NetArch& arch) {
    Tensor t({1, arch.in_ch, arch.in_h, arch.in_w});
    const auto n = static_cast<double>(t.count());
    for (int64_t i = 0; i < t.count(); ++i)
        t[i] = 0.05 + 0.9 * static_cast<double>(i) / n;
    return t;
}

// Smallest nonzero winner-vs-runner-up gap across every pooling window of
// the cached forward pass. Exact ties are skipped: under continuous random
// weights they only arise from bitwise-identical receptive fields, which
// respond identically to every perturbation and so cannot corrupt a central
// difference.
inline double min_pool_gap(const ForwardCache& cache, const NetArch& arch) {
    auto scan = [](const Tensor& act, int B, int C, int H, int W) {
        double min_gap = 1e300;
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const double* plane = act.ptr() + (static_cast<int64_t>(b) * C + c) * H * W;
                for (int oy = 0; oy * 2 < H; ++oy)
                    for (int ox = 0; ox * 2 < W; ++ox) {
                        double best = -1e300, second = -1e300;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const int y = oy * 2 + dy, x = ox * 2 + dx;
                                if (y >= H || x >= W) continue;
                                const double v = plane[static_cast<int64_t>(y) * W + x];
                                if (v > best) {
                                    second = best;
                                    best = v;
                                } else if (v > second) {
                                    second = v;
                                }
                            }
                        if (second > -1e300 && best != second)
                            min_gap = std::min(min_gap, best - second);
                    }
            }
        return min_gap;
    };
    const int B = cache.batch;
    return std::min(scan(cache.a1, B, arch.c1, arch.in_h, arch.in_w),
                    scan(cache.a2, B, arch.c2, arch.p1_h(), arch.p1_w()));
}

// Binary frame whose rows below `split` are lit. Solid-block observations
// keep pooling decisive under positive weights: window mates are either
// identical or differ by same-signed groups of taps.
inline Frame half_plane_frame(int split) {
    Frame f;
    for (int r = 0; r < Frame::kSide; ++r)
        for (int c = 0; c < Frame::kSide; ++c)
            f.px[static_cast<size_t>(r) * Frame::kSide + c] = r < split ? 1 : 0;
    return f;
}

}  // namespace gyre::test
