#include "gyre/env.hpp"

#include <algorithm>
#include <array>

namespace gyre {

const char* generator_name(PatternGenerator g) {
    switch (g) {
        case PatternGenerator::SingleGapRing: return "single_gap_ring";
        case PatternGenerator::MultiWall: return "multi_wall";
        case PatternGenerator::Lanes: return "lanes";
        case PatternGenerator::Spiral: return "spiral";
        case PatternGenerator::ControlReversal: return "control_reversal";
        case PatternGenerator::Composite: return "composite";
    }
    return "?";
}

std::optional<PatternGenerator> generator_from_name(const std::string& name) {
    static const std::array<PatternGenerator, 6> all = {
        PatternGenerator::SingleGapRing, PatternGenerator::MultiWall,
        PatternGenerator::Lanes,         PatternGenerator::Spiral,
        PatternGenerator::ControlReversal, PatternGenerator::Composite,
    };
    for (PatternGenerator g : all)
        if (name == generator_name(g)) return g;
    return std::nullopt;
}

void EnvSpec::validate() const {
    if (id.empty()) throw SpecError("env spec: id must be non-empty");
    if (!(cost_per_step > 0.0)) throw SpecError("env spec '" + id + "': cost_per_step must be > 0");
    if (!(gap_width > 0.0 && gap_width < kTau))
        throw SpecError("env spec '" + id + "': gap_width must lie in (0, 2*pi)");
    if (base_spawn_interval < 1)
        throw SpecError("env spec '" + id + "': base_spawn_interval must be >= 1");
    if (!(base_wall_speed > 0.0))
        throw SpecError("env spec '" + id + "': base_wall_speed must be > 0");
    if (!(difficulty_ramp >= 0.0))
        throw SpecError("env spec '" + id + "': difficulty_ramp must be >= 0");
    if (!std::isfinite(rotation_drift))
        throw SpecError("env spec '" + id + "': rotation_drift must be finite");
    if (reversal_period && *reversal_period < 1)
        throw SpecError("env spec '" + id + "': reversal_period must be >= 1");
    if (generator == PatternGenerator::Composite) {
        if (components.empty())
            throw SpecError("env spec '" + id + "': composite generator needs components");
        for (PatternGenerator c : components)
            if (c == PatternGenerator::Composite)
                throw SpecError("env spec '" + id + "': composite components must be primitive");
    } else if (!components.empty()) {
        throw SpecError("env spec '" + id + "': components only valid for composite generator");
    }
}

GameState reset(const EnvSpec& spec, uint64_t seed) {
    spec.validate();
    GameState s;
    s.player_angle = 0.0;
    s.elapsed_steps = 0;
    s.spawn_seed = derive_seed(seed, "spawn");
    s.spawn_counter = 0;
    s.next_spawn_step = 1;
    s.controls_reversed = false;
    s.alive = true;
    s.capped = false;
    return s;
}

double apply_action(double player_angle, Action action, bool controls_reversed) {
    double delta = 0.0;
    if (action == Action::Left) delta = -kAngularStepPerAction;
    if (action == Action::Right) delta = kAngularStepPerAction;
    if (controls_reversed) delta = -delta;
    return norm_angle(player_angle + delta);
}

bool angular_intervals_intersect(double a_start, double a_extent, double b_start,
                                 double b_extent) {
    // Full-circle spans always intersect anything.
    if (a_extent >= kTau || b_extent >= kTau) return true;
    const double d = norm_angle(b_start - a_start);
    return d <= a_extent || d >= kTau - b_extent;
}

bool check_collision(const GameState& state) {
    const double p_lo = player_band_inner();
    const double p_hi = player_band_outer();
    const double a_start = norm_angle(state.player_angle - kPlayerAngularHalfWidth);
    const double a_extent = 2.0 * kPlayerAngularHalfWidth;
    for (const Wall& w : state.walls) {
        if (w.radius_inner > p_hi || w.radius_outer < p_lo) continue;
        if (angular_intervals_intersect(a_start, a_extent, w.angle_start, w.angle_extent))
            return true;
    }
    return false;
}

Difficulty difficulty_at(const EnvSpec& spec, int64_t elapsed_steps) {
    const double t = static_cast<double>(elapsed_steps) * kStepSeconds;
    const double factor = 1.0 + spec.difficulty_ramp * t;
    Difficulty d;
    d.wall_speed = spec.base_wall_speed * factor;
    d.spawn_interval =
        std::max(static_cast<double>(kMinSpawnIntervalSteps),
                 static_cast<double>(spec.base_spawn_interval) / factor);
    return d;
}

namespace {

Wall ring_with_gap(double gap_start, double gap_width, double outer, double speed) {
    Wall w;
    w.angle_start = norm_angle(gap_start + gap_width);
    w.angle_extent = kTau - gap_width;
    w.radius_outer = outer;
    w.radius_inner = outer - kWallThickness;
    w.speed = speed;
    return w;
}

void spawn_single_gap(const EnvSpec& spec, const Difficulty& d, Rng& rng,
                      std::vector<Wall>& out) {
    const double gap_start = rng.uniform(0.0, kTau);
    out.push_back(ring_with_gap(gap_start, spec.gap_width, kWallSpawnOuterRadius, d.wall_speed));
}

void spawn_multi_wall(const EnvSpec& spec, const Difficulty& d, Rng& rng,
                      std::vector<Wall>& out) {
    const int count = 1 + static_cast<int>(rng.uniform_int(kMultiWallMaxArcs));
    for (int j = 0; j < count; ++j) {
        Wall w;
        w.angle_start = rng.uniform(0.0, kTau);
        // each arc individually leaves at least gap_width of free angle
        w.angle_extent = rng.uniform(0.6, kTau - spec.gap_width);
        w.radius_outer = kWallSpawnOuterRadius + j * kMultiWallRadialStagger;
        w.radius_inner = w.radius_outer - kWallThickness;
        w.speed = d.wall_speed;
        out.push_back(w);
    }
}

void spawn_lanes(const Difficulty& d, Rng& rng, std::vector<Wall>& out) {
    // block 3 or 4 of the 6 fixed sectors, chosen by partial Fisher-Yates
    std::array<int, kLaneCount> lanes;
    for (int i = 0; i < kLaneCount; ++i) lanes[i] = i;
    const int blocked = 3 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < blocked; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(kLaneCount - i));
        std::swap(lanes[i], lanes[j]);
    }
    const double lane_width = kTau / kLaneCount;
    for (int i = 0; i < blocked; ++i) {
        Wall w;
        w.angle_start = lanes[i] * lane_width;
        w.angle_extent = lane_width;
        w.radius_outer = kWallSpawnOuterRadius;
        w.radius_inner = w.radius_outer - kWallThickness;
        w.speed = d.wall_speed;
        out.push_back(w);
    }
}

void spawn_spiral(const EnvSpec& spec, const Difficulty& d, const SpawnContext& ctx,
                  std::vector<Wall>& out) {
    // gap center advances a fixed angle per spawn, forcing sustained rotation
    const double gap_center =
        norm_angle(ctx.spiral_phase0 + static_cast<double>(ctx.index) * kSpiralGapAdvance);
    const double gap_start = norm_angle(gap_center - 0.5 * spec.gap_width);
    out.push_back(ring_with_gap(gap_start, spec.gap_width, kWallSpawnOuterRadius, d.wall_speed));
}

}  // namespace

std::vector<Wall> spawn_pattern(PatternGenerator generator, const EnvSpec& spec,
                                const Difficulty& difficulty, const SpawnContext& ctx,
                                Rng& rng) {
    std::vector<Wall> out;
    switch (generator) {
        case PatternGenerator::SingleGapRing:
        case PatternGenerator::ControlReversal:  // flips are scheduled by step()
            spawn_single_gap(spec, difficulty, rng, out);
            break;
        case PatternGenerator::MultiWall:
            spawn_multi_wall(spec, difficulty, rng, out);
            break;
        case PatternGenerator::Lanes:
            spawn_lanes(difficulty, rng, out);
            break;
        case PatternGenerator::Spiral:
            spawn_spiral(spec, difficulty, ctx, out);
            break;
        case PatternGenerator::Composite: {
            const auto& cs = spec.components;
            PatternGenerator sub = cs[static_cast<size_t>(ctx.index % cs.size())];
            return spawn_pattern(sub, spec, difficulty, ctx, rng);
        }
    }
    return out;
}

StepResult step(const EnvSpec& spec, GameState& state, Action action) {
    if (!state.alive) throw ContractViolation("step() called on a dead state");

    // control reversal schedule is a pure function of the pre-step clock
    bool reversed = false;
    if (spec.reversal_period)
        reversed = (state.elapsed_steps / *spec.reversal_period) % 2 == 1;
    state.controls_reversed = reversed;

    state.player_angle = apply_action(state.player_angle, action, reversed);

    for (Wall& w : state.walls) {
        w.radius_inner -= w.speed;
        w.radius_outer -= w.speed;
        if (spec.rotation_drift != 0.0)
            w.angle_start = norm_angle(w.angle_start + spec.rotation_drift);
    }
    std::erase_if(state.walls, [](const Wall& w) { return w.radius_outer < kCenterRadius; });

    state.elapsed_steps += 1;

    if (state.elapsed_steps == state.next_spawn_step) {
        const Difficulty d = difficulty_at(spec, state.elapsed_steps);
        SpawnContext ctx;
        ctx.index = state.spawn_counter;
        ctx.spiral_phase0 =
            static_cast<double>(stream_at(state.spawn_seed, ~uint64_t{0}) >> 11) * 0x1.0p-53 * kTau;
        Rng event_rng(stream_at(state.spawn_seed, state.spawn_counter));
        auto spawned = spawn_pattern(spec.generator, spec, d, ctx, event_rng);
        state.walls.insert(state.walls.end(), spawned.begin(), spawned.end());
        state.spawn_counter += 1;
        state.next_spawn_step =
            state.elapsed_steps + std::max<int64_t>(1, std::llround(d.spawn_interval));
    }

    StepResult r;
    if (check_collision(state)) {
        state.alive = false;
        r.reward = 0.0;
        r.terminal = true;
    } else if (state.elapsed_steps >= kEpisodeCapSteps) {
        // survived the step, so it pays; the cap flag distinguishes the ending
        state.alive = false;
        state.capped = true;
        r.reward = kStepSeconds;
        r.terminal = true;
        r.capped = true;
    } else {
        r.reward = kStepSeconds;
    }
    return r;
}

}  // namespace gyre
