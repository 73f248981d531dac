#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "gyre/env.hpp"
#include "helpers.hpp"

using namespace gyre;
using namespace gyre::test;

namespace {

EnvSpec basic_spec() {
    EnvSpec s;
    s.id = "t";
    s.generator = PatternGenerator::SingleGapRing;
    s.base_wall_speed = 0.25;
    s.base_spawn_interval = 60;
    s.gap_width = 1.1;
    s.difficulty_ramp = 0.0;
    return s;
}

bool states_identical(const GameState& a, const GameState& b) {
    if (a.player_angle != b.player_angle || a.elapsed_steps != b.elapsed_steps ||
        a.spawn_seed != b.spawn_seed || a.spawn_counter != b.spawn_counter ||
        a.next_spawn_step != b.next_spawn_step || a.controls_reversed != b.controls_reversed ||
        a.alive != b.alive || a.capped != b.capped || a.walls.size() != b.walls.size())
        return false;
    for (size_t i = 0; i < a.walls.size(); ++i)
        if (std::memcmp(&a.walls[i], &b.walls[i], sizeof(Wall)) != 0) return false;
    return true;
}

}  // namespace

TEST_CASE("reset determinism and initial state") {
    const EnvSpec spec = basic_spec();
    const GameState a = reset(spec, 7);
    const GameState b = reset(spec, 7);
    CHECK(states_identical(a, b));
    CHECK(a.elapsed_seconds() == 0.0);
    CHECK(a.walls.empty());
    CHECK(a.player_angle == 0.0);
    CHECK(a.alive);

    const GameState c = reset(spec, 8);
    CHECK(c.spawn_seed != a.spawn_seed);
}

TEST_CASE("reset validates the spec") {
    EnvSpec s = basic_spec();
    s.cost_per_step = 0.0;
    CHECK_THROWS_AS(reset(s, 1), SpecError);
    s = basic_spec();
    s.gap_width = 0.0;
    CHECK_THROWS_AS(reset(s, 1), SpecError);
    s = basic_spec();
    s.gap_width = kTau;
    CHECK_THROWS_AS(reset(s, 1), SpecError);
    s = basic_spec();
    s.base_spawn_interval = 0;
    CHECK_THROWS_AS(reset(s, 1), SpecError);
    s = basic_spec();
    s.base_wall_speed = -1.0;
    CHECK_THROWS_AS(reset(s, 1), SpecError);
    s = basic_spec();
    s.generator = PatternGenerator::Composite;
    CHECK_THROWS_AS(reset(s, 1), SpecError);  // no components
}

TEST_CASE("step pays 1/50 s while surviving") {
    const EnvSpec spec = basic_spec();
    GameState s = reset(spec, 3);
    const StepResult r = step(spec, s, Action::None);
    CHECK(r.reward == 1.0 / 50.0);
    CHECK_FALSE(r.terminal);
    CHECK(s.alive);
}

TEST_CASE("collision ends the episode with zero reward") {
    const EnvSpec spec = basic_spec();
    GameState s = reset(spec, 3);
    // park a wall directly on the player band and angular position
    Wall w;
    w.angle_start = norm_angle(s.player_angle - 0.05);
    w.angle_extent = 0.4;
    w.radius_inner = player_band_inner();
    w.radius_outer = player_band_outer();
    w.speed = 0.0;
    s.walls.push_back(w);
    CHECK(check_collision(s));
    const StepResult r = step(spec, s, Action::None);
    CHECK(r.terminal);
    CHECK(r.reward == 0.0);
    CHECK_FALSE(s.alive);
    CHECK_THROWS_AS(step(spec, s, Action::None), ContractViolation);
}

TEST_CASE("500 surviving steps give exactly 10 seconds") {
    EnvSpec spec = basic_spec();
    spec.gap_width = 3.0;  // generous gap; oracle easily survives
    GameState s = reset(spec, 11);
    double total = 0.0;
    for (int i = 0; i < 500; ++i) {
        const StepResult r = step(spec, s, oracle_policy(s));
        REQUIRE_FALSE(r.terminal);
        total += r.reward;
    }
    CHECK(s.elapsed_steps == 500);
    CHECK(s.elapsed_seconds() == 10.0);               // product form is exact
    CHECK(total == doctest::Approx(10.0).epsilon(1e-12));  // accumulation stays within float error
}

TEST_CASE("apply_action") {
    CHECK(apply_action(0.0, Action::None, false) == 0.0);
    CHECK(apply_action(0.0, Action::Left, false) == apply_action(0.0, Action::Right, true));
    CHECK(apply_action(0.0, Action::Right, false) == apply_action(0.0, Action::Left, true));

    // wrapping matches a plain modular-arithmetic oracle
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        const double a = rng.uniform(0.0, kTau);
        const auto act = static_cast<Action>(rng.uniform_int(3));
        const bool rev = rng.uniform() < 0.5;
        const double got = apply_action(a, act, rev);
        double delta = act == Action::Left ? -kAngularStepPerAction
                       : act == Action::Right ? kAngularStepPerAction
                                              : 0.0;
        if (rev) delta = -delta;
        double expect = std::fmod(a + delta, kTau);
        if (expect < 0) expect += kTau;
        if (expect >= kTau) expect -= kTau;
        CHECK(got == expect);
        CHECK(got >= 0.0);
        CHECK(got < kTau);
    }
    const double wrapped = apply_action(kTau - 1e-9, Action::Right, false);
    CHECK(wrapped < kTau);
    CHECK(wrapped >= 0.0);
}

TEST_CASE("check_collision basics") {
    GameState s;
    CHECK_FALSE(check_collision(s));  // no walls

    Wall ring;
    ring.angle_start = 0.0;
    ring.angle_extent = kTau - 1e-9;
    ring.radius_inner = player_band_inner();
    ring.radius_outer = player_band_outer();
    s.walls = {ring};
    CHECK(check_collision(s));  // effectively full ring at player radius

    s.walls[0].radius_inner = player_band_outer() + 0.5;  // radially clear
    s.walls[0].radius_outer = s.walls[0].radius_inner + 2.0;
    CHECK_FALSE(check_collision(s));
}

TEST_CASE("check_collision agrees with the dense sampling oracle") {
    Rng rng(424242);
    int colliding = 0;
    for (int i = 0; i < 1000; ++i) {
        const GameState s = random_quantized_state(rng);
        const bool fast = check_collision(s);
        const bool slow = collision_oracle(s);
        REQUIRE(fast == slow);
        colliding += fast ? 1 : 0;
    }
    // both outcomes must actually be exercised
    CHECK(colliding > 100);
    CHECK(colliding < 900);
}

TEST_CASE("collision is monotone under wall growth") {
    Rng rng(5150);
    for (int i = 0; i < 300; ++i) {
        GameState s = random_quantized_state(rng, 3);
        if (!check_collision(s)) continue;
        GameState bigger = s;
        for (Wall& w : bigger.walls) {
            w.angle_extent = std::min(kTau - 1e-9, w.angle_extent + rng.uniform(0.0, 0.5));
            w.radius_inner -= rng.uniform(0.0, 0.5);
            w.radius_outer += rng.uniform(0.0, 0.5);
        }
        CHECK(check_collision(bigger));
    }
}

TEST_CASE("difficulty_at") {
    EnvSpec spec = basic_spec();
    spec.difficulty_ramp = 0.1;
    const Difficulty d0 = difficulty_at(spec, 0);
    CHECK(d0.wall_speed == spec.base_wall_speed);
    CHECK(d0.spawn_interval == static_cast<double>(spec.base_spawn_interval));

    // ramp 0.1 at t = 10 s doubles the wall speed
    const Difficulty d10 = difficulty_at(spec, 10 * kStepRate);
    CHECK(d10.wall_speed == doctest::Approx(2.0 * spec.base_wall_speed).epsilon(1e-12));
    CHECK(d10.spawn_interval == doctest::Approx(spec.base_spawn_interval / 2.0).epsilon(1e-12));

    spec.difficulty_ramp = 0.0;
    const Difficulty dc = difficulty_at(spec, 123456);
    CHECK(dc.wall_speed == spec.base_wall_speed);
    CHECK(dc.spawn_interval == static_cast<double>(spec.base_spawn_interval));

    // monotone in elapsed time, and the interval never drops below the floor
    spec.difficulty_ramp = 0.25;
    double prev_speed = 0.0, prev_interval = 1e18;
    for (int64_t t = 0; t < 20000; t += 500) {
        const Difficulty d = difficulty_at(spec, t);
        CHECK(d.wall_speed >= prev_speed);
        CHECK(d.spawn_interval <= prev_interval);
        CHECK(d.spawn_interval >= kMinSpawnIntervalSteps);
        prev_speed = d.wall_speed;
        prev_interval = d.spawn_interval;
    }
}

TEST_CASE("spawn_pattern single gap ring") {
    const EnvSpec spec = basic_spec();
    const Difficulty d = difficulty_at(spec, 0);
    SpawnContext ctx;
    for (uint64_t i = 0; i < 50; ++i) {
        Rng rng(stream_at(123, i));
        const auto walls = spawn_pattern(PatternGenerator::SingleGapRing, spec, d, ctx, rng);
        REQUIRE(walls.size() == 1);
        CHECK(walls[0].angle_extent == doctest::Approx(kTau - spec.gap_width).epsilon(1e-12));
        CHECK(walls[0].radius_inner < walls[0].radius_outer);
        CHECK(walls[0].speed == d.wall_speed);
    }
}

TEST_CASE("spawn_pattern multi wall emits 1..4 arcs") {
    EnvSpec spec = basic_spec();
    spec.generator = PatternGenerator::MultiWall;
    const Difficulty d = difficulty_at(spec, 0);
    SpawnContext ctx;
    bool saw_min = false, saw_max = false;
    for (uint64_t i = 0; i < 200; ++i) {
        Rng rng(stream_at(55, i));
        const auto walls = spawn_pattern(PatternGenerator::MultiWall, spec, d, ctx, rng);
        REQUIRE(walls.size() >= 1);
        REQUIRE(walls.size() <= 4);
        saw_min = saw_min || walls.size() == 1;
        saw_max = saw_max || walls.size() == 4;
        for (const Wall& w : walls) CHECK(w.angle_extent <= kTau - spec.gap_width);
    }
    CHECK(saw_min);
    CHECK(saw_max);
}

TEST_CASE("spawn_pattern determinism under equal rng state") {
    EnvSpec spec = basic_spec();
    spec.generator = PatternGenerator::Lanes;
    const Difficulty d = difficulty_at(spec, 0);
    SpawnContext ctx;
    for (uint64_t i = 0; i < 20; ++i) {
        Rng r1(stream_at(777, i));
        Rng r2(stream_at(777, i));
        const auto a = spawn_pattern(PatternGenerator::Lanes, spec, d, ctx, r1);
        const auto b = spawn_pattern(PatternGenerator::Lanes, spec, d, ctx, r2);
        REQUIRE(a.size() == b.size());
        for (size_t j = 0; j < a.size(); ++j)
            CHECK(std::memcmp(&a[j], &b[j], sizeof(Wall)) == 0);
    }
}

TEST_CASE("spiral gaps advance by a fixed offset") {
    EnvSpec spec = basic_spec();
    spec.generator = PatternGenerator::Spiral;
    const Difficulty d = difficulty_at(spec, 0);
    Rng rng(1);
    SpawnContext c0{0, 1.0};
    SpawnContext c1{1, 1.0};
    const auto w0 = spawn_pattern(PatternGenerator::Spiral, spec, d, c0, rng);
    const auto w1 = spawn_pattern(PatternGenerator::Spiral, spec, d, c1, rng);
    REQUIRE(w0.size() == 1);
    REQUIRE(w1.size() == 1);
    const double delta = norm_angle(w1[0].angle_start - w0[0].angle_start);
    CHECK(delta == doctest::Approx(kSpiralGapAdvance).epsilon(1e-9));
}

TEST_CASE("trajectory determinism under equal seed and actions") {
    EnvSpec spec = basic_spec();
    spec.difficulty_ramp = 0.05;
    spec.rotation_drift = 0.003;
    spec.reversal_period = 40;
    GameState a = reset(spec, 123);
    GameState b = reset(spec, 123);
    Rng act(9);
    for (int i = 0; i < 600 && a.alive; ++i) {
        const auto action = static_cast<Action>(act.uniform_int(3));
        const StepResult ra = step(spec, a, action);
        const StepResult rb = step(spec, b, action);
        CHECK(ra.reward == rb.reward);
        CHECK(ra.terminal == rb.terminal);
        REQUIRE(states_identical(a, b));
        if (ra.terminal) break;
    }
}

TEST_CASE("total episode reward equals survival seconds") {
    EnvSpec spec = basic_spec();
    spec.base_spawn_interval = 40;
    for (uint64_t seed = 0; seed < 8; ++seed) {
        GameState s = reset(spec, seed);
        Rng act(seed);
        int64_t paid = 0;
        while (s.alive) {
            const StepResult r = step(spec, s, static_cast<Action>(act.uniform_int(3)));
            if (r.reward > 0.0) paid += 1;
            if (r.terminal) break;
        }
        // the final surviving step is the one before the collision
        CHECK(static_cast<double>(paid) * kStepSeconds ==
              static_cast<double>(s.elapsed_steps - 1) * kStepSeconds);
    }
}

TEST_CASE("oracle policy survives a flat single-gap level for 60+ seconds") {
    EnvSpec spec = basic_spec();
    spec.difficulty_ramp = 0.0;
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        const double survived = oracle_survival_seconds(spec, seed, 60 * kStepRate + 100);
        CHECK(survived >= 60.0);
    }
}

TEST_CASE("wall radii shrink by each wall's speed; expired walls leave") {
    EnvSpec spec = basic_spec();
    spec.base_spawn_interval = 25;
    spec.difficulty_ramp = 0.2;  // spawn-time speeds grow over the episode
    spec.gap_width = 5.0;
    int64_t covered = 0;
    for (uint64_t seed : {77ull, 78ull, 79ull}) {
        GameState s = reset(spec, seed);
        for (int i = 0; i < 600 && s.alive; ++i) {
            const GameState before = s;
            step(spec, s, oracle_policy(before));
            covered += 1;
            // match surviving walls against their previous positions
            for (const Wall& w : s.walls) {
                bool matched = false;
                for (const Wall& p : before.walls) {
                    if (p.speed == w.speed &&
                        std::fabs((p.radius_outer - p.speed) - w.radius_outer) < 1e-12) {
                        CHECK(w.radius_inner ==
                              doctest::Approx(p.radius_inner - p.speed).epsilon(1e-12));
                        matched = true;
                        break;
                    }
                }
                if (!matched) {
                    // newly spawned this step
                    CHECK(w.radius_outer >= kWallSpawnOuterRadius - 1e-9);
                }
            }
            for (const Wall& w : s.walls) CHECK(w.radius_outer >= kCenterRadius);
        }
    }
    CHECK(covered > 300);
}

TEST_CASE("episode cap flags the ending and still pays the final step") {
    EnvSpec spec = basic_spec();
    spec.gap_width = 6.0;  // trivial dodging; the scripted player reaches the cap
    GameState s = reset(spec, 5);
    StepResult last;
    while (s.alive) last = step(spec, s, oracle_policy(s));
    CHECK(last.terminal);
    CHECK(last.capped);
    CHECK(s.capped);
    CHECK(s.elapsed_steps == kEpisodeCapSteps);
    CHECK(last.reward == kStepSeconds);
}

TEST_CASE("control reversal schedule flips on the period") {
    EnvSpec spec = basic_spec();
    spec.gap_width = 6.0;
    spec.reversal_period = 10;
    GameState s = reset(spec, 2);
    for (int i = 0; i < 45; ++i) {
        step(spec, s, Action::None);
        const bool expect = ((s.elapsed_steps - 1) / 10) % 2 == 1;
        CHECK(s.controls_reversed == expect);
    }
}

TEST_CASE("world rotation drifts wall angles") {
    EnvSpec spec = basic_spec();
    spec.rotation_drift = 0.01;
    spec.gap_width = 6.0;
    GameState s = reset(spec, 4);
    step(spec, s, Action::None);  // spawns the first wall
    REQUIRE_FALSE(s.walls.empty());
    const double a0 = s.walls[0].angle_start;
    step(spec, s, Action::None);
    CHECK(norm_angle(s.walls[0].angle_start - a0) == doctest::Approx(0.01).epsilon(1e-9));
}
