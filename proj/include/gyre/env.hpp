#pragma once
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gyre/errors.hpp"
#include "gyre/rng.hpp"

namespace gyre {

// ---------------------------------------------------------------------------
// World model. All geometry lives in polar coordinates around the screen
// center. Distances are in "radial units", chosen to equal pixels of the
// 42x42 frame (origin at image center, angle 0 along +x, counterclockwise
// positive). Time advances in fixed steps of 1/50 s of simulated time.
// ---------------------------------------------------------------------------

inline constexpr double kTau = 6.283185307179586476925286766559;
inline constexpr int kStepRate = 50;                 // simulation steps per second
inline constexpr double kStepSeconds = 1.0 / 50.0;   // reward per surviving step

inline constexpr double kCenterRadius = 4.0;         // filled center disc
inline constexpr double kPlayerOrbitRadius = 6.0;    // player track, just outside center
inline constexpr double kPlayerRadialHalfWidth = 1.0;    // player band [5, 7]
inline constexpr double kPlayerAngularHalfWidth = 0.15;  // radians
inline constexpr double kAngularStepPerAction = 0.12;    // radians per Left/Right step

inline constexpr double kWallSpawnOuterRadius = 30.0;  // just beyond frame corner
inline constexpr double kWallThickness = 2.5;
inline constexpr double kMultiWallRadialStagger = 4.0;
inline constexpr int kMultiWallMaxArcs = 4;
inline constexpr int kLaneCount = 6;
inline constexpr double kSpiralGapAdvance = 0.7;     // radians between successive gaps

inline constexpr int64_t kMinSpawnIntervalSteps = 8;
inline constexpr int64_t kEpisodeCapSteps = 30000;   // 600 simulated seconds

// Wraps any angle into [0, 2*pi).
inline double norm_angle(double a) {
    double r = std::fmod(a, kTau);
    if (r < 0.0) r += kTau;
    if (r >= kTau) r -= kTau;  // guard: tiny negatives can round up to 2*pi
    return r;
}

enum class PatternGenerator {
    SingleGapRing,
    MultiWall,
    Lanes,
    Spiral,
    ControlReversal,
    Composite,
};

const char* generator_name(PatternGenerator g);
std::optional<PatternGenerator> generator_from_name(const std::string& name);

// Parameterized level description. Validated on use; see validate().
struct EnvSpec {
    std::string id;
    PatternGenerator generator = PatternGenerator::SingleGapRing;
    std::vector<PatternGenerator> components;  // Composite only; primitive entries
    double base_wall_speed = 0.25;      // radial units per step
    int64_t base_spawn_interval = 60;   // steps between spawn events
    double gap_width = 1.1;             // radians, in (0, 2*pi)
    double difficulty_ramp = 0.0;       // per simulated second, >= 0
    double rotation_drift = 0.0;        // radians per step applied to all walls
    double cost_per_step = 1.0;         // ledger cost c_i, > 0
    std::optional<int64_t> reversal_period;  // steps between control flips

    void validate() const;  // throws SpecError
};

// One annular arc obstacle, moving inward at its own speed.
struct Wall {
    double angle_start = 0.0;   // [0, 2*pi)
    double angle_extent = 0.0;  // (0, 2*pi)
    double radius_inner = 0.0;
    double radius_outer = 0.0;
    double speed = 0.0;         // radial units per step
};

enum class Action : int { None = 0, Left = 1, Right = 2 };
inline constexpr int kActionCount = 3;

// Full simulation state. Spawn randomness is a counter stream keyed by
// (spawn_seed, spawn_counter), so spawns never depend on how many draws the
// acting agent has consumed.
struct GameState {
    double player_angle = 0.0;
    std::vector<Wall> walls;
    int64_t elapsed_steps = 0;
    uint64_t spawn_seed = 0;
    uint64_t spawn_counter = 0;
    int64_t next_spawn_step = 1;
    bool controls_reversed = false;
    bool alive = true;
    bool capped = false;  // episode ended by the hard step cap, not collision

    double elapsed_seconds() const { return static_cast<double>(elapsed_steps) * kStepSeconds; }
};

struct StepResult {
    double reward = 0.0;   // seconds: 1/50 while surviving, 0 on collision
    bool terminal = false;
    bool capped = false;
};

// Spawn-time wall parameters at a given moment of an episode.
struct Difficulty {
    double wall_speed = 0.0;
    double spawn_interval = 0.0;  // steps, already clamped to the minimum
};

struct SpawnContext {
    uint64_t index = 0;          // 0-based spawn event counter
    double spiral_phase0 = 0.0;  // per-episode spiral gap origin
};

// --- Operations -------------------------------------------------------------

// Initial state: player at angle 0, no walls, clock at zero. Throws SpecError
// if the spec is invalid.
GameState reset(const EnvSpec& spec, uint64_t seed);

// Advances one step: apply action, move walls, expire, spawn, resolve
// collision. Throws ContractViolation when called on a dead state.
StepResult step(const EnvSpec& spec, GameState& state, Action action);

// Left decrements the angle, Right increments, None holds; reversal swaps
// Left/Right. Result wrapped to [0, 2*pi).
double apply_action(double player_angle, Action action, bool controls_reversed);

// True iff the player's angular interval intersects a wall's angular span and
// the player radial band [5, 7] intersects that wall's radial band. All
// interval comparisons are closed, so touching counts as contact.
bool check_collision(const GameState& state);

// Difficulty grows multiplicatively-linearly with elapsed simulated time:
//   wall_speed     = base * (1 + ramp * t_seconds)
//   spawn_interval = max(kMinSpawnIntervalSteps, base / (1 + ramp * t_seconds))
Difficulty difficulty_at(const EnvSpec& spec, int64_t elapsed_steps);

// Walls emitted by one spawn event. Deterministic given (spec, difficulty,
// ctx, rng state).
std::vector<Wall> spawn_pattern(PatternGenerator generator, const EnvSpec& spec,
                                const Difficulty& difficulty, const SpawnContext& ctx,
                                Rng& rng);

// Player angular interval [angle - half_width, angle + half_width] vs a wall
// span, on the circle. Exposed for the renderer and tests.
bool angular_intervals_intersect(double a_start, double a_extent, double b_start,
                                 double b_extent);

inline double player_band_inner() { return kPlayerOrbitRadius - kPlayerRadialHalfWidth; }
inline double player_band_outer() { return kPlayerOrbitRadius + kPlayerRadialHalfWidth; }

}  // namespace gyre
