#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "gyre/render.hpp"
#include "helpers.hpp"

using namespace gyre;
using namespace gyre::test;

namespace {

// Naive per-pixel polar inclusion test, written independently of the
// renderer's lookup-table path. Same pixel-center convention.
Frame brute_force_render(const GameState& s) {
    Frame f;
    const double half = Frame::kSide / 2.0;
    const double px = kPlayerOrbitRadius * std::cos(s.player_angle);
    const double py = kPlayerOrbitRadius * std::sin(s.player_angle);
    for (int row = 0; row < Frame::kSide; ++row) {
        for (int col = 0; col < Frame::kSide; ++col) {
            const double x = (col + 0.5) - half;
            const double y = half - (row + 0.5);
            const double r = std::hypot(x, y);
            const double a = norm_angle(std::atan2(y, x));
            bool lit = r <= kCenterRadius;
            if (!lit)
                for (const Wall& w : s.walls)
                    if (r >= w.radius_inner && r <= w.radius_outer &&
                        norm_angle(a - w.angle_start) <= w.angle_extent) {
                        lit = true;
                        break;
                    }
            if (!lit) lit = std::hypot(x - px, y - py) <= kPlayerMarkerRadius;
            f.px[static_cast<size_t>(row) * Frame::kSide + col] = lit ? 1 : 0;
        }
    }
    return f;
}

int count_lit(const Frame& f) {
    int n = 0;
    for (uint8_t v : f.px) n += v;
    return n;
}

EnvSpec play_spec() {
    EnvSpec s;
    s.id = "t";
    s.base_spawn_interval = 30;
    s.gap_width = 1.2;
    s.difficulty_ramp = 0.05;
    return s;
}

}  // namespace

TEST_CASE("reset state renders only the center disc and player marker") {
    const EnvSpec spec = play_spec();
    const GameState s = reset(spec, 1);
    const Frame f = render_frame(s);

    const double half = Frame::kSide / 2.0;
    int stray = 0;
    for (int row = 0; row < Frame::kSide; ++row)
        for (int col = 0; col < Frame::kSide; ++col) {
            if (!f.at(row, col)) continue;
            const double x = (col + 0.5) - half;
            const double y = half - (row + 0.5);
            const double r = std::hypot(x, y);
            const bool in_disc = r <= kCenterRadius;
            const bool near_player =
                std::hypot(x - kPlayerOrbitRadius * std::cos(s.player_angle),
                           y - kPlayerOrbitRadius * std::sin(s.player_angle)) <=
                kPlayerMarkerRadius;
            if (!in_disc && !near_player) stray += 1;
        }
    CHECK(stray == 0);
    CHECK(count_lit(f) > 0);  // center disc always visible
}

TEST_CASE("full ring wall matches the per-pixel inclusion oracle exactly") {
    GameState s;
    s.player_angle = 0.3;
    Wall w;
    w.angle_start = 0.0;
    w.angle_extent = kTau - 1e-12;
    w.radius_inner = 12.0;
    w.radius_outer = 16.0;
    s.walls = {w};
    const Frame got = render_frame(s);
    const Frame expect = brute_force_render(s);
    CHECK(got == expect);

    // every pixel whose center lies in the radial band must be lit
    int annulus = 0, got_band = 0;
    const double half = Frame::kSide / 2.0;
    for (int row = 0; row < Frame::kSide; ++row)
        for (int col = 0; col < Frame::kSide; ++col) {
            const double x = (col + 0.5) - half;
            const double y = half - (row + 0.5);
            const double r = std::hypot(x, y);
            if (r >= 12.0 && r <= 16.0) {
                annulus += 1;
                if (got.at(row, col)) got_band += 1;
            }
        }
    CHECK(annulus > 0);
    CHECK(got_band == annulus);
}

TEST_CASE("rasterization matches the oracle over random play states") {
    const EnvSpec spec = play_spec();
    Rng act(5);
    int states = 0;
    for (uint64_t seed = 0; seed < 8 && states < 100; ++seed) {
        GameState s = reset(spec, seed);
        while (s.alive && states < 100) {
            const Frame got = render_frame(s);
            const Frame expect = brute_force_render(s);
            REQUIRE(got == expect);
            states += 1;
            if (step(spec, s, static_cast<Action>(act.uniform_int(3))).terminal) break;
        }
    }
    CHECK(states >= 100);
}

TEST_CASE("render is a pure function of state") {
    const EnvSpec spec = play_spec();
    GameState s = reset(spec, 9);
    for (int i = 0; i < 40; ++i) step(spec, s, Action::Right);
    GameState copy = s;
    const Frame a = render_frame(s);
    const Frame b = render_frame(s);
    CHECK(a == b);
    CHECK(s.player_angle == copy.player_angle);
    REQUIRE(s.walls.size() == copy.walls.size());
    CHECK(std::memcmp(s.walls.data(), copy.walls.data(), s.walls.size() * sizeof(Wall)) == 0);
}

TEST_CASE("stack semantics") {
    const EnvSpec spec = play_spec();
    GameState s = reset(spec, 3);
    const Frame f0 = render_frame(s);

    const Observation start = stack(f0, f0);
    CHECK(start.prev == f0);
    CHECK(start.curr == f0);

    step(spec, s, Action::Left);
    const Frame f1 = render_frame(s);
    const Observation after = stack(f0, f1);
    CHECK(after.prev == f0);
    CHECK(after.curr == f1);
    CHECK_FALSE(f0 == f1);  // player moved
}

TEST_CASE("observation_to_tensor layout") {
    Frame a{}, b{};
    a.px[0] = 1;
    b.px[100] = 1;
    const Tensor t = observation_to_tensor(stack(a, b));
    REQUIRE(t.shape == std::vector<int>({2, 42, 42}));
    CHECK(t[0] == 1.0);
    CHECK(t[100] == 0.0);
    CHECK(t[Frame::kPixels + 100] == 1.0);
    double sum = 0.0;
    for (double v : t.data) sum += v;
    CHECK(sum == 2.0);
}

TEST_CASE("pgm round trip") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "gyre_render_test").string();
    fs::create_directories(dir);

    const EnvSpec spec = play_spec();
    GameState s = reset(spec, 21);
    for (int i = 0; i < 50; ++i) step(spec, s, Action::Right);
    const Frame f = render_frame(s);

    const std::string path = dir + "/frame.pgm";
    write_pgm(path, f);
    int w = 0, h = 0;
    const std::vector<double> back = read_pgm(path, w, h);
    REQUIRE(w == 42);
    REQUIRE(h == 42);
    for (int i = 0; i < Frame::kPixels; ++i)
        CHECK(back[static_cast<size_t>(i)] == (f.px[static_cast<size_t>(i)] ? 1.0 : 0.0));

    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int ww, hh, maxval;
    in >> magic >> ww >> hh >> maxval;
    CHECK(magic == "P5");
    CHECK(ww == 42);
    CHECK(hh == 42);
    CHECK(maxval == 255);

    CHECK_THROWS(read_pgm(dir + "/missing.pgm", w, h));
    fs::remove_all(dir);
}

TEST_CASE("every frame from live play has a lit pixel") {
    const EnvSpec spec = play_spec();
    GameState s = reset(spec, 31);
    Rng act(1);
    while (s.alive) {
        CHECK(count_lit(render_frame(s)) > 0);
        if (step(spec, s, static_cast<Action>(act.uniform_int(3))).terminal) break;
    }
}
