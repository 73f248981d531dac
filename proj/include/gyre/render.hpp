#pragma once
#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "gyre/env.hpp"
#include "gyre/tensor.hpp"

namespace gyre {

// 42x42 binary grayscale frame. Pixel (row 0, col 0) is the top-left corner;
// world angle 0 points along +x (to the right), counterclockwise positive,
// so world y = up is row-flipped into image space. Values are 0 or 1.
struct Frame {
    static constexpr int kSide = 42;
    static constexpr int kPixels = kSide * kSide;
    std::array<uint8_t, kPixels> px{};

    uint8_t at(int row, int col) const { return px[static_cast<size_t>(row) * kSide + col]; }
    bool operator==(const Frame&) const = default;
};

// Two consecutive frames, channel 0 = previous, channel 1 = current.
// At episode start both channels hold the initial frame.
struct Observation {
    Frame prev;
    Frame curr;
    bool operator==(const Observation&) const = default;
};

// Pixel-center point sampling against the analytic polar scene; no
// antialiasing. Pixel (r, c) samples world point
//   x = (c + 0.5) - 21,  y = 21 - (r + 0.5).
// A pixel is lit iff it lies in the center disc, inside some wall's annular
// sector (closed bounds), or within kPlayerMarkerRadius of the player point.
Frame render_frame(const GameState& state);

inline constexpr double kPlayerMarkerRadius = 0.75;  // px; covers 1-3 pixel centers

Observation stack(const Frame& prev, const Frame& curr);

Tensor observation_to_tensor(const Observation& obs);  // shape [2, 42, 42]

// Binary PGM (P5, maxval 255). `values` are clamped to [0, 1] and scaled.
void write_pgm(const std::string& path, std::span<const double> values, int width, int height);
void write_pgm(const std::string& path, const Frame& frame);

// Reads a P5 PGM written by write_pgm; returns intensities in [0, 1].
std::vector<double> read_pgm(const std::string& path, int& width, int& height);

}  // namespace gyre
