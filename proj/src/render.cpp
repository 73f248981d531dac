#include "gyre/render.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace gyre {

namespace {

struct PolarLut {
    std::array<double, Frame::kPixels> radius;
    std::array<double, Frame::kPixels> angle;
    PolarLut() {
        const double half = Frame::kSide / 2.0;
        for (int r = 0; r < Frame::kSide; ++r) {
            for (int c = 0; c < Frame::kSide; ++c) {
                const double x = (c + 0.5) - half;
                const double y = half - (r + 0.5);
                const size_t i = static_cast<size_t>(r) * Frame::kSide + c;
                radius[i] = std::hypot(x, y);
                angle[i] = norm_angle(std::atan2(y, x));
            }
        }
    }
};

const PolarLut& lut() {
    static const PolarLut t;
    return t;
}

inline bool in_angular_span(double a, double start, double extent) {
    const double d = norm_angle(a - start);
    return d <= extent;
}

}  // namespace

Frame render_frame(const GameState& state) {
    const PolarLut& t = lut();
    Frame f;

    const double half = Frame::kSide / 2.0;
    const double px = kPlayerOrbitRadius * std::cos(state.player_angle);
    const double py = kPlayerOrbitRadius * std::sin(state.player_angle);

    for (int i = 0; i < Frame::kPixels; ++i) {
        const double r = t.radius[i];
        const double a = t.angle[i];
        bool lit = r <= kCenterRadius;
        if (!lit) {
            for (const Wall& w : state.walls) {
                if (r >= w.radius_inner && r <= w.radius_outer &&
                    in_angular_span(a, w.angle_start, w.angle_extent)) {
                    lit = true;
                    break;
                }
            }
        }
        if (!lit) {
            const int row = i / Frame::kSide;
            const int col = i % Frame::kSide;
            const double x = (col + 0.5) - half;
            const double y = half - (row + 0.5);
            lit = std::hypot(x - px, y - py) <= kPlayerMarkerRadius;
        }
        f.px[static_cast<size_t>(i)] = lit ? 1 : 0;
    }
    return f;
}

Observation stack(const Frame& prev, const Frame& curr) { return Observation{prev, curr}; }

Tensor observation_to_tensor(const Observation& obs) {
    Tensor t({2, Frame::kSide, Frame::kSide});
    for (int i = 0; i < Frame::kPixels; ++i) t.data[static_cast<size_t>(i)] = obs.prev.px[static_cast<size_t>(i)];
    for (int i = 0; i < Frame::kPixels; ++i)
        t.data[static_cast<size_t>(Frame::kPixels + i)] = obs.curr.px[static_cast<size_t>(i)];
    return t;
}

void write_pgm(const std::string& path, std::span<const double> values, int width, int height) {
    if (static_cast<size_t>(width) * height != values.size())
        throw std::runtime_error("write_pgm: size mismatch for " + path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    char header[64];
    const int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", width, height);
    out.write(header, n);
    std::vector<unsigned char> row(static_cast<size_t>(width));
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double v = values[static_cast<size_t>(r) * width + c];
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            row[static_cast<size_t>(c)] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), width);
    }
    if (!out) throw std::runtime_error("write_pgm: short write to " + path);
}

void write_pgm(const std::string& path, const Frame& frame) {
    std::array<double, Frame::kPixels> vals;
    for (int i = 0; i < Frame::kPixels; ++i) vals[static_cast<size_t>(i)] = frame.px[static_cast<size_t>(i)];
    write_pgm(path, vals, Frame::kSide, Frame::kSide);
}

std::vector<double> read_pgm(const std::string& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    int maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 255 || width <= 0 || height <= 0)
        throw std::runtime_error("read_pgm: unsupported header in " + path);
    in.get();  // single whitespace after header
    std::vector<unsigned char> raw(static_cast<size_t>(width) * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw std::runtime_error("read_pgm: truncated file " + path);
    std::vector<double> vals(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) vals[i] = raw[i] / 255.0;
    return vals;
}

}  // namespace gyre
