#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "setnet/data.hpp"

namespace setnet::data {

namespace {

struct Pt {
    double x, y;
};

using Stroke = std::vector<Pt>;

Stroke ellipse(double cx, double cy, double rx, double ry, double from = 0.0,
               double to = 2.0 * std::numbers::pi, int steps = 18) {
    Stroke s;
    for (int i = 0; i <= steps; ++i) {
        const double t = from + (to - from) * i / steps;
        s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
    }
    return s;
}

// Glyph skeletons in a unit box, x to the right and y down.
std::vector<Stroke> glyph(int digit) {
    switch (digit) {
        case 0: return {ellipse(0.5, 0.5, 0.28, 0.4)};
        case 1: return {{{0.33, 0.26}, {0.52, 0.1}, {0.52, 0.9}}};
        case 2: return {{{0.2, 0.3}, {0.33, 0.13}, {0.58, 0.1}, {0.77, 0.26}, {0.7, 0.48},
                         {0.22, 0.9}, {0.82, 0.9}}};
        case 3: return {{{0.22, 0.16}, {0.68, 0.11}, {0.76, 0.3}, {0.45, 0.49}, {0.78, 0.66},
                         {0.7, 0.87}, {0.22, 0.87}}};
        case 4: return {{{0.63, 0.9}, {0.63, 0.1}, {0.15, 0.64}, {0.85, 0.64}}};
        case 5: return {{{0.8, 0.1}, {0.28, 0.1}, {0.24, 0.45}, {0.6, 0.42}, {0.8, 0.62},
                         {0.68, 0.86}, {0.22, 0.88}}};
        case 6: return {{{0.7, 0.1}, {0.38, 0.32}, {0.24, 0.62}, {0.34, 0.87}, {0.64, 0.88},
                         {0.77, 0.68}, {0.6, 0.5}, {0.3, 0.56}}};
        case 7: return {{{0.16, 0.1}, {0.84, 0.1}, {0.42, 0.9}}};
        case 8: return {ellipse(0.5, 0.29, 0.19, 0.19), ellipse(0.5, 0.7, 0.24, 0.21)};
        case 9: return {ellipse(0.5, 0.32, 0.22, 0.21), {{0.72, 0.34}, {0.62, 0.9}}};
        default: return {};
    }
}

double segment_distance(Pt p, Pt a, Pt b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
    return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

DigitImages synth_digits(std::size_t count, Rng& rng) {
    constexpr std::size_t side = 28;
    DigitImages out{Tensor(Shape{count, side, side}), std::vector<std::uint8_t>(count)};
    for (std::size_t i = 0; i < count; ++i) {
        const int digit = static_cast<int>(uniform_index(rng, 10));
        out.labels[i] = static_cast<std::uint8_t>(digit);

        const double angle = uniform(rng, -0.2, 0.2);
        const double shear = uniform(rng, -0.15, 0.15);
        const double sx = 20.0 * uniform(rng, 0.8, 1.0);
        const double sy = 20.0 * uniform(rng, 0.85, 1.0);
        const double tx = 14.0 + uniform(rng, -1.0, 1.0);
        const double ty = 14.0 + uniform(rng, -1.0, 1.0);
        const double width = uniform(rng, 1.5, 2.8);
        const double ca = std::cos(angle), sa = std::sin(angle);

        std::vector<Stroke> strokes = glyph(digit);
        for (auto& stroke : strokes) {
            for (auto& p : stroke) {
                const double u = p.x - 0.5 + uniform(rng, -0.04, 0.04);
                const double v = p.y - 0.5 + uniform(rng, -0.04, 0.04);
                const double su = (u + shear * v) * sx;
                const double sv = v * sy;
                p = {tx + ca * su - sa * sv, ty + sa * su + ca * sv};
            }
        }

        double* img = out.images.data().data() + i * side * side;
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                const Pt p{c + 0.5, r + 0.5};
                double d = 1e9;
                for (const auto& stroke : strokes)
                    for (std::size_t k = 0; k + 1 < stroke.size(); ++k)
                        d = std::min(d, segment_distance(p, stroke[k], stroke[k + 1]));
                double v = std::clamp(0.5 * width + 0.5 - d, 0.0, 1.0);
                v += 0.05 * standard_normal(rng);
                img[r * side + c] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

}  // namespace setnet::data
