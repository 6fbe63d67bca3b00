#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "iprnet/core/errors.hpp"

namespace iprnet {

/// Geometric primitives available to the synthetic generator. Containment is
/// decided in integer arithmetic so rasters are exactly reproducible from the
/// recorded parameters.
enum class ShapeKind : int { Disc = 0, Square = 1, Diamond = 2, Triangle = 3, Cross = 4 };

inline constexpr int kShapeKindCount = 5;

enum class TextureKind : int { Stripes = 0, Dots = 1 };

/// One drawn shape instance; the full record needed to re-rasterize it.
struct ShapeSpec {
    int class_id = 0;
    ShapeKind kind = ShapeKind::Disc;
    int cx = 0;
    int cy = 0;
    int radius = 0;
};

/// Integer point-in-shape test.
inline bool shape_contains(const ShapeSpec& s, int x, int y) {
    const std::int64_t dx = x - s.cx;
    const std::int64_t dy = y - s.cy;
    const std::int64_t r = s.radius;
    switch (s.kind) {
    case ShapeKind::Disc:
        return dx * dx + dy * dy <= r * r;
    case ShapeKind::Square:
        return dx >= -r && dx <= r && dy >= -r && dy <= r;
    case ShapeKind::Diamond:
        return (dx < 0 ? -dx : dx) + (dy < 0 ? -dy : dy) <= r;
    case ShapeKind::Triangle: {
        // Isoceles triangle pointing up: apex (cx, cy-r), base corners (cx±r, cy+r).
        if (dy < -r || dy > r) return false;
        const std::int64_t half_width = (dy + r) / 2;
        return dx >= -half_width && dx <= half_width;
    }
    case ShapeKind::Cross: {
        const std::int64_t arm = r / 3;
        const std::int64_t ax = dx < 0 ? -dx : dx;
        const std::int64_t ay = dy < 0 ? -dy : dy;
        return (ax <= arm && ay <= r) || (ay <= arm && ax <= r);
    }
    }
    return false;
}

/// Class id -> (shape, texture) family. Consecutive class pairs share a shape
/// and differ only in texture, which makes neighboring classes deliberately
/// similar.
inline ShapeKind class_shape(int class_id) {
    return static_cast<ShapeKind>(((class_id - 1) / 2) % kShapeKindCount);
}

inline TextureKind class_texture(int class_id) {
    return static_cast<TextureKind>((class_id - 1) % 2);
}

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;
};

/// Deterministic palette; one base color per class.
inline Rgb class_base_color(int class_id) {
    static const std::array<Rgb, 10> palette = {{{0.85, 0.30, 0.25},
                                                 {0.25, 0.55, 0.85},
                                                 {0.30, 0.75, 0.35},
                                                 {0.85, 0.65, 0.20},
                                                 {0.60, 0.35, 0.80},
                                                 {0.20, 0.70, 0.70},
                                                 {0.85, 0.40, 0.65},
                                                 {0.55, 0.60, 0.25},
                                                 {0.40, 0.45, 0.85},
                                                 {0.75, 0.50, 0.40}}};
    return palette[static_cast<std::size_t>(class_id - 1) % palette.size()];
}

/// Texture color at an absolute pixel position. The accent color alternates
/// with the base color at a coarse period so texture survives downsampling.
inline Rgb texture_color(int class_id, int x, int y, int period) {
    const Rgb base = class_base_color(class_id);
    const Rgb accent{1.0 - 0.7 * base.r, 1.0 - 0.7 * base.g, 1.0 - 0.7 * base.b};
    bool use_accent = false;
    switch (class_texture(class_id)) {
    case TextureKind::Stripes:
        use_accent = ((x + y) / period) % 2 == 0;
        break;
    case TextureKind::Dots: {
        const int px = x % period - period / 2;
        const int py = y % period - period / 2;
        const int dr = period / 3;
        use_accent = px * px + py * py <= dr * dr;
        break;
    }
    }
    return use_accent ? accent : base;
}

inline std::string shape_kind_name(ShapeKind k) {
    switch (k) {
    case ShapeKind::Disc: return "disc";
    case ShapeKind::Square: return "square";
    case ShapeKind::Diamond: return "diamond";
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::Cross: return "cross";
    }
    return "unknown";
}

} // namespace iprnet
