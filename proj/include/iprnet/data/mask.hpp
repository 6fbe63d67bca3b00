#pragma once

#include <cstdint>
#include <vector>

#include "iprnet/core/errors.hpp"
#include "iprnet/core/nn.hpp"

namespace iprnet {

/// Label value excluded from every loss and metric.
inline constexpr int kIgnoreLabel = 255;
inline constexpr int kBackgroundLabel = 0;

/// Integer-labeled image. Values are class ids, 0 for background, or 255 for
/// ignore.
struct SegmentationMask {
    int height = 0;
    int width = 0;
    std::vector<std::int32_t> labels;

    SegmentationMask() = default;
    SegmentationMask(int h, int w, std::int32_t fill = 0)
        : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

    std::int32_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }

    std::int64_t numel() const { return static_cast<std::int64_t>(labels.size()); }

    bool contains(std::int32_t value) const {
        for (std::int32_t v : labels)
            if (v == value) return true;
        return false;
    }

    std::int64_t count(std::int32_t value) const {
        std::int64_t n = 0;
        for (std::int32_t v : labels)
            if (v == value) ++n;
        return n;
    }

    bool operator==(const SegmentationMask& o) const {
        return height == o.height && width == o.width && labels == o.labels;
    }
};

/// Nearest-neighbor resize with the same block-center convention used for
/// feature maps, so labels stay aligned to the grid they supervise.
inline SegmentationMask nearest_resize(const SegmentationMask& m, int ho, int wo) {
    if (ho <= 0 || wo <= 0) throw ShapeError("nearest_resize: non-positive output size");
    SegmentationMask out(ho, wo);
    for (int y = 0; y < ho; ++y) {
        const int sy = nearest_src(y, m.height, ho);
        for (int x = 0; x < wo; ++x) out.at(y, x) = m.at(sy, nearest_src(x, m.width, wo));
    }
    return out;
}

/// Collapse a multi-class mask to {0 = not-target, 1 = target}; 255 preserved.
inline SegmentationMask binarize_to_target(const SegmentationMask& m, std::int32_t target_class) {
    SegmentationMask out(m.height, m.width);
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        const std::int32_t v = m.labels[i];
        out.labels[i] = (v == kIgnoreLabel) ? kIgnoreLabel : (v == target_class ? 1 : 0);
    }
    return out;
}

inline SegmentationMask flip_horizontal(const SegmentationMask& m) {
    SegmentationMask out(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
    return out;
}

inline Tensor flip_horizontal(const Tensor& image) {
    Tensor out(image.shape());
    const int c_n = image.dim(0), h = image.dim(1), w = image.dim(2);
    for (int c = 0; c < c_n; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y, w - 1 - x);
    return out;
}

} // namespace iprnet
