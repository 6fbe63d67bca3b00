#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "iprnet/core/rng.hpp"
#include "iprnet/core/tensor.hpp"
#include "iprnet/data/mask.hpp"
#include "iprnet/data/shapes.hpp"

namespace iprnet {

/// Parameters of the synthetic shapes generator.
struct GeneratorConfig {
    int n_classes = 8;
    int images_per_class = 20;
    int image_size = 64;
    int shapes_per_image = 4;
    std::uint64_t seed = 7;
    /// Largest k an episode may request; generation guarantees each class
    /// appears in at least k_max + 1 items.
    int k_max = 5;
    /// Mark a one-pixel band around every labeled region as ignore (255).
    bool ignore_border = true;
    /// Per-pixel additive noise amplitude.
    double noise_level = 0.06;
    /// Pixel period of the class textures.
    int texture_period = 8;
    /// Shape radius range in pixels; 0 means image_size/8 and image_size/4.
    int min_radius = 0;
    int max_radius = 0;
    /// Per-instance perturbation of the class base color, uniform in
    /// [-color_jitter, color_jitter] per channel.
    double color_jitter = 0.0;

    void validate() const {
        if (n_classes < 4) throw ConfigError("generator config: n_classes must be >= 4");
        if (n_classes > 2 * kShapeKindCount * 2)
            throw ConfigError("generator config: n_classes exceeds the shape/texture family count");
        if (images_per_class < k_max + 1)
            throw ConfigError("generator config: images_per_class must be >= k_max + 1");
        if (image_size < 32) throw ConfigError("generator config: image_size must be >= 32");
        if (shapes_per_image < 1)
            throw ConfigError("generator config: shapes_per_image must be >= 1");
        if (texture_period < 2)
            throw ConfigError("generator config: texture_period must be >= 2");
        if (color_jitter < 0 || color_jitter > 0.5)
            throw ConfigError("generator config: color_jitter must be in [0, 0.5]");
        if (min_radius < 0 || max_radius < 0 || (max_radius != 0 && max_radius < min_radius))
            throw ConfigError("generator config: min_radius/max_radius must be a valid range");
        if (max_radius != 0 && 2 * (max_radius + 2) >= image_size)
            throw ConfigError("generator config: max_radius too large for image_size");
    }

    std::string canonical_string() const {
        std::ostringstream os;
        os << "n_classes=" << n_classes << ";images_per_class=" << images_per_class
           << ";image_size=" << image_size << ";shapes_per_image=" << shapes_per_image
           << ";seed=" << seed << ";k_max=" << k_max << ";ignore_border=" << ignore_border
           << ";noise_level=" << noise_level << ";texture_period=" << texture_period
           << ";min_radius=" << min_radius << ";max_radius=" << max_radius
           << ";color_jitter=" << color_jitter;
        return os.str();
    }
};

struct DatasetItem {
    Tensor image; // (3, H, W), values quantized to 8-bit levels in [0, 1]
    SegmentationMask mask;
    int primary_class = 0;
    std::vector<ShapeSpec> shapes; // draw order, back to front
};

/// Immutable after generation or loading; safe for concurrent reads.
struct Dataset {
    std::vector<DatasetItem> items;
    std::set<int> class_ids;
    GeneratorConfig config;
    std::string config_hash;
    std::map<int, std::vector<int>> items_containing; // class id -> item indices

    int image_size() const { return config.image_size; }

    void rebuild_index() {
        items_containing.clear();
        class_ids.clear();
        for (std::size_t i = 0; i < items.size(); ++i) {
            std::set<int> present;
            for (std::int32_t v : items[i].mask.labels)
                if (v != kBackgroundLabel && v != kIgnoreLabel) present.insert(v);
            for (int c : present) {
                items_containing[c].push_back(static_cast<int>(i));
                class_ids.insert(c);
            }
        }
    }
};

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

namespace detail {

/// Index of the topmost shape covering (x, y), or -1 for background.
inline int shape_index_at(const std::vector<ShapeSpec>& shapes, int x, int y) {
    for (int i = static_cast<int>(shapes.size()); i-- > 0;)
        if (shape_contains(shapes[static_cast<std::size_t>(i)], x, y)) return i;
    return -1;
}

/// A labeled pixel becomes ignore when any 8-neighbor carries a different
/// label; background pixels are never turned into ignore.
inline SegmentationMask apply_ignore_border(const SegmentationMask& pure) {
    SegmentationMask out = pure;
    for (int y = 0; y < pure.height; ++y) {
        for (int x = 0; x < pure.width; ++x) {
            const std::int32_t v = pure.at(y, x);
            if (v == kBackgroundLabel) continue;
            bool boundary = false;
            for (int dy = -1; dy <= 1 && !boundary; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= pure.height || nx < 0 || nx >= pure.width) continue;
                    if (pure.at(ny, nx) != v) {
                        boundary = true;
                        break;
                    }
                }
            }
            if (boundary) out.at(y, x) = kIgnoreLabel;
        }
    }
    return out;
}

inline double quantize8(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return std::floor(v * 255.0 + 0.5) / 255.0;
}

inline DatasetItem generate_item(const GeneratorConfig& cfg, int primary_class, Rng rng) {
    const int sz = cfg.image_size;
    const int r_min = cfg.min_radius > 0 ? cfg.min_radius : std::max(4, sz / 8);
    const int r_max = cfg.max_radius > 0 ? std::min(cfg.max_radius, (sz - 4) / 2)
                                         : std::max(r_min + 1, sz / 4);

    DatasetItem item;
    item.primary_class = primary_class;

    // Distractors first, the primary shape last so it is never occluded.
    std::vector<Rgb> jitter;
    for (int s = 0; s < cfg.shapes_per_image; ++s) {
        const bool is_primary = (s == cfg.shapes_per_image - 1);
        int cls = primary_class;
        if (!is_primary) {
            cls = 1 + static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(cfg.n_classes)));
            if (cls == primary_class) cls = 1 + cls % cfg.n_classes;
        }
        ShapeSpec spec;
        spec.class_id = cls;
        spec.kind = class_shape(cls);
        spec.radius = static_cast<int>(rng.uniform_int(r_min, r_max));
        spec.cx = static_cast<int>(rng.uniform_int(spec.radius + 1, sz - 2 - spec.radius));
        spec.cy = static_cast<int>(rng.uniform_int(spec.radius + 1, sz - 2 - spec.radius));
        item.shapes.push_back(spec);
        jitter.push_back({rng.uniform_real(-cfg.color_jitter, cfg.color_jitter),
                          rng.uniform_real(-cfg.color_jitter, cfg.color_jitter),
                          rng.uniform_real(-cfg.color_jitter, cfg.color_jitter)});
    }

    // Background gradient between two random tints.
    const Rgb tint_a{rng.uniform_real(0.25, 0.75), rng.uniform_real(0.25, 0.75),
                     rng.uniform_real(0.25, 0.75)};
    const Rgb tint_b{rng.uniform_real(0.25, 0.75), rng.uniform_real(0.25, 0.75),
                     rng.uniform_real(0.25, 0.75)};
    const bool horizontal = rng.uniform_u64(2) == 0;

    SegmentationMask pure(sz, sz);
    item.image = Tensor({3, sz, sz});
    for (int y = 0; y < sz; ++y) {
        for (int x = 0; x < sz; ++x) {
            const int shape_idx = shape_index_at(item.shapes, x, y);
            const std::int32_t label =
                shape_idx < 0 ? kBackgroundLabel
                              : item.shapes[static_cast<std::size_t>(shape_idx)].class_id;
            pure.at(y, x) = label;
            Rgb color;
            if (label == kBackgroundLabel) {
                const double t = horizontal ? static_cast<double>(x) / (sz - 1)
                                            : static_cast<double>(y) / (sz - 1);
                color = {tint_a.r + t * (tint_b.r - tint_a.r), tint_a.g + t * (tint_b.g - tint_a.g),
                         tint_a.b + t * (tint_b.b - tint_a.b)};
            } else {
                color = texture_color(label, x, y, cfg.texture_period);
                const Rgb& j = jitter[static_cast<std::size_t>(shape_idx)];
                color = {color.r + j.r, color.g + j.g, color.b + j.b};
            }
            item.image.at(0, y, x) = quantize8(color.r + rng.uniform_real(-cfg.noise_level, cfg.noise_level));
            item.image.at(1, y, x) = quantize8(color.g + rng.uniform_real(-cfg.noise_level, cfg.noise_level));
            item.image.at(2, y, x) = quantize8(color.b + rng.uniform_real(-cfg.noise_level, cfg.noise_level));
        }
    }
    item.mask = cfg.ignore_border ? apply_ignore_border(pure) : pure;
    return item;
}

} // namespace detail

/// Deterministic synthetic dataset: each class is a (shape, texture) family;
/// every image carries one guaranteed instance of its primary class over a
/// cluttered background of labeled distractor shapes.
inline Dataset generate_shapes_dataset(const GeneratorConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.config_hash = fnv1a_hex(cfg.canonical_string());
    Rng base(cfg.seed);
    ds.items.reserve(static_cast<std::size_t>(cfg.n_classes) * cfg.images_per_class);
    for (int c = 1; c <= cfg.n_classes; ++c) {
        for (int j = 0; j < cfg.images_per_class; ++j) {
            const std::uint64_t stream =
                static_cast<std::uint64_t>(c) * 1000003ULL + static_cast<std::uint64_t>(j);
            ds.items.push_back(detail::generate_item(cfg, c, base.split(stream)));
            if (!ds.items.back().mask.contains(c))
                throw NumericError("generator: primary class eroded away, shape too small");
        }
    }
    ds.rebuild_index();
    return ds;
}

} // namespace iprnet
