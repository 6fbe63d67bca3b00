#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "iprnet/core/autodiff.hpp"
#include "iprnet/data/mask.hpp"

namespace iprnet {

inline constexpr double kNormEps = 1e-8;

/// Per-class feature vector pooled from a masked region.
struct Prototype {
    Var vector; // (C,)
    int class_id = 0;
    std::int64_t pixel_count = 0;
};

/// One prototype per class id present; background (0) is a class like any
/// other, ignore (255) never appears.
struct PrototypeSet {
    std::map<int, Prototype> by_class;

    bool has(int class_id) const { return by_class.count(class_id) > 0; }
    const Prototype& at(int class_id) const { return by_class.at(class_id); }
    std::size_t size() const { return by_class.size(); }
};

/// Masked average pooling: the mean feature column over positions labeled
/// class_id. The mask is aligned to the feature grid by nearest-neighbor
/// downsampling; 255 positions never contribute to any class.
inline Prototype masked_average_pool(const Var& feature, const SegmentationMask& mask,
                                     int class_id) {
    if (feature.value().ndim() != 3) throw ShapeError("masked_average_pool: expected (C,h,w)");
    const int c_n = feature.value().dim(0);
    const int h = feature.value().dim(1), w = feature.value().dim(2);
    const SegmentationMask grid =
        (mask.height == h && mask.width == w) ? mask : nearest_resize(mask, h, w);

    std::vector<int> positions;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (grid.at(y, x) == class_id) positions.push_back(y * w + x);
    if (positions.empty())
        throw EmptyRegionError("masked_average_pool: class " + std::to_string(class_id) +
                               " has no pixels on the " + std::to_string(h) + "x" +
                               std::to_string(w) + " grid");

    const double inv_n = 1.0 / static_cast<double>(positions.size());
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor vec({c_n});
    for (int c = 0; c < c_n; ++c) {
        double acc = 0.0;
        for (int p : positions) acc += feature.value()[c * plane + p];
        vec[c] = acc * inv_n;
    }

    Prototype proto;
    proto.class_id = class_id;
    proto.pixel_count = static_cast<std::int64_t>(positions.size());
    if (!feature.requires_grad()) {
        proto.vector = Var(std::move(vec));
        return proto;
    }
    Var r = Var::op(std::move(vec), {feature});
    auto fn = feature.node();
    detail::Node* rn = r.raw();
    r.set_backward([fn, rn, positions, inv_n, plane, c_n]() {
        const Tensor& g = rn->grad;
        Tensor& gf = fn->ensure_grad();
        for (int c = 0; c < c_n; ++c) {
            const double gv = g[c] * inv_n;
            for (int p : positions) gf[c * plane + p] += gv;
        }
    });
    proto.vector = r;
    return proto;
}

/// Per-image prototypes for every class present on the feature grid
/// (background included, ignore excluded). Absent classes are skipped.
inline std::vector<Prototype> collect_image_prototypes(const std::vector<Var>& features,
                                                       const std::vector<SegmentationMask>& masks) {
    if (features.empty() || features.size() != masks.size())
        throw ShapeError("collect_image_prototypes: feature/mask lists must be aligned and nonempty");
    std::vector<Prototype> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const int h = features[i].value().dim(1), w = features[i].value().dim(2);
        const SegmentationMask grid = nearest_resize(masks[i], h, w);
        std::set<int> present;
        for (std::int32_t v : grid.labels)
            if (v != kIgnoreLabel) present.insert(v);
        for (int c : present) out.push_back(masked_average_pool(features[i], grid, c));
    }
    return out;
}

/// Merge same-class prototypes by pixel-count-weighted average; equivalent to
/// pooling over the concatenated regions.
inline PrototypeSet merge_prototypes(const std::vector<Prototype>& per_image) {
    std::map<int, std::vector<const Prototype*>> grouped;
    for (const auto& p : per_image) grouped[p.class_id].push_back(&p);
    PrototypeSet set;
    for (const auto& [cls, group] : grouped) {
        std::int64_t total = 0;
        for (const auto* p : group) total += p->pixel_count;
        Var acc = scale(group[0]->vector, static_cast<double>(group[0]->pixel_count));
        for (std::size_t i = 1; i < group.size(); ++i)
            acc = add(acc, scale(group[i]->vector, static_cast<double>(group[i]->pixel_count)));
        Prototype merged;
        merged.class_id = cls;
        merged.pixel_count = total;
        merged.vector = scale(acc, 1.0 / static_cast<double>(total));
        set.by_class[cls] = merged;
    }
    return set;
}

inline PrototypeSet collect_batch_prototypes(const std::vector<Var>& features,
                                             const std::vector<SegmentationMask>& masks) {
    return merge_prototypes(collect_image_prototypes(features, masks));
}

/// Cosine similarity of two vectors, clamped to [-1, 1] against rounding.
inline Var cosine_similarity(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "cosine_similarity");
    const std::int64_t n = a.value().numel();
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        dot += a.value()[i] * b.value()[i];
        na2 += a.value()[i] * a.value()[i];
        nb2 += b.value()[i] * b.value()[i];
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    if (na < kNormEps || nb < kNormEps)
        throw DegenerateVectorError("cosine_similarity: vector norm below " +
                                    std::to_string(kNormEps));
    double c = dot / (na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    if (!a.requires_grad() && !b.requires_grad()) return Var::scalar(c);
    Var r = Var::op(Tensor::scalar(c), {a, b});
    auto an = a.node(), bn = b.node();
    detail::Node* rn = r.raw();
    const double cos_raw = dot / (na * nb);
    r.set_backward([an, bn, rn, na, nb, cos_raw, n]() {
        const double g = rn->grad[0];
        if (an->requires_grad) {
            Tensor& ga = an->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i)
                ga[i] += g * (bn->value[i] / (na * nb) - cos_raw * an->value[i] / (na * na));
        }
        if (bn->requires_grad) {
            Tensor& gb = bn->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i)
                gb[i] += g * (an->value[i] / (na * nb) - cos_raw * bn->value[i] / (nb * nb));
        }
    });
    return r;
}

/// Mean pairwise cosine similarity between prototypes of distinct classes.
/// Ordered and unordered pair means coincide because Sim is symmetric. With
/// fewer than two prototypes the loss is 0 and `few_classes` is raised.
inline Var relation_loss(const PrototypeSet& protos, bool* few_classes = nullptr) {
    if (few_classes) *few_classes = false;
    const std::size_t m = protos.size();
    if (m < 2) {
        if (few_classes) *few_classes = true;
        return Var::scalar(0.0);
    }
    std::vector<const Prototype*> list;
    list.reserve(m);
    for (const auto& [cls, p] : protos.by_class) list.push_back(&p);
    Var acc = Var::scalar(0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            acc = add(acc, cosine_similarity(list[i]->vector, list[j]->vector));
    return scale(acc, 2.0 / static_cast<double>(m * (m - 1)));
}

/// Variant that keeps each image's prototype as its own node; pairs are still
/// indexed by class, so same-class prototypes from different images never
/// count as a pair.
inline Var relation_loss_per_image(const std::vector<Prototype>& per_image,
                                   bool* few_classes = nullptr) {
    if (few_classes) *few_classes = false;
    std::set<int> classes;
    for (const auto& p : per_image) classes.insert(p.class_id);
    if (classes.size() < 2) {
        if (few_classes) *few_classes = true;
        return Var::scalar(0.0);
    }
    Var acc = Var::scalar(0.0);
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < per_image.size(); ++i) {
        for (std::size_t j = i + 1; j < per_image.size(); ++j) {
            if (per_image[i].class_id == per_image[j].class_id) continue;
            acc = add(acc, cosine_similarity(per_image[i].vector, per_image[j].vector));
            ++pairs;
        }
    }
    if (pairs == 0) {
        if (few_classes) *few_classes = true;
        return Var::scalar(0.0);
    }
    return scale(acc, 1.0 / static_cast<double>(pairs));
}

/// Per-position cosine similarity between a prototype and the query feature
/// columns. Zero-norm columns map to 0 (and receive no gradient).
inline Var similarity_map(const Prototype& proto, const Var& query_feat) {
    if (query_feat.value().ndim() != 3) throw ShapeError("similarity_map: expected (C,h,w)");
    const int c_n = query_feat.value().dim(0);
    if (proto.vector.value().numel() != c_n)
        throw ShapeError("similarity_map: prototype dim " +
                         std::to_string(proto.vector.value().numel()) +
                         " does not match feature channels " + std::to_string(c_n));
    const int h = query_feat.value().dim(1), w = query_feat.value().dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    const Tensor& pv = proto.vector.value();
    double np2 = 0.0;
    for (int c = 0; c < c_n; ++c) np2 += pv[c] * pv[c];
    const double np = std::sqrt(np2);

    Tensor out({h, w});
    std::vector<double> col_norms(static_cast<std::size_t>(plane), 0.0);
    if (np >= kNormEps) {
        const Tensor& fv = query_feat.value();
        for (std::int64_t p = 0; p < plane; ++p) {
            double dot = 0.0, nf2 = 0.0;
            for (int c = 0; c < c_n; ++c) {
                const double f = fv[c * plane + p];
                dot += pv[c] * f;
                nf2 += f * f;
            }
            const double nf = std::sqrt(nf2);
            col_norms[static_cast<std::size_t>(p)] = nf;
            if (nf < kNormEps) continue;
            double cval = dot / (np * nf);
            if (cval > 1.0) cval = 1.0;
            if (cval < -1.0) cval = -1.0;
            out[p] = cval;
        }
    }

    const bool needs_grad = proto.vector.requires_grad() || query_feat.requires_grad();
    if (!needs_grad || np < kNormEps) return Var(std::move(out));

    Var r = Var::op(std::move(out), {proto.vector, query_feat});
    auto pn = proto.vector.node(), fn = query_feat.node();
    detail::Node* rn = r.raw();
    r.set_backward([pn, fn, rn, col_norms, np, plane, c_n]() {
        const Tensor& g = rn->grad;
        const Tensor& s = rn->value;
        const Tensor& pv = pn->value;
        const Tensor& fv = fn->value;
        for (std::int64_t p = 0; p < plane; ++p) {
            const double nf = col_norms[static_cast<std::size_t>(p)];
            if (nf < kNormEps || g[p] == 0.0) continue;
            const double gp = g[p];
            const double sv = s[p];
            if (pn->requires_grad) {
                Tensor& gproto = pn->ensure_grad();
                for (int c = 0; c < c_n; ++c)
                    gproto[c] += gp * (fv[c * plane + p] / (np * nf) - sv * pv[c] / (np * np));
            }
            if (fn->requires_grad) {
                Tensor& gf = fn->ensure_grad();
                for (int c = 0; c < c_n; ++c)
                    gf[c * plane + p] += gp * (pv[c] / (np * nf) - sv * fv[c * plane + p] / (nf * nf));
            }
        }
    });
    return r;
}

} // namespace iprnet
