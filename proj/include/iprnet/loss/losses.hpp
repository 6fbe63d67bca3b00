#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "iprnet/core/autodiff.hpp"
#include "iprnet/data/mask.hpp"

namespace iprnet {

inline constexpr double kProbClamp = 1e-7;

/// Loss weighting: w1/w2/w3 combine the relation, multi-scale and classifier
/// losses; alpha/beta/gamma combine the classifier's three heads.
struct LossWeights {
    double w1 = 0.4;
    double w2 = 0.2;
    double w3 = 0.4;
    double alpha = 0.15;
    double beta = 0.15;
    double gamma = 0.7;

    void validate() const {
        if (w1 < 0 || w2 < 0 || w3 < 0 || alpha < 0 || beta < 0 || gamma < 0)
            throw ConfigError("loss weights: all coefficients must be nonnegative");
    }
};

struct LossBreakdown {
    double relation = 0.0;   // L_r
    double multiscale = 0.0; // L_m
    double head_fg = 0.0;    // L_1
    double head_bg = 0.0;    // L_0
    double head_final = 0.0; // L_f
    double classifier = 0.0; // L_p
    double total = 0.0;
};

/// Keep positions labeled c, turn everything else into ignore. Pre-existing
/// 255 stays 255.
inline SegmentationMask ignore_transform(const SegmentationMask& mask, int c) {
    if (c != 0 && c != 1)
        throw DomainError("ignore_transform: c must be 0 or 1, got " + std::to_string(c));
    SegmentationMask out(mask.height, mask.width);
    for (std::size_t i = 0; i < mask.labels.size(); ++i)
        out.labels[i] = (mask.labels[i] == c) ? c : kIgnoreLabel;
    return out;
}

namespace detail {

inline double clamp_prob(double v) {
    if (v < kProbClamp) return kProbClamp;
    if (v > 1.0) return 1.0;
    return v;
}

/// Mean of -log(V[channel(p), p]) over the selected positions; positions map
/// to (position, supervised channel) pairs. Gradient flows only into the
/// supervised entries, so the loss is bit-invariant to V elsewhere. The clamp
/// bounds the forward value only; the backward pass uses the raw probability
/// so a softmax feeding this loss keeps its (p - y) recovery gradient even
/// when a head saturates past the clamp.
inline Var selected_nll(const Var& V, const std::vector<std::pair<int, int>>& selection,
                        bool* empty_selection) {
    if (empty_selection) *empty_selection = false;
    if (selection.empty()) {
        if (empty_selection) *empty_selection = true;
        return Var::scalar(0.0);
    }
    const int h = V.value().dim(1), w = V.value().dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const double inv_n = 1.0 / static_cast<double>(selection.size());
    double acc = 0.0;
    for (const auto& [pos, ch] : selection) acc -= std::log(clamp_prob(V.value()[ch * plane + pos]));
    const double loss = acc * inv_n;
    if (!V.requires_grad()) return Var::scalar(loss);
    Var r = Var::op(Tensor::scalar(loss), {V});
    auto vn = V.node();
    detail::Node* rn = r.raw();
    r.set_backward([vn, rn, selection, inv_n, plane]() {
        const double g = rn->grad[0];
        Tensor& gv = vn->ensure_grad();
        for (const auto& [pos, ch] : selection) {
            const double v = vn->value[ch * plane + pos];
            if (v > 1.0) continue;
            gv[ch * plane + pos] += g * (-inv_n / std::max(v, 1e-30));
        }
    });
    return r;
}

} // namespace detail

/// Cross-entropy restricted to positions of class c: the mean negative log
/// likelihood of the head's positive channel (channel 1) over positions where
/// mask == c; everything else is ignored. Probabilities are clamped to
/// [1e-7, 1] before the log.
inline Var masked_cross_entropy(const Var& V, const SegmentationMask& mask, int c,
                                bool* empty_selection = nullptr) {
    if (V.value().ndim() != 3 || V.value().dim(0) != 2)
        throw ShapeError("masked_cross_entropy: expected V of shape (2,h,w)");
    const int h = V.value().dim(1), w = V.value().dim(2);
    if (mask.height != h || mask.width != w)
        throw ShapeError("masked_cross_entropy: mask " + std::to_string(mask.height) + "x" +
                         std::to_string(mask.width) + " does not match V " + std::to_string(h) +
                         "x" + std::to_string(w));
    const SegmentationMask selected = ignore_transform(mask, c);
    std::vector<std::pair<int, int>> selection;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (selected.at(y, x) != kIgnoreLabel) selection.emplace_back(y * w + x, 1);
    return detail::selected_nll(V, selection, empty_selection);
}

/// Standard two-class cross-entropy on probabilities; both classes supervised,
/// 255 ignored. The channel index equals the pixel label.
inline Var cross_entropy_probs(const Var& V, const SegmentationMask& mask,
                               bool* empty_selection = nullptr) {
    if (V.value().ndim() != 3 || V.value().dim(0) != 2)
        throw ShapeError("cross_entropy_probs: expected V of shape (2,h,w)");
    const int h = V.value().dim(1), w = V.value().dim(2);
    if (mask.height != h || mask.width != w)
        throw ShapeError("cross_entropy_probs: mask does not match V");
    std::vector<std::pair<int, int>> selection;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::int32_t m = mask.at(y, x);
            if (m == kIgnoreLabel) continue;
            if (m != 0 && m != 1)
                throw DomainError("cross_entropy_probs: mask must be binary, found label " +
                                  std::to_string(m));
            selection.emplace_back(y * w + x, static_cast<int>(m));
        }
    return detail::selected_nll(V, selection, empty_selection);
}

/// Numerically stable two-class cross-entropy on raw logits with ignore-255.
inline Var cross_entropy_logits(const Var& logits, const SegmentationMask& mask,
                                bool* empty_selection = nullptr) {
    if (empty_selection) *empty_selection = false;
    if (logits.value().ndim() != 3 || logits.value().dim(0) != 2)
        throw ShapeError("cross_entropy_logits: expected logits of shape (2,h,w)");
    const int h = logits.value().dim(1), w = logits.value().dim(2);
    if (mask.height != h || mask.width != w)
        throw ShapeError("cross_entropy_logits: mask does not match logits");
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    std::vector<std::pair<int, int>> selection;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::int32_t m = mask.at(y, x);
            if (m == kIgnoreLabel) continue;
            if (m != 0 && m != 1)
                throw DomainError("cross_entropy_logits: mask must be binary, found label " +
                                  std::to_string(m));
            selection.emplace_back(y * w + x, static_cast<int>(m));
        }
    if (selection.empty()) {
        if (empty_selection) *empty_selection = true;
        return Var::scalar(0.0);
    }
    const double inv_n = 1.0 / static_cast<double>(selection.size());
    double acc = 0.0;
    for (const auto& [pos, label] : selection) {
        const double l0 = logits.value()[pos];
        const double l1 = logits.value()[plane + pos];
        const double mx = std::max(l0, l1);
        const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
        acc -= (label == 0 ? l0 : l1) - lse;
    }
    const double loss = acc * inv_n;
    if (!logits.requires_grad()) return Var::scalar(loss);
    Var r = Var::op(Tensor::scalar(loss), {logits});
    auto ln = logits.node();
    detail::Node* rn = r.raw();
    r.set_backward([ln, rn, selection, inv_n, plane]() {
        const double g = rn->grad[0];
        Tensor& gl = ln->ensure_grad();
        for (const auto& [pos, label] : selection) {
            const double l0 = ln->value[pos];
            const double l1 = ln->value[plane + pos];
            const double mx = std::max(l0, l1);
            const double e0 = std::exp(l0 - mx), e1 = std::exp(l1 - mx);
            const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
            gl[pos] += g * inv_n * (p0 - (label == 0 ? 1.0 : 0.0));
            gl[plane + pos] += g * inv_n * (p1 - (label == 1 ? 1.0 : 0.0));
        }
    });
    return r;
}

/// Average over scales of the cross-entropy between each scale's logits and
/// the query mask downsampled (nearest, 255 preserved) to that scale.
inline Var multiscale_loss(const std::vector<Var>& per_scale_logits,
                           const SegmentationMask& query_mask) {
    if (per_scale_logits.empty()) throw DomainError("multiscale_loss: empty logit list");
    std::vector<Var> terms;
    terms.reserve(per_scale_logits.size());
    for (const auto& logits : per_scale_logits) {
        const int h = logits.value().dim(1), w = logits.value().dim(2);
        const SegmentationMask scaled = nearest_resize(query_mask, h, w);
        terms.push_back(cross_entropy_logits(logits, scaled));
    }
    return mean_scalars(terms);
}

/// Exact weighted sum of the three top-level terms.
inline Var total_loss(const Var& relation, const Var& multiscale, const Var& classifier,
                      const LossWeights& weights) {
    auto check = [](const Var& v, const char* name) {
        if (!std::isfinite(v.value().item()))
            throw NumericError(std::string("total_loss: non-finite ") + name);
    };
    check(relation, "relation term");
    check(multiscale, "multiscale term");
    check(classifier, "classifier term");
    return add(add(scale(relation, weights.w1), scale(multiscale, weights.w2)),
               scale(classifier, weights.w3));
}

} // namespace iprnet
