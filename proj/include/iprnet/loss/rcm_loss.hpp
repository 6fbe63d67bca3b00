#pragma once

#include "iprnet/loss/losses.hpp"
#include "iprnet/model/rcm.hpp"

namespace iprnet {

struct RcmLossTerms {
    Var composite; // L_p
    Var fg;        // L_1
    Var bg;        // L_0
    Var final_;    // L_f
};

/// Composite classifier loss: the foreground head is supervised only on
/// target pixels, the background head only on background pixels, and the
/// fused head on everything non-ignored; the three are combined with
/// alpha/beta/gamma. In single-head mode the composite is just the fused
/// head's cross-entropy. `empty_selections` counts heads whose selection
/// vanished from the grid.
inline RcmLossTerms rcm_loss(const RcmOutputs& outs, const SegmentationMask& query_mask,
                             const LossWeights& weights, int* empty_selections = nullptr) {
    const int h = outs.final_.value().dim(1), w = outs.final_.value().dim(2);
    const SegmentationMask grid = (query_mask.height == h && query_mask.width == w)
                                      ? query_mask
                                      : nearest_resize(query_mask, h, w);
    bool empty_fg = false, empty_bg = false, empty_final = false;
    RcmLossTerms terms;
    if (outs.has_branches) {
        terms.fg = masked_cross_entropy(outs.fg, grid, 1, &empty_fg);
        terms.bg = masked_cross_entropy(outs.bg, grid, 0, &empty_bg);
        terms.final_ = cross_entropy_probs(outs.final_, grid, &empty_final);
        terms.composite = add(add(scale(terms.fg, weights.alpha), scale(terms.bg, weights.beta)),
                              scale(terms.final_, weights.gamma));
    } else {
        terms.fg = Var::scalar(0.0);
        terms.bg = Var::scalar(0.0);
        terms.final_ = cross_entropy_probs(outs.final_, grid, &empty_final);
        terms.composite = terms.final_;
    }
    if (empty_selections)
        *empty_selections += (empty_fg ? 1 : 0) + (empty_bg ? 1 : 0) + (empty_final ? 1 : 0);
    return terms;
}

} // namespace iprnet
