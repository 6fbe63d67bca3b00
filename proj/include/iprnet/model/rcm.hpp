#pragma once

#include <vector>

#include "iprnet/core/nn.hpp"

namespace iprnet {

/// Softmax probability maps of the classifier heads; channel 1 is the
/// positive class of each head. When the module is ablated away, `final_`
/// holds the softmax of the decoder's own finest-scale logits and the branch
/// maps are undefined.
struct RcmOutputs {
    Var fg;     // V1: single-object probability of the target class
    Var bg;     // V0: background-only probability
    Var final_; // Vf: fused final estimate
    bool has_branches = true;
};

/// Respective classifier: independent foreground and background branches,
/// re-fused with the relation feature into the final prediction. Each head is
/// a 3x3 convolution, a pointwise nonlinearity, a 1x1 convolution and a
/// softmax.
class RcmModule {
public:
    RcmModule() = default;

    RcmModule(int in_channels, int head_channels, bool branches, Rng& rng)
        : branches_(branches) {
        if (!branches_) return; // ablated: the decoder output is the prediction
        fg1_ = Conv2dLayer(in_channels, head_channels, 3, 1, 1, rng, true);
        fg2_ = Conv2dLayer(head_channels, 2, 1, 1, 0, rng, true);
        bg1_ = Conv2dLayer(in_channels, head_channels, 3, 1, 1, rng, true);
        bg2_ = Conv2dLayer(head_channels, 2, 1, 1, 0, rng, true);
        fuse1_ = Conv2dLayer(in_channels + 4, head_channels, 3, 1, 1, rng, true);
        fuse2_ = Conv2dLayer(head_channels, 2, 1, 1, 0, rng, true);
    }

    bool has_branches() const { return branches_; }

    /// With branches off, the finest-scale decoder logits stand in as the
    /// final estimate.
    RcmOutputs forward(const Var& relation_feature, const Var& finest_logits) const {
        RcmOutputs out;
        out.has_branches = branches_;
        if (branches_) {
            out.fg = softmax_channels(fg2_(relu(fg1_(relation_feature))));
            out.bg = softmax_channels(bg2_(relu(bg1_(relation_feature))));
            const Var fused_in = concat_channels({out.fg, out.bg, relation_feature});
            out.final_ = softmax_channels(fuse2_(relu(fuse1_(fused_in))));
        } else {
            out.final_ = softmax_channels(finest_logits);
        }
        return out;
    }

    void collect(std::vector<ParamRef>& out) const {
        if (!branches_) return;
        fg1_.collect("rcm.fg.conv1", out);
        fg2_.collect("rcm.fg.conv2", out);
        bg1_.collect("rcm.bg.conv1", out);
        bg2_.collect("rcm.bg.conv2", out);
        fuse1_.collect("rcm.fuse.conv1", out);
        fuse2_.collect("rcm.fuse.conv2", out);
    }

private:
    bool branches_ = true;
    Conv2dLayer fg1_, fg2_;
    Conv2dLayer bg1_, bg2_;
    Conv2dLayer fuse1_, fuse2_;
};

} // namespace iprnet
