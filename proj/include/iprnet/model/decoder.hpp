#pragma once

#include <string>
#include <vector>

#include "iprnet/core/nn.hpp"

namespace iprnet {

/// Lift a (h, w) map to (1, h, w) so it can join a channel concatenation.
inline Var as_single_channel(const Var& x) {
    if (x.value().ndim() != 2) throw ShapeError("as_single_channel: expected (h,w)");
    const int h = x.value().dim(0), w = x.value().dim(1);
    Tensor out({1, h, w});
    for (std::int64_t i = 0; i < x.value().numel(); ++i) out[i] = x.value()[i];
    if (!x.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {x});
    auto xn = x.node();
    detail::Node* rn = r.raw();
    r.set_backward([xn, rn]() {
        Tensor& gx = xn->ensure_grad();
        const std::int64_t n = gx.numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += rn->grad[i];
    });
    return r;
}

struct DecoderOutput {
    Var relation_feature;        // (mid_channels, h, w)
    std::vector<Var> scale_logits; // finest first: (2, h), (2, h/2), ...
};

/// Multi-scale relation decoder. The concatenated input (support feature,
/// query feature, two similarity maps) is pooled to a pyramid of scales; the
/// pyramid is merged coarse-to-fine, every finer scale receiving the
/// upsampled coarser merge. Each scale emits 2-channel logits; all merged
/// scales are fused back at full resolution into the relation feature.
class MultiScaleDecoder {
public:
    MultiScaleDecoder() = default;

    MultiScaleDecoder(int in_channels, int mid_channels, int scales, Rng& rng)
        : scales_(scales), mid_channels_(mid_channels) {
        if (scales < 1) throw ConfigError("decoder: scales must be >= 1");
        for (int s = 0; s < scales; ++s) {
            const bool coarsest = (s == scales - 1);
            const int cin = in_channels + (coarsest ? 0 : mid_channels);
            merge_.emplace_back(cin, mid_channels, 3, 1, 1, rng, true);
            cls_.emplace_back(mid_channels, 2, 1, 1, 0, rng, true);
        }
        fuse_ = Conv2dLayer(mid_channels * scales, mid_channels, 1, 1, 0, rng, true);
    }

    int scales() const { return scales_; }

    DecoderOutput forward(const Var& support_feat, const Var& query_feat, const Var& sim_fg,
                          const Var& sim_bg) const {
        const int h = query_feat.value().dim(1), w = query_feat.value().dim(2);
        auto check = [&](const Var& v, int expect_dims, const char* name) {
            const int hh = v.value().dim(expect_dims == 3 ? 1 : 0);
            const int ww = v.value().dim(expect_dims == 3 ? 2 : 1);
            if (v.value().ndim() != expect_dims || hh != h || ww != w)
                throw ShapeError(std::string("decoder: ") + name + " must be spatially " +
                                 std::to_string(h) + "x" + std::to_string(w));
        };
        check(support_feat, 3, "support feature");
        check(sim_fg, 2, "foreground similarity map");
        check(sim_bg, 2, "background similarity map");

        const Var input = concat_channels(
            {support_feat, query_feat, as_single_channel(sim_fg), as_single_channel(sim_bg)});

        std::vector<Var> merged(static_cast<std::size_t>(scales_));
        std::vector<Var> logits(static_cast<std::size_t>(scales_));
        for (int s = scales_ - 1; s >= 0; --s) {
            const int hs = std::max(1, h >> s), ws = std::max(1, w >> s);
            Var x = avg_pool_to(input, hs, ws);
            if (s < scales_ - 1)
                x = concat_channels({x, upsample_nearest(merged[static_cast<std::size_t>(s + 1)], hs, ws)});
            merged[static_cast<std::size_t>(s)] = relu(merge_[static_cast<std::size_t>(s)](x));
            logits[static_cast<std::size_t>(s)] = cls_[static_cast<std::size_t>(s)](
                merged[static_cast<std::size_t>(s)]);
        }

        std::vector<Var> up;
        up.reserve(static_cast<std::size_t>(scales_));
        for (int s = 0; s < scales_; ++s)
            up.push_back(s == 0 ? merged[0]
                                : upsample_nearest(merged[static_cast<std::size_t>(s)], h, w));
        DecoderOutput out;
        out.relation_feature = relu(fuse_(concat_channels(up)));
        out.scale_logits = std::move(logits);
        return out;
    }

    void collect(std::vector<ParamRef>& out) const {
        for (int s = 0; s < scales_; ++s) {
            merge_[static_cast<std::size_t>(s)].collect("decoder.scale" + std::to_string(s) + ".merge", out);
            cls_[static_cast<std::size_t>(s)].collect("decoder.scale" + std::to_string(s) + ".cls", out);
        }
        fuse_.collect("decoder.fuse", out);
    }

private:
    int scales_ = 0;
    int mid_channels_ = 0;
    std::vector<Conv2dLayer> merge_;
    std::vector<Conv2dLayer> cls_;
    Conv2dLayer fuse_;
};

} // namespace iprnet
