#pragma once

#include <string>
#include <vector>

#include "iprnet/core/nn.hpp"

namespace iprnet {

/// Two convolutional stages whose outputs are pooled to a common grid and
/// concatenated along channels. Frozen by default: the stages act as a fixed
/// random feature extractor and receive no gradient updates.
struct EncoderConfig {
    int stage1_channels = 32;
    int stage2_channels = 64;
    int stage1_stride = 2;
    int stage2_stride = 2;
    int kernel = 3;
    bool frozen = true;

    int out_channels() const { return stage1_channels + stage2_channels; }
    int total_downsample() const { return stage1_stride * stage2_stride; }
};

class Encoder {
public:
    Encoder() = default;

    Encoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
        conv1_ = Conv2dLayer(3, cfg.stage1_channels, cfg.kernel, cfg.stage1_stride,
                             cfg.kernel / 2, rng, !cfg.frozen);
        conv2_ = Conv2dLayer(cfg.stage1_channels, cfg.stage2_channels, cfg.kernel,
                             cfg.stage2_stride, cfg.kernel / 2, rng, !cfg.frozen);
    }

    const EncoderConfig& config() const { return cfg_; }

    /// (3, H, W) -> (stage1_channels + stage2_channels, H/d, W/d). Inputs are
    /// mean-centered (pixel values are in [0, 1]) so downstream cosine
    /// matching is not dominated by the common brightness component.
    Var forward(const Var& image) const {
        if (image.value().ndim() != 3 || image.value().dim(0) != 3)
            throw ShapeError("encoder: expected image of shape (3,H,W)");
        const int h = image.value().dim(1), w = image.value().dim(2);
        const int d = cfg_.total_downsample();
        if (h % d != 0 || w % d != 0)
            throw ShapeError("encoder: image dims " + std::to_string(h) + "x" + std::to_string(w) +
                             " must be multiples of the total downsample " + std::to_string(d));
        Var s1 = relu(conv1_(add_scalar(image, -0.5)));
        Var s2 = relu(conv2_(s1));
        const int ho = s2.value().dim(1), wo = s2.value().dim(2);
        return concat_channels({avg_pool_to(s1, ho, wo), s2});
    }

    Tensor encode(const Tensor& image) const { return forward(Var(image)).value(); }

    void collect(std::vector<ParamRef>& out) const {
        conv1_.collect("encoder.stage1", out);
        conv2_.collect("encoder.stage2", out);
    }

private:
    EncoderConfig cfg_;
    Conv2dLayer conv1_;
    Conv2dLayer conv2_;
};

} // namespace iprnet
