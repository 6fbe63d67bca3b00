#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "iprnet/model/decoder.hpp"
#include "iprnet/model/encoder.hpp"
#include "iprnet/model/rcm.hpp"
#include "iprnet/proto/prototypes.hpp"

namespace iprnet {

struct ModelConfig {
    EncoderConfig encoder;
    int proj_channels = 16;
    int mid_channels = 16;
    int head_channels = 16;
    int scales = 3;
    /// Branch heads present (respective classifier) vs a single fused head.
    bool rcm = true;
    /// Batch-wide multi-class prototype collection and relation loss vs
    /// conventional episode-local target/background pooling.
    bool iprm = true;

    void validate() const {
        if (proj_channels < 1) throw ConfigError("model config: proj_channels must be >= 1");
        if (mid_channels < 1) throw ConfigError("model config: mid_channels must be >= 1");
        if (head_channels < 1) throw ConfigError("model config: head_channels must be >= 1");
        if (scales < 1) throw ConfigError("model config: scales must be >= 1");
    }
};

/// Prototype-matching segmenter: a frozen feature encoder, a trainable linear
/// projection feeding prototypes and similarity maps, a multi-scale relation
/// decoder and the classifier heads.
class IprNet {
public:
    IprNet() = default;

    IprNet(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng(init_seed);
        encoder_ = Encoder(cfg.encoder, rng);
        proj_ = Conv2dLayer(cfg.encoder.out_channels(), cfg.proj_channels, 1, 1, 0, rng, true);
        const int decoder_in = 2 * cfg.proj_channels + 2;
        decoder_ = MultiScaleDecoder(decoder_in, cfg.mid_channels, cfg.scales, rng);
        rcm_ = RcmModule(cfg.mid_channels, cfg.head_channels, cfg.rcm, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    const Encoder& encoder() const { return encoder_; }

    /// Frozen two-stage features; deterministic given parameters.
    Tensor encode(const Tensor& image) const { return encoder_.encode(image); }

    /// Trainable projection from raw encoder features to the matching space.
    Var project(const Var& raw_features) const { return proj_(raw_features); }
    Var project(const Tensor& raw_features) const { return proj_(Var(raw_features)); }

    /// Full feature path for one image.
    Var features(const Tensor& image) const { return project(encoder_.forward(Var(image))); }

    DecoderOutput decode(const Var& support_mean, const Var& query_feat, const Var& sim_fg,
                         const Var& sim_bg) const {
        return decoder_.forward(support_mean, query_feat, sim_fg, sim_bg);
    }

    RcmOutputs classify(const Var& relation_feature, const Var& finest_logits) const {
        return rcm_.forward(relation_feature, finest_logits);
    }

    std::vector<ParamRef> params() const {
        std::vector<ParamRef> out;
        encoder_.collect(out);
        proj_.collect("proj", out);
        decoder_.collect(out);
        rcm_.collect(out);
        return out;
    }

    std::vector<ParamRef> trainable_params() const {
        std::vector<ParamRef> out;
        for (auto& p : params())
            if (p.trainable()) out.push_back(p);
        return out;
    }

    void zero_grads() const {
        for (auto& p : params()) p.var.zero_grad();
    }

private:
    ModelConfig cfg_;
    Encoder encoder_;
    Conv2dLayer proj_;
    MultiScaleDecoder decoder_;
    RcmModule rcm_;
};

struct EpisodePrototypes {
    Prototype target;
    Prototype background;
};

/// Episode-local prototypes from the support set. With
/// multiclass_background, the background prototype pools class-0 pixels only
/// (falling back to the non-target complement if none survive the grid);
/// otherwise it pools the full non-target complement, the conventional
/// binarized reading. Returns nullopt when the target class vanished from
/// every support grid.
inline std::optional<EpisodePrototypes> make_episode_prototypes(
    const std::vector<Var>& support_feats, const std::vector<SegmentationMask>& support_masks,
    int target_class, bool multiclass_background) {
    std::vector<SegmentationMask> binarized;
    binarized.reserve(support_masks.size());
    for (const auto& m : support_masks) binarized.push_back(binarize_to_target(m, target_class));

    const PrototypeSet bin_set = collect_batch_prototypes(support_feats, binarized);
    if (!bin_set.has(1)) return std::nullopt;

    EpisodePrototypes out;
    out.target = bin_set.at(1);
    out.target.class_id = target_class;

    if (multiclass_background) {
        const PrototypeSet full_set = collect_batch_prototypes(support_feats, support_masks);
        if (full_set.has(kBackgroundLabel)) {
            out.background = full_set.at(kBackgroundLabel);
            return out;
        }
    }
    if (!bin_set.has(0)) return std::nullopt;
    out.background = bin_set.at(0);
    out.background.class_id = kBackgroundLabel;
    return out;
}

struct EpisodeForward {
    DecoderOutput decoder_out;
    RcmOutputs rcm_out;
};

/// Shared forward path: similarity maps against the target and background
/// prototypes, shot-averaged support features, decoder, classifier.
inline EpisodeForward forward_episode(const IprNet& model, const std::vector<Var>& support_feats,
                                      const Var& query_feat, const Prototype& target_proto,
                                      const Prototype& background_proto) {
    const Var sim_fg = similarity_map(target_proto, query_feat);
    const Var sim_bg = similarity_map(background_proto, query_feat);
    Var support_mean = support_feats[0];
    for (std::size_t i = 1; i < support_feats.size(); ++i)
        support_mean = add(support_mean, support_feats[i]);
    support_mean = scale(support_mean, 1.0 / static_cast<double>(support_feats.size()));
    EpisodeForward out;
    out.decoder_out = model.decode(support_mean, query_feat, sim_fg, sim_bg);
    out.rcm_out =
        model.classify(out.decoder_out.relation_feature, out.decoder_out.scale_logits[0]);
    return out;
}

} // namespace iprnet
