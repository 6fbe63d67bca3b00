#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "iprnet/data/episode.hpp"
#include "iprnet/io/checkpoint.hpp"
#include "iprnet/io/config_file.hpp"
#include "iprnet/model/model.hpp"

namespace iprnet {

struct IoUReport {
    std::map<int, double> per_class;
    double mean_iou = 0.0;
    int episode_count = 0;
    int split_index = -1;
    int skipped_episodes = 0;
};

/// Intersection-over-union of binary masks, counting only positions where the
/// ground truth is not 255. An empty union is reported as 1 (both masks
/// empty) with the diagnostic raised.
inline double binary_iou(const SegmentationMask& pred, const SegmentationMask& gt,
                         int positive = 1, bool* empty_union = nullptr) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("binary_iou: prediction and ground truth differ in size");
    if (empty_union) *empty_union = false;
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
        if (gt.labels[i] == kIgnoreLabel) continue;
        const bool p = pred.labels[i] == positive;
        const bool g = gt.labels[i] == positive;
        if (p && g) ++inter;
        if (p || g) ++uni;
    }
    if (uni == 0) {
        if (empty_union) *empty_union = true;
        return 1.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Benchmark-style accumulation: per-class intersections and unions are
/// summed across episodes and divided once at the end.
struct IoUAccumulator {
    std::map<int, std::int64_t> inter, uni;
    int episodes = 0;
    int skipped = 0;

    void add(int class_id, const SegmentationMask& pred, const SegmentationMask& gt) {
        if (pred.height != gt.height || pred.width != gt.width)
            throw ShapeError("IoUAccumulator: prediction and ground truth differ in size");
        for (std::size_t i = 0; i < gt.labels.size(); ++i) {
            if (gt.labels[i] == kIgnoreLabel) continue;
            const bool p = pred.labels[i] == 1;
            const bool g = gt.labels[i] == 1;
            if (p && g) ++inter[class_id];
            if (p || g) ++uni[class_id];
        }
        if (!uni.count(class_id)) uni[class_id] = 0;
        ++episodes;
    }

    IoUReport report(int split_index = -1) const {
        IoUReport r;
        r.split_index = split_index;
        r.episode_count = episodes;
        r.skipped_episodes = skipped;
        double sum = 0.0;
        for (const auto& [cls, u] : uni) {
            const auto it = inter.find(cls);
            const std::int64_t in = it == inter.end() ? 0 : it->second;
            const double iou = u == 0 ? 1.0 : static_cast<double>(in) / static_cast<double>(u);
            r.per_class[cls] = iou;
            sum += iou;
        }
        r.mean_iou = uni.empty() ? 0.0 : sum / static_cast<double>(uni.size());
        return r;
    }
};

/// Binary prediction for one episode at full image resolution: argmax channel
/// of the final head, upsampled nearest. nullopt when the target class
/// vanished from every support grid.
inline std::optional<SegmentationMask> predict_episode(const IprNet& model, const Episode& ep) {
    std::vector<Var> support_feats;
    std::vector<SegmentationMask> support_masks;
    for (const auto& [img, msk] : ep.supports) {
        support_feats.push_back(model.features(img));
        support_masks.push_back(msk);
    }
    const auto protos = make_episode_prototypes(support_feats, support_masks, ep.target_class,
                                                model.config().iprm);
    if (!protos) return std::nullopt;
    const Var query_feat = model.features(ep.query_image);
    const EpisodeForward fwd =
        forward_episode(model, support_feats, query_feat, protos->target, protos->background);
    const Tensor& vf = fwd.rcm_out.final_.value();
    const int h = vf.dim(1), w = vf.dim(2);
    SegmentationMask grid_pred(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) grid_pred.at(y, x) = vf.at(1, y, x) > vf.at(0, y, x) ? 1 : 0;
    return nearest_resize(grid_pred, ep.query_image.dim(1), ep.query_image.dim(2));
}

/// Episodic evaluation: per-class intersections and unions are accumulated
/// across episodes and divided at the end. Deterministic given the seed; the
/// model is never modified.
inline IoUReport evaluate_model(const IprNet& model, const Dataset& ds,
                                const std::set<int>& classes, int k, int n_episodes,
                                std::uint64_t seed, int split_index = -1) {
    if (classes.empty()) throw DomainError("evaluate: empty class set");
    Rng rng(seed);
    std::map<int, Tensor> raw_cache;

    auto cached_features = [&](int item, const Tensor& image) {
        if (item < 0) return model.project(model.encode(image));
        auto it = raw_cache.find(item);
        if (it == raw_cache.end()) it = raw_cache.emplace(item, model.encode(image)).first;
        return model.project(it->second);
    };

    IoUAccumulator acc;
    for (int e = 0; e < n_episodes; ++e) {
        const Episode ep = sample_episode(ds, classes, k, rng);

        std::vector<Var> support_feats;
        std::vector<SegmentationMask> support_masks;
        for (std::size_t i = 0; i < ep.supports.size(); ++i) {
            support_feats.push_back(cached_features(ep.support_items[i], ep.supports[i].first));
            support_masks.push_back(ep.supports[i].second);
        }
        const auto protos = make_episode_prototypes(support_feats, support_masks, ep.target_class,
                                                    model.config().iprm);
        if (!protos) {
            ++acc.skipped;
            continue;
        }
        const Var query_feat = cached_features(ep.query_item, ep.query_image);
        const EpisodeForward fwd =
            forward_episode(model, support_feats, query_feat, protos->target, protos->background);
        const Tensor& vf = fwd.rcm_out.final_.value();
        const int h = vf.dim(1), w = vf.dim(2);
        SegmentationMask grid_pred(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) grid_pred.at(y, x) = vf.at(1, y, x) > vf.at(0, y, x) ? 1 : 0;
        acc.add(ep.target_class,
                nearest_resize(grid_pred, ep.query_image.dim(1), ep.query_image.dim(2)),
                ep.query_mask);
    }
    return acc.report(split_index);
}

/// Rebuild a model from a checkpoint's config echo and parameter blobs.
inline IprNet model_from_checkpoint(const Checkpoint& ckpt) {
    const TrainConfig cfg = train_config_from_json(ckpt.header.at("config"));
    IprNet model(cfg.model, cfg.seed);
    restore_params(model.params(), ckpt);
    return model;
}

/// Checkpoint-level evaluation; refuses class sets overlapping the recorded
/// training classes.
inline IoUReport evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& ds,
                                     const std::set<int>& test_classes, int k, int n_episodes,
                                     std::uint64_t seed, int split_index = -1) {
    const std::set<int> trained_on = ckpt.train_classes();
    for (int c : test_classes)
        if (trained_on.count(c))
            throw ConfigError("evaluate: class " + std::to_string(c) +
                              " was part of this checkpoint's training split; refusing to "
                              "evaluate train classes as test classes");
    const IprNet model = model_from_checkpoint(ckpt);
    return evaluate_model(model, ds, test_classes, k, n_episodes, seed, split_index);
}

inline nlohmann::json iou_report_to_json(const IoUReport& r) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [cls, iou] : r.per_class) per_class[std::to_string(cls)] = iou;
    return nlohmann::json{{"per_class", per_class},
                          {"mean_iou", r.mean_iou},
                          {"episode_count", r.episode_count},
                          {"split_index", r.split_index},
                          {"skipped_episodes", r.skipped_episodes}};
}

/// Mean pairwise interclass cosine similarity of per-class mean query
/// prototypes, extracted with ground-truth masks. Lower means better
/// separated. Optionally exports one CSV row per prototype.
inline double prototype_separation(const IprNet& model, const Dataset& ds,
                                   const std::set<int>& classes, int n_episodes,
                                   std::uint64_t seed, const std::string& csv_path = "") {
    if (classes.size() < 2)
        throw DomainError("prototype_separation: need at least 2 classes");
    Rng rng(seed);
    std::map<int, std::vector<Tensor>> per_class;
    std::map<int, Tensor> raw_cache;

    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path);
        if (!csv) throw IoError("prototype_separation: cannot write " + csv_path);
        csv.precision(17); // round-trippable doubles
    }
    bool csv_header_written = false;

    for (int e = 0; e < n_episodes; ++e) {
        const Episode ep = sample_episode(ds, classes, 1, rng);
        auto it = raw_cache.find(ep.query_item);
        if (it == raw_cache.end())
            it = raw_cache.emplace(ep.query_item, model.encode(ep.query_image)).first;
        const Var feat = model.project(it->second);
        Prototype proto;
        try {
            proto = masked_average_pool(feat, ep.query_mask, 1);
        } catch (const EmptyRegionError&) {
            continue; // target vanished from the query grid; skip
        }
        per_class[ep.target_class].push_back(proto.vector.value());
        if (csv.is_open()) {
            if (!csv_header_written) {
                csv << "episode_id,class_id,pixel_count";
                for (std::int64_t c = 0; c < proto.vector.value().numel(); ++c) csv << ",v" << c;
                csv << "\n";
                csv_header_written = true;
            }
            csv << e << "," << ep.target_class << "," << proto.pixel_count;
            for (std::int64_t c = 0; c < proto.vector.value().numel(); ++c)
                csv << "," << proto.vector.value()[c];
            csv << "\n";
        }
    }
    if (per_class.size() < 2)
        throw DomainError("prototype_separation: fewer than 2 classes yielded prototypes");

    PrototypeSet means;
    for (const auto& [cls, protos] : per_class) {
        Tensor mean(protos[0].shape());
        for (const auto& p : protos)
            for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] += p[i];
        for (std::int64_t i = 0; i < mean.numel(); ++i)
            mean[i] /= static_cast<double>(protos.size());
        Prototype proto;
        proto.class_id = cls;
        proto.pixel_count = static_cast<std::int64_t>(protos.size());
        proto.vector = Var(std::move(mean));
        means.by_class[cls] = proto;
    }
    return relation_loss(means).value().item();
}

} // namespace iprnet
