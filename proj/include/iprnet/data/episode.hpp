#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "iprnet/data/dataset.hpp"

namespace iprnet {

/// Contiguous class folds for cross-validated evaluation.
struct SplitSpec {
    std::vector<int> all_classes; // ordered
    int n_splits = 4;
    int split_index = 0;
};

struct ClassSplit {
    std::set<int> train_classes;
    std::set<int> test_classes;
};

/// The split_index-th contiguous fold becomes the test pool; the rest train.
inline ClassSplit make_splits(const SplitSpec& spec) {
    const int n = static_cast<int>(spec.all_classes.size());
    if (spec.n_splits <= 0) throw ConfigError("split spec: n_splits must be positive");
    if (n % spec.n_splits != 0)
        throw ConfigError("split spec: class count " + std::to_string(n) +
                          " is not divisible by n_splits " + std::to_string(spec.n_splits));
    if (spec.split_index < 0 || spec.split_index >= spec.n_splits)
        throw ConfigError("split spec: split_index out of range [0, n_splits)");
    const int fold = n / spec.n_splits;
    ClassSplit out;
    for (int i = 0; i < n; ++i) {
        const int c = spec.all_classes[static_cast<std::size_t>(i)];
        if (i / fold == spec.split_index)
            out.test_classes.insert(c);
        else
            out.train_classes.insert(c);
    }
    return out;
}

/// One few-shot task: a query and k supports, all containing target_class.
/// The query mask is binarized to {0, 1, 255}; support masks keep their full
/// multi-class labels so batch-wide prototype collection can see every class.
struct Episode {
    Tensor query_image;
    SegmentationMask query_mask; // values in {0, 1, 255}
    std::vector<std::pair<Tensor, SegmentationMask>> supports;
    int target_class = 0;
    int query_item = -1;            // dataset index, -1 if not from a dataset
    std::vector<int> support_items; // dataset indices (parallel to supports)

    int k() const { return static_cast<int>(supports.size()); }
};

inline Episode sample_episode(const Dataset& ds, const std::set<int>& class_pool, int k,
                              Rng& rng) {
    if (k < 1) throw DomainError("sample_episode: k must be >= 1");
    if (class_pool.empty()) throw SamplingError("sample_episode: empty class pool");
    std::vector<int> pool(class_pool.begin(), class_pool.end());
    for (int c : pool)
        if (!ds.class_ids.count(c))
            throw SamplingError("sample_episode: class " + std::to_string(c) +
                                " is not in the dataset");

    const int target = pool[static_cast<std::size_t>(rng.uniform_u64(pool.size()))];
    const auto it = ds.items_containing.find(target);
    const auto& candidates = it->second;
    if (static_cast<int>(candidates.size()) < k + 1)
        throw SamplingError("sample_episode: class " + std::to_string(target) + " has only " +
                            std::to_string(candidates.size()) + " items, need " +
                            std::to_string(k + 1));

    const std::vector<int> chosen = rng.sample_indices(static_cast<int>(candidates.size()), k + 1);

    Episode ep;
    ep.target_class = target;
    ep.query_item = candidates[static_cast<std::size_t>(chosen[0])];
    const DatasetItem& q = ds.items[static_cast<std::size_t>(ep.query_item)];
    ep.query_image = q.image;
    ep.query_mask = binarize_to_target(q.mask, target);
    for (int i = 1; i <= k; ++i) {
        const int idx = candidates[static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)])];
        ep.support_items.push_back(idx);
        const DatasetItem& s = ds.items[static_cast<std::size_t>(idx)];
        ep.supports.emplace_back(s.image, s.mask);
    }
    return ep;
}

/// Horizontal-flip augmentation; flipping items independently keeps the
/// support/query correspondence intact.
inline Episode flip_episode(const Episode& ep, Rng& rng) {
    Episode out = ep;
    if (rng.uniform_u64(2) == 0) {
        out.query_image = flip_horizontal(ep.query_image);
        out.query_mask = flip_horizontal(ep.query_mask);
        out.query_item = -1;
    }
    for (std::size_t i = 0; i < out.supports.size(); ++i) {
        if (rng.uniform_u64(2) == 0) {
            out.supports[i].first = flip_horizontal(ep.supports[i].first);
            out.supports[i].second = flip_horizontal(ep.supports[i].second);
            out.support_items[i] = -1;
        }
    }
    return out;
}

/// Random square crop applied identically to image and mask. Retries until
/// the target class survives in every cropped mask.
inline Episode crop_episode(const Episode& ep, int crop_size, Rng& rng) {
    const int h = ep.query_image.dim(1), w = ep.query_image.dim(2);
    if (crop_size <= 0 || crop_size > h || crop_size > w)
        throw ConfigError("crop_episode: crop_size must be in (0, image_size]");
    auto crop_pair = [&](const Tensor& img, const SegmentationMask& m, int required_class,
                         Tensor& img_out, SegmentationMask& mask_out) {
        for (int attempt = 0; attempt < 32; ++attempt) {
            const int y0 = static_cast<int>(rng.uniform_int(0, h - crop_size));
            const int x0 = static_cast<int>(rng.uniform_int(0, w - crop_size));
            SegmentationMask mc(crop_size, crop_size);
            bool found = false;
            for (int y = 0; y < crop_size; ++y)
                for (int x = 0; x < crop_size; ++x) {
                    mc.at(y, x) = m.at(y0 + y, x0 + x);
                    found = found || mc.at(y, x) == required_class;
                }
            if (!found) continue;
            Tensor ic({3, crop_size, crop_size});
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < crop_size; ++y)
                    for (int x = 0; x < crop_size; ++x) ic.at(c, y, x) = img.at(c, y0 + y, x0 + x);
            img_out = std::move(ic);
            mask_out = std::move(mc);
            return;
        }
        throw SamplingError("crop_episode: target class " + std::to_string(required_class) +
                            " never survived the crop");
    };
    Episode out = ep;
    crop_pair(ep.query_image, ep.query_mask, 1, out.query_image, out.query_mask);
    out.query_item = -1;
    for (std::size_t i = 0; i < out.supports.size(); ++i) {
        crop_pair(ep.supports[i].first, ep.supports[i].second, ep.target_class,
                  out.supports[i].first, out.supports[i].second);
        out.support_items[i] = -1;
    }
    return out;
}

} // namespace iprnet
