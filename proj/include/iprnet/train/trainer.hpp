#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iprnet/eval/evaluation.hpp"
#include "iprnet/io/config_file.hpp"
#include "iprnet/loss/rcm_loss.hpp"
#include "iprnet/train/optim.hpp"

namespace iprnet {

struct TrainerDiagnostics {
    std::int64_t skipped_episodes = 0;
    std::int64_t relation_few_classes = 0;
    std::int64_t empty_loss_selections = 0;
};

/// Episodic trainer. Owns the model, the optimizer, the sampler streams and a
/// cache of frozen encoder features keyed by dataset item. Single-writer: one
/// thread drives training; the dataset itself is immutable and shared.
class Trainer {
public:
    explicit Trainer(TrainConfig cfg)
        : Trainer(std::move(cfg), nullptr) {}

    Trainer(TrainConfig cfg, std::shared_ptr<const Dataset> dataset) : cfg_(std::move(cfg)) {
        cfg_.validate();
        if (dataset) {
            dataset_ = std::move(dataset);
        } else if (!cfg_.data_dir.empty()) {
            dataset_ = std::make_shared<const Dataset>(load_dataset(cfg_.data_dir));
        } else {
            dataset_ = std::make_shared<const Dataset>(generate_shapes_dataset(cfg_.data));
        }

        SplitSpec spec;
        spec.all_classes.assign(dataset_->class_ids.begin(), dataset_->class_ids.end());
        spec.n_splits = cfg_.n_splits;
        spec.split_index = cfg_.split_index;
        split_ = make_splits(spec);

        model_ = IprNet(cfg_.model, cfg_.seed);
        optimizer_ = SgdOptimizer(cfg_.momentum, cfg_.weight_decay);
        sampler_rng_ = Rng(cfg_.seed).split(1);
        augment_rng_ = Rng(cfg_.seed).split(2);
        raw_cache_.assign(dataset_->items.size(), std::nullopt);
    }

    const TrainConfig& config() const { return cfg_; }
    const Dataset& dataset() const { return *dataset_; }
    std::shared_ptr<const Dataset> dataset_ptr() const { return dataset_; }
    const ClassSplit& split() const { return split_; }
    IprNet& model() { return model_; }
    const IprNet& model() const { return model_; }
    const TrainerDiagnostics& diagnostics() const { return diag_; }
    SgdOptimizer& optimizer() { return optimizer_; }

    Episode sample_train_episode() {
        Episode ep = sample_episode(*dataset_, split_.train_classes, cfg_.k_shots, sampler_rng_);
        if (cfg_.random_crop) ep = crop_episode(ep, cfg_.crop_size, augment_rng_);
        if (cfg_.random_flip) ep = flip_episode(ep, augment_rng_);
        return ep;
    }

    std::vector<Episode> sample_batch() {
        std::vector<Episode> batch;
        batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
        for (int i = 0; i < cfg_.batch_size; ++i) batch.push_back(sample_train_episode());
        return batch;
    }

    /// Full forward pass over one batch: batch-wide prototype collection,
    /// relation loss, per-episode decoder/classifier losses, weighted total.
    /// No parameter update.
    std::pair<Var, LossBreakdown> compute_batch_loss(const std::vector<Episode>& batch) {
        if (batch.empty()) throw DomainError("compute_batch_loss: empty batch");
        for (const auto& ep : batch) {
            if (!split_.train_classes.count(ep.target_class))
                throw SamplingError("train_step: episode target class " +
                                    std::to_string(ep.target_class) +
                                    " is not in the training split");
        }

        struct EpisodeFeatures {
            Var query;
            std::vector<Var> supports;
            std::vector<SegmentationMask> support_masks;
        };
        std::vector<EpisodeFeatures> feats;
        feats.reserve(batch.size());
        for (const auto& ep : batch) {
            EpisodeFeatures ef;
            ef.query = item_features(ep.query_item, ep.query_image);
            for (std::size_t i = 0; i < ep.supports.size(); ++i) {
                ef.supports.push_back(item_features(ep.support_items[i], ep.supports[i].first));
                ef.support_masks.push_back(ep.supports[i].second);
            }
            feats.push_back(std::move(ef));
        }

        // The relation loss sees prototypes of every class present across the
        // whole batch; the similarity maps use each episode's own support
        // prototypes, matching what evaluation can build at test time.
        Var relation = Var::scalar(0.0);
        if (cfg_.iprm) {
            std::vector<Var> all_feats;
            std::vector<SegmentationMask> all_masks;
            for (const auto& ef : feats) {
                all_feats.insert(all_feats.end(), ef.supports.begin(), ef.supports.end());
                all_masks.insert(all_masks.end(), ef.support_masks.begin(), ef.support_masks.end());
            }
            const std::vector<Prototype> per_image = collect_image_prototypes(all_feats, all_masks);
            bool few = false;
            relation = cfg_.per_image_pairs
                           ? relation_loss_per_image(per_image, &few)
                           : relation_loss(merge_prototypes(per_image), &few);
            if (few) ++diag_.relation_few_classes;
        }

        std::vector<Var> ms_terms, cls_terms, fg_terms, bg_terms, final_terms;
        for (std::size_t e = 0; e < batch.size(); ++e) {
            const Episode& ep = batch[e];
            const EpisodeFeatures& ef = feats[e];

            const auto local = make_episode_prototypes(ef.supports, ef.support_masks,
                                                       ep.target_class, cfg_.iprm);
            if (!local) {
                ++diag_.skipped_episodes;
                continue;
            }
            const EpisodeForward fwd =
                forward_episode(model_, ef.supports, ef.query, local->target, local->background);
            ms_terms.push_back(multiscale_loss(fwd.decoder_out.scale_logits, ep.query_mask));
            int empties = 0;
            const RcmLossTerms terms = rcm_loss(fwd.rcm_out, ep.query_mask, cfg_.weights, &empties);
            diag_.empty_loss_selections += empties;
            cls_terms.push_back(terms.composite);
            fg_terms.push_back(terms.fg);
            bg_terms.push_back(terms.bg);
            final_terms.push_back(terms.final_);
        }
        if (cls_terms.empty())
            throw SamplingError("train_step: every episode in the batch was skipped");

        const Var multiscale = mean_scalars(ms_terms);
        const Var classifier = mean_scalars(cls_terms);
        const Var total = total_loss(relation, multiscale, classifier, cfg_.weights);

        LossBreakdown breakdown;
        breakdown.relation = relation.value().item();
        breakdown.multiscale = multiscale.value().item();
        breakdown.classifier = classifier.value().item();
        breakdown.head_fg = mean_scalars(fg_terms).value().item();
        breakdown.head_bg = mean_scalars(bg_terms).value().item();
        breakdown.head_final = mean_scalars(final_terms).value().item();
        breakdown.total = total.value().item();
        return {total, breakdown};
    }

    /// One optimization step at the given learning rate.
    LossBreakdown train_step(const std::vector<Episode>& batch, double lr) {
        auto [total, breakdown] = compute_batch_loss(batch);
        model_.zero_grads();
        backward(total);
        optimizer_.step(model_.params(), lr);
        last_breakdown_ = breakdown;
        return breakdown;
    }

    /// Run the configured number of iterations. When out_dir is nonempty,
    /// writes train_log.jsonl, periodic checkpoints (every eval_every iters)
    /// and checkpoint_final.ckpt; returns the final checkpoint path (empty
    /// when out_dir is empty).
    std::string fit(const std::string& out_dir = "") {
        namespace fs = std::filesystem;
        std::ofstream log;
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            log.open((fs::path(out_dir) / "train_log.jsonl").string());
            if (!log) throw IoError("train: cannot write log in " + out_dir);
        }
        for (int iter = 0; iter < cfg_.max_iters; ++iter) {
            const double lr = poly_lr(cfg_.base_lr, iter, cfg_.max_iters, cfg_.power);
            const LossBreakdown b = train_step(sample_batch(), lr);
            if (log.is_open()) log << log_line(iter, lr, b) << "\n";
            if (cfg_.eval_every > 0 && (iter + 1) % cfg_.eval_every == 0) {
                const IoUReport r =
                    evaluate_model(model_, *dataset_, split_.test_classes, cfg_.k_shots,
                                   cfg_.eval_episodes, Rng(cfg_.seed).split(999).next_u64(),
                                   cfg_.split_index);
                if (log.is_open())
                    log << nlohmann::json{{"iter", iter}, {"eval_miou", r.mean_iou}}.dump() << "\n";
                if (!out_dir.empty()) save(checkpoint_name(out_dir, iter + 1), iter + 1);
            }
        }
        if (!out_dir.empty()) {
            const std::string path = (fs::path(out_dir) / "checkpoint_final.ckpt").string();
            save(path, cfg_.max_iters);
            return path;
        }
        return "";
    }

    void save(const std::string& path, int iteration) const {
        save_checkpoint(path, model_.params(), optimizer_.state(), train_config_to_json(cfg_),
                        iteration, split_.train_classes, split_.test_classes,
                        dataset_->config_hash);
    }

    void restore(const Checkpoint& ckpt) {
        restore_params(model_.params(), ckpt);
        optimizer_.set_state(restore_momentum(ckpt));
    }

    const LossBreakdown& last_breakdown() const { return last_breakdown_; }

    static std::string log_line(int iter, double lr, const LossBreakdown& b) {
        return nlohmann::json{{"iter", iter},
                              {"lr", lr},
                              {"L_r", b.relation},
                              {"L_m", b.multiscale},
                              {"L_1", b.head_fg},
                              {"L_0", b.head_bg},
                              {"L_f", b.head_final},
                              {"L_p", b.classifier},
                              {"total", b.total}}
            .dump();
    }

private:
    static std::string checkpoint_name(const std::string& out_dir, int iter) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "checkpoint_%06d.ckpt", iter);
        return (std::filesystem::path(out_dir) / buf).string();
    }

    /// Frozen encoder features are cached per dataset item; augmented
    /// episodes (item index -1) or an unfrozen encoder bypass the cache.
    Var item_features(int item_index, const Tensor& image) {
        if (!cfg_.model.encoder.frozen || item_index < 0)
            return model_.project(model_.encoder().forward(Var(image)));
        auto& slot = raw_cache_[static_cast<std::size_t>(item_index)];
        if (!slot) slot = model_.encode(image);
        return model_.project(*slot);
    }

    TrainConfig cfg_;
    std::shared_ptr<const Dataset> dataset_;
    ClassSplit split_;
    IprNet model_;
    SgdOptimizer optimizer_;
    Rng sampler_rng_{0};
    Rng augment_rng_{0};
    std::vector<std::optional<Tensor>> raw_cache_;
    TrainerDiagnostics diag_;
    LossBreakdown last_breakdown_;
};

/// Train per the config and write artifacts into out_dir.
inline std::string train(const TrainConfig& cfg, const std::string& out_dir) {
    Trainer trainer(cfg);
    return trainer.fit(out_dir);
}

} // namespace iprnet
