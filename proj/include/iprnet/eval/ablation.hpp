#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "iprnet/train/trainer.hpp"

namespace iprnet {

struct AblationRow {
    bool iprm_on = false;
    bool rcm_on = false;
    std::vector<double> per_split_miou;
    double mean = 0.0;
};

/// Apply a module toggle pair to a base config. Disabling the prototype
/// relation module zeroes its loss weight and switches prototype collection
/// to the conventional episode-local target/background pooling; disabling the
/// respective classifier collapses the heads to a single fused head on the
/// decoder output.
inline TrainConfig apply_toggles(TrainConfig cfg, bool iprm_on, bool rcm_on) {
    cfg.iprm = iprm_on;
    cfg.model.iprm = iprm_on;
    if (!iprm_on) cfg.weights.w1 = 0.0;
    cfg.rcm = rcm_on;
    cfg.model.rcm = rcm_on;
    return cfg;
}

/// Train and evaluate the four on/off combinations on every requested split.
inline std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                             const std::vector<int>& splits,
                                             std::shared_ptr<const Dataset> dataset = nullptr) {
    if (!dataset) {
        if (!base.data_dir.empty())
            dataset = std::make_shared<const Dataset>(load_dataset(base.data_dir));
        else
            dataset = std::make_shared<const Dataset>(generate_shapes_dataset(base.data));
    }
    const std::vector<std::pair<bool, bool>> grid = {
        {true, true}, {true, false}, {false, true}, {false, false}};
    std::vector<AblationRow> rows;
    for (const auto& [iprm_on, rcm_on] : grid) {
        AblationRow row;
        row.iprm_on = iprm_on;
        row.rcm_on = rcm_on;
        for (int split : splits) {
            TrainConfig cfg = apply_toggles(base, iprm_on, rcm_on);
            cfg.split_index = split;
            Trainer trainer(cfg, dataset);
            trainer.fit();
            const IoUReport report = evaluate_model(
                trainer.model(), trainer.dataset(), trainer.split().test_classes, cfg.k_shots,
                cfg.eval_episodes, Rng(cfg.seed).split(999).next_u64(), split);
            row.per_split_miou.push_back(report.mean_iou);
        }
        double sum = 0.0;
        for (double v : row.per_split_miou) sum += v;
        row.mean = row.per_split_miou.empty() ? 0.0 : sum / static_cast<double>(row.per_split_miou.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void ablation_to_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("ablation_to_csv: cannot write " + path);
    f.precision(10);
    const std::size_t n_splits = rows.empty() ? 0 : rows[0].per_split_miou.size();
    f << "iprm,rcm";
    for (std::size_t s = 0; s < n_splits; ++s) f << ",s" << s;
    f << ",mean\n";
    for (const auto& row : rows) {
        f << (row.iprm_on ? 1 : 0) << "," << (row.rcm_on ? 1 : 0);
        for (double v : row.per_split_miou) f << "," << v;
        f << "," << row.mean << "\n";
    }
}

} // namespace iprnet
