// Command-line front end: dataset generation, training, evaluation, the
// ablation grid and prototype export.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "iprnet/iprnet.hpp"

namespace {

iprnet::Dataset dataset_for_checkpoint(const iprnet::Checkpoint& ckpt, const std::string& data_dir) {
    if (!data_dir.empty()) return iprnet::load_dataset(data_dir);
    const iprnet::TrainConfig cfg = iprnet::train_config_from_json(ckpt.header.at("config"));
    if (!cfg.data_dir.empty()) return iprnet::load_dataset(cfg.data_dir);
    iprnet::Dataset ds = iprnet::generate_shapes_dataset(cfg.data);
    const std::string recorded = ckpt.header.value("dataset_hash", std::string());
    if (!recorded.empty() && recorded != ds.config_hash)
        throw iprnet::ConfigError("checkpoint was trained on a different dataset (hash mismatch); "
                                  "pass --data explicitly");
    return ds;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot segmentation with interclass prototype relation training"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic shapes dataset directory");
    iprnet::GeneratorConfig gen_cfg;
    std::string gen_out;
    gen->add_option("--classes", gen_cfg.n_classes, "Number of classes");
    gen->add_option("--images-per-class", gen_cfg.images_per_class, "Items per class");
    gen->add_option("--size", gen_cfg.image_size, "Image side length");
    gen->add_option("--shapes", gen_cfg.shapes_per_image, "Shapes drawn per image");
    gen->add_option("--seed", gen_cfg.seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train from a config file");
    std::string train_config_path, train_out;
    train_cmd->add_option("--config", train_config_path, "Config file (key = value)")->required();
    train_cmd->add_option("--out", train_out, "Output directory")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on held-out classes");
    std::string eval_ckpt, eval_out, eval_data;
    int eval_split = -1, eval_shots = 0, eval_episodes = 1000;
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--split", eval_split, "Split index (default: the checkpoint's)");
    eval_cmd->add_option("--shots", eval_shots, "Supports per episode (default: the checkpoint's)");
    eval_cmd->add_option("--episodes", eval_episodes, "Episodes to sample");
    eval_cmd->add_option("--seed", eval_seed, "Sampling seed");
    eval_cmd->add_option("--out", eval_out, "Report JSON path")->required();
    eval_cmd->add_option("--data", eval_data, "Dataset directory (default: regenerate)");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Train/evaluate the 2x2 module grid on all splits");
    std::string ablate_config_path, ablate_out;
    ablate_cmd->add_option("--config", ablate_config_path, "Base config file")->required();
    ablate_cmd->add_option("--out", ablate_out, "Output CSV path")->required();

    // export-protos
    auto* protos_cmd = app.add_subcommand("export-protos", "Export query prototypes to CSV");
    std::string protos_ckpt, protos_out, protos_data;
    int protos_episodes = 200;
    std::uint64_t protos_seed = 0;
    protos_cmd->add_option("--checkpoint", protos_ckpt, "Checkpoint file")->required();
    protos_cmd->add_option("--out", protos_out, "Output CSV path")->required();
    protos_cmd->add_option("--episodes", protos_episodes, "Episodes to sample");
    protos_cmd->add_option("--seed", protos_seed, "Sampling seed");
    protos_cmd->add_option("--data", protos_data, "Dataset directory (default: regenerate)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const iprnet::Dataset ds = iprnet::generate_shapes_dataset(gen_cfg);
            iprnet::save_dataset(ds, gen_out);
            std::cout << "wrote " << ds.items.size() << " items to " << gen_out << "\n";
        } else if (train_cmd->parsed()) {
            const iprnet::TrainConfig cfg =
                iprnet::train_config_from_file(iprnet::ConfigFile::parse_file(train_config_path));
            const std::string ckpt = iprnet::train(cfg, train_out);
            std::cout << "checkpoint: " << ckpt << "\n";
        } else if (eval_cmd->parsed()) {
            const iprnet::Checkpoint ckpt = iprnet::load_checkpoint(eval_ckpt);
            const iprnet::TrainConfig cfg = iprnet::train_config_from_json(ckpt.header.at("config"));
            const iprnet::Dataset ds = dataset_for_checkpoint(ckpt, eval_data);
            if (eval_split < 0) eval_split = cfg.split_index;
            if (eval_shots <= 0) eval_shots = cfg.k_shots;
            iprnet::SplitSpec spec;
            spec.all_classes.assign(ds.class_ids.begin(), ds.class_ids.end());
            spec.n_splits = cfg.n_splits;
            spec.split_index = eval_split;
            const iprnet::ClassSplit split = iprnet::make_splits(spec);
            const iprnet::IoUReport report = iprnet::evaluate_checkpoint(
                ckpt, ds, split.test_classes, eval_shots, eval_episodes, eval_seed, eval_split);
            std::ofstream f(eval_out);
            if (!f) throw iprnet::IoError("cannot write " + eval_out);
            f << iprnet::iou_report_to_json(report).dump(2) << "\n";
            std::cout << "mean IoU " << report.mean_iou << " over " << report.episode_count
                      << " episodes -> " << eval_out << "\n";
        } else if (ablate_cmd->parsed()) {
            const iprnet::TrainConfig cfg =
                iprnet::train_config_from_file(iprnet::ConfigFile::parse_file(ablate_config_path));
            std::vector<int> splits;
            for (int s = 0; s < cfg.n_splits; ++s) splits.push_back(s);
            const auto rows = iprnet::run_ablation(cfg, splits);
            iprnet::ablation_to_csv(rows, ablate_out);
            for (const auto& row : rows)
                std::cout << "iprm=" << row.iprm_on << " rcm=" << row.rcm_on
                          << " mean mIoU=" << row.mean << "\n";
            std::cout << "table -> " << ablate_out << "\n";
        } else if (protos_cmd->parsed()) {
            const iprnet::Checkpoint ckpt = iprnet::load_checkpoint(protos_ckpt);
            const iprnet::Dataset ds = dataset_for_checkpoint(ckpt, protos_data);
            const iprnet::IprNet model = iprnet::model_from_checkpoint(ckpt);
            const double separation = iprnet::prototype_separation(
                model, ds, ckpt.test_classes(), protos_episodes, protos_seed, protos_out);
            std::cout << "interclass cosine similarity " << separation << " -> " << protos_out
                      << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
