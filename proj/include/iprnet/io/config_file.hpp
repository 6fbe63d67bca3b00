#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "iprnet/data/dataset.hpp"
#include "iprnet/data/episode.hpp"
#include "iprnet/io/dataset_io.hpp"
#include "iprnet/loss/losses.hpp"
#include "iprnet/model/model.hpp"

namespace iprnet {

/// Everything one training run needs. Mirrors the `key = value` config file;
/// nested groups use dotted keys (split.*, weights.*, data.*, model.*).
struct TrainConfig {
    double base_lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0001;
    int batch_size = 4;
    int max_iters = 2000;
    double power = 0.9;
    int k_shots = 5;
    int eval_every = 0;    // 0 disables periodic evaluation/checkpoints
    int eval_episodes = 200;
    std::uint64_t seed = 1;
    int n_splits = 4;
    int split_index = 0;
    LossWeights weights;
    bool iprm = true;
    bool rcm = true;
    bool per_image_pairs = false; // relation loss over per-image prototype nodes
    bool random_flip = false;
    bool random_crop = false;
    int crop_size = 0;
    GeneratorConfig data;
    std::string data_dir; // when set, load this directory instead of generating
    ModelConfig model;

    void validate() const {
        if (base_lr <= 0) throw ConfigError("train config: base_lr must be positive");
        if (power <= 0) throw ConfigError("train config: power must be positive");
        if (batch_size < 2)
            throw ConfigError("train config: batch_size must be >= 2 so the relation loss sees "
                              "multiple episodes");
        if (max_iters < 0) throw ConfigError("train config: max_iters must be >= 0");
        if (k_shots < 1) throw ConfigError("train config: k_shots must be >= 1");
        if (momentum < 0 || momentum >= 1) throw ConfigError("train config: momentum must be in [0,1)");
        if (weight_decay < 0) throw ConfigError("train config: weight_decay must be >= 0");
        if (random_crop && crop_size <= 0)
            throw ConfigError("train config: crop_size must be positive when random_crop is on");
        weights.validate();
        model.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: field " + key + " expects a boolean, got '" + v + "'");
}

} // namespace detail

/// `key = value` lines; '#' starts a comment; unknown keys are rejected so
/// typos cannot silently fall back to defaults.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw IoError("config: cannot open " + path);
        std::ostringstream os;
        os << f.rdbuf();
        return parse_string(os.str());
    }

    static ConfigFile parse_string(const std::string& text) {
        ConfigFile cf;
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config: line " + std::to_string(lineno) +
                                  " is not of the form key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
            cf.values_[key] = value;
        }
        return cf;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    template <typename T>
    void read(const std::string& key, T& out) {
        const auto it = values_.find(key);
        if (it == values_.end()) return;
        consumed_.insert(key);
        std::istringstream is(it->second);
        T v{};
        is >> v;
        if (is.fail()) throw ConfigError("config: field " + key + " has invalid value '" + it->second + "'");
        out = v;
    }

    void read(const std::string& key, bool& out) {
        const auto it = values_.find(key);
        if (it == values_.end()) return;
        consumed_.insert(key);
        out = detail::parse_bool(key, it->second);
    }

    void read(const std::string& key, std::string& out) {
        const auto it = values_.find(key);
        if (it == values_.end()) return;
        consumed_.insert(key);
        out = it->second;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key)) throw ConfigError("config: unknown field '" + key + "'");
    }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

inline TrainConfig train_config_from_file(ConfigFile cf) {
    TrainConfig c;
    cf.read("base_lr", c.base_lr);
    cf.read("momentum", c.momentum);
    cf.read("weight_decay", c.weight_decay);
    cf.read("batch_size", c.batch_size);
    cf.read("max_iters", c.max_iters);
    cf.read("power", c.power);
    cf.read("k_shots", c.k_shots);
    cf.read("eval_every", c.eval_every);
    cf.read("eval_episodes", c.eval_episodes);
    cf.read("seed", c.seed);
    cf.read("split.n_splits", c.n_splits);
    cf.read("split.split_index", c.split_index);
    cf.read("weights.w1", c.weights.w1);
    cf.read("weights.w2", c.weights.w2);
    cf.read("weights.w3", c.weights.w3);
    cf.read("weights.alpha", c.weights.alpha);
    cf.read("weights.beta", c.weights.beta);
    cf.read("weights.gamma", c.weights.gamma);
    cf.read("iprm", c.iprm);
    cf.read("rcm", c.rcm);
    cf.read("relation_loss.per_image_pairs", c.per_image_pairs);
    cf.read("random_flip", c.random_flip);
    cf.read("random_crop", c.random_crop);
    cf.read("crop_size", c.crop_size);
    cf.read("data.n_classes", c.data.n_classes);
    cf.read("data.images_per_class", c.data.images_per_class);
    cf.read("data.image_size", c.data.image_size);
    cf.read("data.shapes_per_image", c.data.shapes_per_image);
    cf.read("data.seed", c.data.seed);
    cf.read("data.k_max", c.data.k_max);
    cf.read("data.ignore_border", c.data.ignore_border);
    cf.read("data.noise_level", c.data.noise_level);
    cf.read("data.texture_period", c.data.texture_period);
    cf.read("data.min_radius", c.data.min_radius);
    cf.read("data.max_radius", c.data.max_radius);
    cf.read("data.color_jitter", c.data.color_jitter);
    cf.read("data.dir", c.data_dir);
    cf.read("model.stage1_channels", c.model.encoder.stage1_channels);
    cf.read("model.stage2_channels", c.model.encoder.stage2_channels);
    cf.read("model.stage1_stride", c.model.encoder.stage1_stride);
    cf.read("model.stage2_stride", c.model.encoder.stage2_stride);
    cf.read("model.frozen_encoder", c.model.encoder.frozen);
    cf.read("model.proj_channels", c.model.proj_channels);
    cf.read("model.mid_channels", c.model.mid_channels);
    cf.read("model.head_channels", c.model.head_channels);
    cf.read("model.scales", c.model.scales);
    cf.reject_unknown();
    c.model.rcm = c.rcm;
    c.model.iprm = c.iprm;
    c.validate();
    return c;
}

inline nlohmann::json model_config_to_json(const ModelConfig& m) {
    return nlohmann::json{{"stage1_channels", m.encoder.stage1_channels},
                          {"stage2_channels", m.encoder.stage2_channels},
                          {"stage1_stride", m.encoder.stage1_stride},
                          {"stage2_stride", m.encoder.stage2_stride},
                          {"frozen_encoder", m.encoder.frozen},
                          {"proj_channels", m.proj_channels},
                          {"mid_channels", m.mid_channels},
                          {"head_channels", m.head_channels},
                          {"scales", m.scales},
                          {"rcm", m.rcm},
                          {"iprm", m.iprm}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.encoder.stage1_channels = j.value("stage1_channels", m.encoder.stage1_channels);
    m.encoder.stage2_channels = j.value("stage2_channels", m.encoder.stage2_channels);
    m.encoder.stage1_stride = j.value("stage1_stride", m.encoder.stage1_stride);
    m.encoder.stage2_stride = j.value("stage2_stride", m.encoder.stage2_stride);
    m.encoder.frozen = j.value("frozen_encoder", m.encoder.frozen);
    m.proj_channels = j.value("proj_channels", m.proj_channels);
    m.mid_channels = j.value("mid_channels", m.mid_channels);
    m.head_channels = j.value("head_channels", m.head_channels);
    m.scales = j.value("scales", m.scales);
    m.rcm = j.value("rcm", m.rcm);
    m.iprm = j.value("iprm", m.iprm);
    return m;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return nlohmann::json{{"base_lr", c.base_lr},
                          {"momentum", c.momentum},
                          {"weight_decay", c.weight_decay},
                          {"batch_size", c.batch_size},
                          {"max_iters", c.max_iters},
                          {"power", c.power},
                          {"k_shots", c.k_shots},
                          {"eval_every", c.eval_every},
                          {"eval_episodes", c.eval_episodes},
                          {"seed", c.seed},
                          {"n_splits", c.n_splits},
                          {"split_index", c.split_index},
                          {"weights",
                           {{"w1", c.weights.w1},
                            {"w2", c.weights.w2},
                            {"w3", c.weights.w3},
                            {"alpha", c.weights.alpha},
                            {"beta", c.weights.beta},
                            {"gamma", c.weights.gamma}}},
                          {"iprm", c.iprm},
                          {"rcm", c.rcm},
                          {"per_image_pairs", c.per_image_pairs},
                          {"random_flip", c.random_flip},
                          {"random_crop", c.random_crop},
                          {"crop_size", c.crop_size},
                          {"data", generator_config_to_json(c.data)},
                          {"data_dir", c.data_dir},
                          {"model", model_config_to_json(c.model)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.base_lr = j.value("base_lr", c.base_lr);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.power = j.value("power", c.power);
    c.k_shots = j.value("k_shots", c.k_shots);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.seed = j.value("seed", c.seed);
    c.n_splits = j.value("n_splits", c.n_splits);
    c.split_index = j.value("split_index", c.split_index);
    if (j.contains("weights")) {
        const auto& w = j["weights"];
        c.weights.w1 = w.value("w1", c.weights.w1);
        c.weights.w2 = w.value("w2", c.weights.w2);
        c.weights.w3 = w.value("w3", c.weights.w3);
        c.weights.alpha = w.value("alpha", c.weights.alpha);
        c.weights.beta = w.value("beta", c.weights.beta);
        c.weights.gamma = w.value("gamma", c.weights.gamma);
    }
    c.iprm = j.value("iprm", c.iprm);
    c.rcm = j.value("rcm", c.rcm);
    c.per_image_pairs = j.value("per_image_pairs", c.per_image_pairs);
    c.random_flip = j.value("random_flip", c.random_flip);
    c.random_crop = j.value("random_crop", c.random_crop);
    c.crop_size = j.value("crop_size", c.crop_size);
    if (j.contains("data")) c.data = generator_config_from_json(j["data"]);
    c.data_dir = j.value("data_dir", c.data_dir);
    if (j.contains("model")) c.model = model_config_from_json(j["model"]);
    return c;
}

} // namespace iprnet
