#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "iprnet/data/dataset.hpp"
#include "iprnet/io/png.hpp"

namespace iprnet {

namespace detail {

inline std::string item_name(int index) {
    std::ostringstream os;
    os << std::setw(4) << std::setfill('0') << index;
    return os.str();
}

} // namespace detail

inline nlohmann::json generator_config_to_json(const GeneratorConfig& cfg) {
    return nlohmann::json{{"n_classes", cfg.n_classes},
                          {"images_per_class", cfg.images_per_class},
                          {"image_size", cfg.image_size},
                          {"shapes_per_image", cfg.shapes_per_image},
                          {"seed", cfg.seed},
                          {"k_max", cfg.k_max},
                          {"ignore_border", cfg.ignore_border},
                          {"noise_level", cfg.noise_level},
                          {"texture_period", cfg.texture_period},
                          {"min_radius", cfg.min_radius},
                          {"max_radius", cfg.max_radius},
                          {"color_jitter", cfg.color_jitter}};
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig cfg;
    cfg.n_classes = j.value("n_classes", cfg.n_classes);
    cfg.images_per_class = j.value("images_per_class", cfg.images_per_class);
    cfg.image_size = j.value("image_size", cfg.image_size);
    cfg.shapes_per_image = j.value("shapes_per_image", cfg.shapes_per_image);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.k_max = j.value("k_max", cfg.k_max);
    cfg.ignore_border = j.value("ignore_border", cfg.ignore_border);
    cfg.noise_level = j.value("noise_level", cfg.noise_level);
    cfg.texture_period = j.value("texture_period", cfg.texture_period);
    cfg.min_radius = j.value("min_radius", cfg.min_radius);
    cfg.max_radius = j.value("max_radius", cfg.max_radius);
    cfg.color_jitter = j.value("color_jitter", cfg.color_jitter);
    return cfg;
}

/// Directory layout: images/NNNN.png (8-bit RGB), masks/NNNN.png (8-bit
/// single channel, value = class id or 255), meta.json.
inline void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");

    nlohmann::json meta;
    meta["config"] = generator_config_to_json(ds.config);
    meta["config_hash"] = ds.config_hash;
    meta["class_ids"] = std::vector<int>(ds.class_ids.begin(), ds.class_ids.end());
    nlohmann::json items = nlohmann::json::array();

    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const DatasetItem& item = ds.items[i];
        const int h = item.image.dim(1), w = item.image.dim(2);
        const std::string name = detail::item_name(static_cast<int>(i));

        PngImage img;
        img.width = w;
        img.height = h;
        img.channels = 3;
        img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)] =
                        static_cast<std::uint8_t>(item.image.at(c, y, x) * 255.0 + 0.5);
        write_png((fs::path(dir) / "images" / (name + ".png")).string(), img);

        PngImage msk;
        msk.width = w;
        msk.height = h;
        msk.channels = 1;
        msk.pixels.resize(static_cast<std::size_t>(w) * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                msk.pixels[static_cast<std::size_t>(y) * w + x] =
                    static_cast<std::uint8_t>(item.mask.at(y, x));
        write_png((fs::path(dir) / "masks" / (name + ".png")).string(), msk);

        nlohmann::json shapes = nlohmann::json::array();
        for (const auto& s : item.shapes)
            shapes.push_back({{"class_id", s.class_id},
                              {"kind", static_cast<int>(s.kind)},
                              {"cx", s.cx},
                              {"cy", s.cy},
                              {"radius", s.radius}});
        items.push_back({{"image", "images/" + name + ".png"},
                         {"mask", "masks/" + name + ".png"},
                         {"primary_class", item.primary_class},
                         {"shapes", shapes}});
    }
    meta["items"] = items;

    std::ofstream f((fs::path(dir) / "meta.json").string());
    if (!f) throw IoError("save_dataset: cannot write meta.json in " + dir);
    f << meta.dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream f((fs::path(dir) / "meta.json").string());
    if (!f) throw IoError("load_dataset: missing meta.json in " + dir);
    nlohmann::json meta;
    f >> meta;

    Dataset ds;
    if (meta.contains("config")) ds.config = generator_config_from_json(meta["config"]);
    ds.config_hash = meta.value("config_hash", std::string());

    for (const auto& entry : meta.at("items")) {
        const PngImage img = read_png((fs::path(dir) / entry.at("image").get<std::string>()).string());
        const PngImage msk = read_png((fs::path(dir) / entry.at("mask").get<std::string>()).string());
        if (img.channels != 3) throw IoError("load_dataset: image must be RGB");
        if (msk.channels != 1) throw IoError("load_dataset: mask must be single channel");
        if (img.width != msk.width || img.height != msk.height)
            throw IoError("load_dataset: image/mask dimensions differ");

        DatasetItem item;
        item.image = Tensor({3, img.height, img.width});
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c)
                    item.image.at(c, y, x) =
                        img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3 +
                                   static_cast<std::size_t>(c)] /
                        255.0;
        item.mask = SegmentationMask(msk.height, msk.width);
        for (int y = 0; y < msk.height; ++y)
            for (int x = 0; x < msk.width; ++x)
                item.mask.at(y, x) = msk.pixels[static_cast<std::size_t>(y) * msk.width + x];
        item.primary_class = entry.value("primary_class", 0);
        if (entry.contains("shapes")) {
            for (const auto& s : entry["shapes"]) {
                ShapeSpec spec;
                spec.class_id = s.at("class_id").get<int>();
                spec.kind = static_cast<ShapeKind>(s.at("kind").get<int>());
                spec.cx = s.at("cx").get<int>();
                spec.cy = s.at("cy").get<int>();
                spec.radius = s.at("radius").get<int>();
                item.shapes.push_back(spec);
            }
        }
        ds.items.push_back(std::move(item));
    }
    if (ds.config.image_size != (ds.items.empty() ? 0 : ds.items[0].image.dim(1)) &&
        !ds.items.empty())
        ds.config.image_size = ds.items[0].image.dim(1);
    ds.rebuild_index();
    return ds;
}

} // namespace iprnet
