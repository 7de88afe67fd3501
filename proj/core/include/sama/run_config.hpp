#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "sama/dit.hpp"
#include "sama/sampler.hpp"
#include "sama/train.hpp"

namespace sama {

struct DataConfig {
    int frames = 8;
    int height = 32;
    int width = 32;
    int image_pairs = 64;
    int video_pairs = 32;
    int t2v_clips = 32;
    // Draw weights for recolor / remove / add / style.
    std::array<double, 4> edit_weights{0.25, 0.25, 0.25, 0.25};
    bool judge_filter = true;
    std::string split = "train";
};

struct PathsConfig {
    std::string dataset_dir = "data";
    std::string manifest = "data/manifest.jsonl";
    std::string checkpoint_dir = "checkpoints";
    std::string log = "train_log.csv";
    std::string output_clip = "edited.vt";
    std::string ppm_dir;  // empty = no frame dump
    std::string report = "eval_report.json";
    std::string report_csv = "eval_report.csv";
};

// One strict-schema JSON document drives every command; flags only override
// keys. Unknown keys are rejected and the version field is checked.
struct RunConfig {
    int version = 1;
    std::uint64_t seed = 0;
    DataConfig data;
    DiTConfig dit;
    SemanticConfig semantic;
    PatchSpec patch;
    TrainConfig train;
    SamplerConfig sampler;
    PathsConfig paths;

    // Cross-field checks (token width == model_dim, realizable pooling grid).
    void validate() const;

    std::string to_json_string() const;
    static RunConfig from_json_string(const std::string& text);
    // Reads the file and applies the SAMA_SEED environment override.
    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig defaults() { return RunConfig{}; }
};

}  // namespace sama
