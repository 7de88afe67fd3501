#include "sama/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "sama/errors.hpp"
#include "sama/text.hpp"

namespace sama {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError(std::string("config: unknown key '") + key + "' in " + where);
        }
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
    if (version != 1) throw ConfigError("config: unsupported version " + std::to_string(version));
    dit.validate();
    train.validate();
    if (patch.token_dim() != dit.model_dim) {
        throw ConfigError("config: patch token width " + std::to_string(patch.token_dim()) +
                          " must equal model_dim " + std::to_string(dit.model_dim));
    }
    if (sampler.steps < 1) throw ConfigError("config: sampler steps must be >= 1");
    if (data.frames < 1 || data.height < 1 || data.width < 1) {
        throw ConfigError("config: non-positive clip dimensions");
    }
    if (dit.vocab_size != 0 && dit.vocab_size != text_vocab().size()) {
        throw ConfigError("config: vocab_size must be 0 (auto) or match the grammar vocabulary");
    }
}

std::string RunConfig::to_json_string() const {
    json j;
    j["version"] = version;
    j["seed"] = seed;
    j["data"] = {{"frames", data.frames},
                 {"height", data.height},
                 {"width", data.width},
                 {"image_pairs", data.image_pairs},
                 {"video_pairs", data.video_pairs},
                 {"t2v_clips", data.t2v_clips},
                 {"edit_weights", data.edit_weights},
                 {"judge_filter", data.judge_filter},
                 {"split", data.split}};
    j["model"] = {{"layers", dit.layers},
                  {"heads", dit.heads},
                  {"model_dim", dit.model_dim},
                  {"ff_dim", dit.ff_dim},
                  {"positional", positional_scheme_name(dit.positional)},
                  {"shift_source", dit.shift_source},
                  {"shift_semantic", dit.shift_semantic},
                  {"shift_target", dit.shift_target},
                  {"patch", std::array<int, 3>{patch.p_t, patch.p_h, patch.p_w}},
                  {"anchors_n", semantic.anchors_n},
                  {"local_tokens_m", semantic.local_tokens_m},
                  {"feature_dim", semantic.feature_dim},
                  {"proj_hidden", semantic.proj_hidden},
                  {"encoder_patch", semantic.encoder_patch},
                  {"encoder_seed", semantic.encoder_seed}};
    j["train"] = {{"lr", train.lr},
                  {"lambda", train.lambda_sem},
                  {"ema_decay", train.ema_decay},
                  {"ema", train.ema},
                  {"batch_size", train.batch_size},
                  {"steps", train.steps},
                  {"stage", train.stage},
                  {"sa", train.sa},
                  {"ma", train.ma},
                  {"optimizer", train.optimizer},
                  {"t2v_fraction", train.t2v_fraction},
                  {"image_fraction", train.image_fraction},
                  {"cube_ratio", train.cube_ratio},
                  {"checkpoint_every", train.checkpoint_every}};
    j["sampler"] = {{"steps", sampler.steps},
                    {"guidance", sampler.guidance},
                    {"use_ema", sampler.use_ema},
                    {"cointegrate_semantic", sampler.cointegrate_semantic}};
    j["paths"] = {{"dataset_dir", paths.dataset_dir},
                  {"manifest", paths.manifest},
                  {"checkpoint_dir", paths.checkpoint_dir},
                  {"log", paths.log},
                  {"output_clip", paths.output_clip},
                  {"ppm_dir", paths.ppm_dir},
                  {"report", paths.report},
                  {"report_csv", paths.report_csv}};
    return j.dump(2);
}

RunConfig RunConfig::from_json_string(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("config: invalid JSON");
    check_keys(j, {"version", "seed", "data", "model", "train", "sampler", "paths"}, "document root");

    RunConfig cfg;
    read_into(j, "version", cfg.version);
    read_into(j, "seed", cfg.seed);

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d,
                   {"frames", "height", "width", "image_pairs", "video_pairs", "t2v_clips",
                    "edit_weights", "judge_filter", "split"},
                   "data");
        read_into(d, "frames", cfg.data.frames);
        read_into(d, "height", cfg.data.height);
        read_into(d, "width", cfg.data.width);
        read_into(d, "image_pairs", cfg.data.image_pairs);
        read_into(d, "video_pairs", cfg.data.video_pairs);
        read_into(d, "t2v_clips", cfg.data.t2v_clips);
        read_into(d, "edit_weights", cfg.data.edit_weights);
        read_into(d, "judge_filter", cfg.data.judge_filter);
        read_into(d, "split", cfg.data.split);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m,
                   {"layers", "heads", "model_dim", "ff_dim", "positional", "shift_source",
                    "shift_semantic", "shift_target", "patch", "anchors_n", "local_tokens_m",
                    "feature_dim", "proj_hidden", "encoder_patch", "encoder_seed"},
                   "model");
        read_into(m, "layers", cfg.dit.layers);
        read_into(m, "heads", cfg.dit.heads);
        read_into(m, "model_dim", cfg.dit.model_dim);
        read_into(m, "ff_dim", cfg.dit.ff_dim);
        if (m.contains("positional")) {
            cfg.dit.positional = positional_scheme_from_name(m.at("positional").get<std::string>());
        }
        read_into(m, "shift_source", cfg.dit.shift_source);
        read_into(m, "shift_semantic", cfg.dit.shift_semantic);
        read_into(m, "shift_target", cfg.dit.shift_target);
        if (m.contains("patch")) {
            const auto p = m.at("patch").get<std::array<int, 3>>();
            cfg.patch.p_t = p[0];
            cfg.patch.p_h = p[1];
            cfg.patch.p_w = p[2];
        }
        read_into(m, "anchors_n", cfg.semantic.anchors_n);
        read_into(m, "local_tokens_m", cfg.semantic.local_tokens_m);
        read_into(m, "feature_dim", cfg.semantic.feature_dim);
        read_into(m, "proj_hidden", cfg.semantic.proj_hidden);
        read_into(m, "encoder_patch", cfg.semantic.encoder_patch);
        read_into(m, "encoder_seed", cfg.semantic.encoder_seed);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t,
                   {"lr", "lambda", "ema_decay", "ema", "batch_size", "steps", "stage", "sa", "ma",
                    "optimizer", "t2v_fraction", "image_fraction", "cube_ratio",
                    "checkpoint_every"},
                   "train");
        read_into(t, "lr", cfg.train.lr);
        read_into(t, "lambda", cfg.train.lambda_sem);
        read_into(t, "ema_decay", cfg.train.ema_decay);
        read_into(t, "ema", cfg.train.ema);
        read_into(t, "batch_size", cfg.train.batch_size);
        read_into(t, "steps", cfg.train.steps);
        read_into(t, "stage", cfg.train.stage);
        read_into(t, "sa", cfg.train.sa);
        read_into(t, "ma", cfg.train.ma);
        read_into(t, "optimizer", cfg.train.optimizer);
        read_into(t, "t2v_fraction", cfg.train.t2v_fraction);
        read_into(t, "image_fraction", cfg.train.image_fraction);
        read_into(t, "cube_ratio", cfg.train.cube_ratio);
        read_into(t, "checkpoint_every", cfg.train.checkpoint_every);
    }
    if (j.contains("sampler")) {
        const json& s = j.at("sampler");
        check_keys(s, {"steps", "guidance", "use_ema", "cointegrate_semantic"}, "sampler");
        read_into(s, "steps", cfg.sampler.steps);
        read_into(s, "guidance", cfg.sampler.guidance);
        read_into(s, "use_ema", cfg.sampler.use_ema);
        read_into(s, "cointegrate_semantic", cfg.sampler.cointegrate_semantic);
    }
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        check_keys(p,
                   {"dataset_dir", "manifest", "checkpoint_dir", "log", "output_clip", "ppm_dir",
                    "report", "report_csv"},
                   "paths");
        read_into(p, "dataset_dir", cfg.paths.dataset_dir);
        read_into(p, "manifest", cfg.paths.manifest);
        read_into(p, "checkpoint_dir", cfg.paths.checkpoint_dir);
        read_into(p, "log", cfg.paths.log);
        read_into(p, "output_clip", cfg.paths.output_clip);
        read_into(p, "ppm_dir", cfg.paths.ppm_dir);
        read_into(p, "report", cfg.paths.report);
        read_into(p, "report_csv", cfg.paths.report_csv);
    }

    cfg.train.seed = cfg.seed;
    cfg.sampler.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RunConfig cfg = from_json_string(text);
    if (const char* env_seed = std::getenv("SAMA_SEED")) {
        cfg.seed = std::strtoull(env_seed, nullptr, 10);
        cfg.train.seed = cfg.seed;
        cfg.sampler.seed = cfg.seed;
    }
    return cfg;
}

}  // namespace sama
