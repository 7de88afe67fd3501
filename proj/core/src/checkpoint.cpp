#include "sama/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "sama/errors.hpp"
#include "sama/vtensor.hpp"

namespace sama {

using nlohmann::json;

namespace {

VTensorData to_vtensor(const Shape& shape, std::span<const float> values) {
    VTensorData t;
    t.dims.reserve(shape.size());
    for (std::int64_t d : shape) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.values.assign(values.begin(), values.end());
    return t;
}

void load_into(const std::filesystem::path& path, const Shape& expected,
               std::span<float> destination) {
    const VTensorData t = read_vtensor(path);
    bool match = t.dims.size() == expected.size();
    if (match) {
        for (std::size_t i = 0; i < t.dims.size(); ++i) {
            match = match && static_cast<std::int64_t>(t.dims[i]) == expected[i];
        }
    }
    if (!match || t.values.size() != destination.size()) {
        throw ConfigError("checkpoint: " + path.string() + " does not match expected shape " +
                          shape_str(expected));
    }
    std::copy(t.values.begin(), t.values.end(), destination.begin());
}

json config_to_json(const TrainState& state) {
    const DiTConfig& d = state.model.config;
    const SemanticConfig& s = state.model.semantic;
    const PatchSpec& p = state.model.patch;
    const TrainConfig& t = state.config;
    json j;
    j["version"] = 1;
    j["step"] = state.step;
    j["adam_t"] = state.adam.t;
    j["dit"] = {{"layers", d.layers},
                {"heads", d.heads},
                {"model_dim", d.model_dim},
                {"ff_dim", d.ff_dim},
                {"positional", positional_scheme_name(d.positional)},
                {"vocab_size", d.vocab_size},
                {"shift_source", d.shift_source},
                {"shift_semantic", d.shift_semantic},
                {"shift_target", d.shift_target}};
    j["semantic"] = {{"anchors_n", s.anchors_n},
                     {"local_tokens_m", s.local_tokens_m},
                     {"feature_dim", s.feature_dim},
                     {"proj_hidden", s.proj_hidden},
                     {"encoder_patch", s.encoder_patch},
                     {"encoder_seed", s.encoder_seed}};
    j["patch"] = {{"p_t", p.p_t}, {"p_h", p.p_h}, {"p_w", p.p_w}};
    j["train"] = {{"lr", t.lr},
                  {"lambda_sem", t.lambda_sem},
                  {"ema_decay", t.ema_decay},
                  {"ema", t.ema},
                  {"batch_size", t.batch_size},
                  {"steps", t.steps},
                  {"stage", t.stage},
                  {"sa", t.sa},
                  {"ma", t.ma},
                  {"optimizer", t.optimizer},
                  {"t2v_fraction", t.t2v_fraction},
                  {"image_fraction", t.image_fraction},
                  {"cube_ratio", t.cube_ratio},
                  {"seed", t.seed},
                  {"checkpoint_every", t.checkpoint_every}};
    return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state) {
    std::filesystem::create_directories(dir / "params");
    std::filesystem::create_directories(dir / "ema");
    {
        std::ofstream out(dir / "config.json");
        if (!out) throw IoError("save_checkpoint: cannot open " + (dir / "config.json").string());
        out << config_to_json(state).dump(2) << '\n';
    }
    const auto named = state.model.params.named_parameters();
    for (const auto& [name, tensor] : named) {
        write_vtensor(dir / "params" / (name + ".vt"), to_vtensor(tensor->shape(), tensor->data()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        write_vtensor(dir / "ema" / (named[i].first + ".vt"),
                      to_vtensor(named[i].second->shape(), state.ema.shadow[i]));
    }
    if (state.config.optimizer == "adam") {
        std::filesystem::create_directories(dir / "optim");
        for (std::size_t i = 0; i < named.size(); ++i) {
            write_vtensor(dir / "optim" / (named[i].first + ".m.vt"),
                          to_vtensor(named[i].second->shape(), state.adam.m[i]));
            write_vtensor(dir / "optim" / (named[i].first + ".v.vt"),
                          to_vtensor(named[i].second->shape(), state.adam.v[i]));
        }
    }
}

TrainState load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    if (!in) throw IoError("load_checkpoint: cannot open " + (dir / "config.json").string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("load_checkpoint: invalid config.json in " + dir.string());
    if (j.value("version", 0) != 1) {
        throw ConfigError("load_checkpoint: unsupported checkpoint version");
    }

    DiTConfig d;
    const json& jd = j.at("dit");
    d.layers = jd.at("layers").get<int>();
    d.heads = jd.at("heads").get<int>();
    d.model_dim = jd.at("model_dim").get<int>();
    d.ff_dim = jd.at("ff_dim").get<int>();
    d.positional = positional_scheme_from_name(jd.at("positional").get<std::string>());
    d.vocab_size = jd.at("vocab_size").get<int>();
    d.shift_source = jd.at("shift_source").get<float>();
    d.shift_semantic = jd.at("shift_semantic").get<float>();
    d.shift_target = jd.at("shift_target").get<float>();

    SemanticConfig s;
    const json& js = j.at("semantic");
    s.anchors_n = js.at("anchors_n").get<int>();
    s.local_tokens_m = js.at("local_tokens_m").get<int>();
    s.feature_dim = js.at("feature_dim").get<int>();
    s.proj_hidden = js.at("proj_hidden").get<int>();
    s.encoder_patch = js.at("encoder_patch").get<int>();
    s.encoder_seed = js.at("encoder_seed").get<std::uint64_t>();

    PatchSpec p;
    const json& jp = j.at("patch");
    p.p_t = jp.at("p_t").get<int>();
    p.p_h = jp.at("p_h").get<int>();
    p.p_w = jp.at("p_w").get<int>();

    TrainConfig t;
    const json& jt = j.at("train");
    t.lr = jt.at("lr").get<double>();
    t.lambda_sem = jt.at("lambda_sem").get<double>();
    t.ema_decay = jt.at("ema_decay").get<double>();
    t.ema = jt.at("ema").get<bool>();
    t.batch_size = jt.at("batch_size").get<int>();
    t.steps = jt.at("steps").get<int>();
    t.stage = jt.at("stage").get<int>();
    t.sa = jt.at("sa").get<bool>();
    t.ma = jt.at("ma").get<bool>();
    t.optimizer = jt.at("optimizer").get<std::string>();
    t.t2v_fraction = jt.at("t2v_fraction").get<double>();
    t.image_fraction = jt.at("image_fraction").get<double>();
    t.cube_ratio = jt.at("cube_ratio").get<double>();
    t.seed = jt.at("seed").get<std::uint64_t>();
    t.checkpoint_every = jt.at("checkpoint_every").get<int>();

    TrainState state = TrainState::init(DiTModel::init(d, s, p, /*seed=*/0), t);
    state.step = j.at("step").get<std::int64_t>();
    state.adam.t = j.at("adam_t").get<std::int64_t>();

    auto named = state.model.params.named_parameters();
    for (std::size_t i = 0; i < named.size(); ++i) {
        load_into(dir / "params" / (named[i].first + ".vt"), named[i].second->shape(),
                  named[i].second->mutable_data());
        load_into(dir / "ema" / (named[i].first + ".vt"), named[i].second->shape(),
                  state.ema.shadow[i]);
        if (t.optimizer == "adam" && std::filesystem::exists(dir / "optim")) {
            load_into(dir / "optim" / (named[i].first + ".m.vt"), named[i].second->shape(),
                      state.adam.m[i]);
            load_into(dir / "optim" / (named[i].first + ".v.vt"), named[i].second->shape(),
                      state.adam.v[i]);
        }
    }
    return state;
}

}  // namespace sama
