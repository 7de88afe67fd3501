#include "sama/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sama/errors.hpp"
#include "sama/manifest.hpp"
#include "sama/text.hpp"
#include "sama/vtensor.hpp"

namespace sama {

void TrainConfig::validate() const {
    if (lambda_sem < 0.0) throw ConfigError("TrainConfig: lambda must be >= 0");
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("TrainConfig: decay outside (0,1)");
    if (batch_size < 1 || steps < 0) throw ConfigError("TrainConfig: bad batch size or steps");
    if (stage != 0 && stage != 1) throw ConfigError("TrainConfig: stage must be 0 or 1");
    if (optimizer != "sgd" && optimizer != "adam") {
        throw ConfigError("TrainConfig: unknown optimizer '" + optimizer + "'");
    }
    if (t2v_fraction < 0.0 || t2v_fraction > 1.0 || image_fraction < 0.0 || image_fraction > 1.0) {
        throw ConfigError("TrainConfig: mixture fractions outside [0,1]");
    }
    if (!(cube_ratio > 0.0 && cube_ratio < 1.0)) throw ConfigError("TrainConfig: cube ratio outside (0,1)");
}

Corpus load_corpus(const std::filesystem::path& manifest_path) {
    const Manifest manifest = load_manifest(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();
    auto resolve = [&base](const std::string& rel) {
        const std::filesystem::path p(rel);
        return p.is_absolute() ? p : base / p;
    };

    Corpus corpus;
    for (const ManifestRecord& rec : manifest.records) {
        if (rec.keep && !*rec.keep) continue;
        if (rec.kind == "t2v") {
            Corpus::ClipItem item;
            item.id = rec.id;
            item.clip = load_clip(resolve(rec.paths.at("clip")));
            item.caption = rec.instruction;
            corpus.t2v.push_back(std::move(item));
            continue;
        }
        Corpus::PairItem item;
        item.id = rec.id;
        item.source = load_clip(resolve(rec.paths.at("source")));
        item.target = load_clip(resolve(rec.paths.at("target")));
        item.instruction = rec.instruction;
        item.edit_kind = rec.edit_kind;
        if (rec.paths.count("region")) {
            const VTensorData mask = read_vtensor(resolve(rec.paths.at("region")));
            item.region.reserve(mask.values.size());
            for (float v : mask.values) item.region.push_back(v != 0.0f ? 1 : 0);
        }
        (rec.kind == "image_edit" ? corpus.image_edits : corpus.video_edits).push_back(std::move(item));
    }
    return corpus;
}

std::vector<BatchSample> stage_batch(int stage, const Corpus& corpus, const TrainConfig& cfg,
                                     Rng& rng) {
    std::vector<BatchSample> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    if (stage == 0) {
        if (corpus.image_edits.empty()) throw ConfigError("stage 0 requires image_edit records");
        if (cfg.t2v_fraction > 0.0 && corpus.t2v.empty()) {
            throw ConfigError("stage 0 requires t2v records");
        }
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (rng.uniform() < cfg.t2v_fraction) {
                const auto& item = corpus.t2v[static_cast<std::size_t>(
                    rng.uniform_int(static_cast<std::int64_t>(corpus.t2v.size())))];
                const PretextTask task = cfg.ma ? sample_task(rng) : PretextTask::None;
                PretextSample sample =
                    make_pretext_sample(item.clip, item.caption, task, cfg.cube_ratio, rng);
                batch.push_back(BatchSample{std::move(sample.perturbed_source),
                                            std::move(sample.target), std::move(sample.prompt),
                                            false, task});
            } else {
                const auto& pair = corpus.image_edits[static_cast<std::size_t>(
                    rng.uniform_int(static_cast<std::int64_t>(corpus.image_edits.size())))];
                batch.push_back(BatchSample{pair.source, pair.target, pair.instruction, true,
                                            PretextTask::None});
            }
        }
        return batch;
    }
    if (corpus.video_edits.empty()) throw ConfigError("stage 1 requires video_edit records");
    if (cfg.image_fraction > 0.0 && corpus.image_edits.empty()) {
        throw ConfigError("stage 1 with image mixing requires image_edit records");
    }
    for (int i = 0; i < cfg.batch_size; ++i) {
        const bool image = rng.uniform() < cfg.image_fraction;
        const auto& pool = image ? corpus.image_edits : corpus.video_edits;
        const auto& pair = pool[static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(pool.size())))];
        batch.push_back(BatchSample{pair.source, pair.target, pair.instruction, image,
                                    PretextTask::None});
    }
    return batch;
}

Tensor interpolate(const Tensor& x0, const Tensor& x1, float t) {
    if (x0.shape() != x1.shape()) {
        throw ShapeError("interpolate: shapes disagree " + shape_str(x0.shape()) + " vs " +
                         shape_str(x1.shape()));
    }
    if (!(t >= 0.0f && t <= 1.0f)) throw ContractError("interpolate: t outside [0,1]");
    return add(scale(x1, t), scale(x0, 1.0f - t));
}

Tensor fm_loss(const Tensor& v_pred, const Tensor& x1, const Tensor& x0) {
    if (v_pred.shape() != x1.shape() || x1.shape() != x0.shape()) {
        throw ShapeError("fm_loss: shapes disagree " + shape_str(v_pred.shape()) + " / " +
                         shape_str(x1.shape()) + " / " + shape_str(x0.shape()));
    }
    return mse_loss(v_pred, sub(x1, x0));
}

Tensor sem_loss(const Tensor& anchor_tokens, const Tensor& predicted) {
    return l1_loss(anchor_tokens, predicted);
}

Tensor total_loss(const Tensor& fm, const Tensor& sem, float lambda_sem) {
    if (lambda_sem < 0.0f) throw ContractError("total_loss: lambda must be >= 0");
    return add(fm, scale(sem, lambda_sem));
}

TrainItem build_train_item(const BatchSample& sample, const DiTModel& model, bool sa, bool ma,
                           Rng& rng) {
    if (!ma && sample.task != PretextTask::None) {
        throw ContractError("build_train_item: pretext sample with motion alignment disabled");
    }
    const LatentTokens zs = patchify(sample.source, model.patch);
    const LatentTokens zt = patchify(sample.target, model.patch);
    const std::int64_t dim = zt.tokens.dim(1);

    TrainItem item;
    item.instruction_ids = text_vocab().encode(sample.prompt);
    item.t = static_cast<float>(rng.uniform());

    // Target-stream noise draws first so runs with and without the semantic
    // objective share the same (t, x0) pairs on the target rows.
    Tensor noise_target = Tensor::randn(zt.tokens.shape(), rng);

    std::optional<Tensor> sem_clean;  // projected anchor tokens, on the tape
    if (sa) {
        const std::vector<int> anchors =
            select_anchor_frames(sample.target.frames, model.semantic.anchors_n, rng);
        const PooledSemantic pooled =
            pool_semantic(sample.target, anchors, *model.encoder, model.semantic.local_tokens_m);
        sem_clean = project_semantic(pooled, model.params.sem_proj);
        item.sem_target = sem_clean->detached();
    }

    Tensor x1_tape;  // clean [semantic ; target] tokens (semantic part trainable)
    if (sem_clean) {
        const Tensor sem_noise = Tensor::randn({sem_clean->dim(0), dim}, rng);
        const std::vector<Tensor> noise_parts{sem_noise, noise_target};
        item.x0 = concat(noise_parts, 0);
        const std::vector<Tensor> clean_parts{*sem_clean, zt.tokens};
        x1_tape = concat(clean_parts, 0);
    } else {
        item.x0 = noise_target;
        x1_tape = zt.tokens;
    }
    item.x1 = x1_tape.detached();

    const Tensor xt = interpolate(item.x0, x1_tape, item.t);
    std::optional<Tensor> sem_input;
    Tensor target_input;
    if (sem_clean) {
        sem_input = slice(xt, 0, 0, sem_clean->dim(0));
        target_input = slice(xt, 0, sem_clean->dim(0), zt.tokens.dim(0));
    } else {
        target_input = xt;
    }
    item.seq = assemble_sequence(zs.tokens, zs.grid, sem_input, target_input, zt.grid);
    return item;
}

EmaState EmaState::from(ModelParams& params) {
    EmaState state;
    for (auto& [name, tensor] : params.named_parameters()) {
        state.names.push_back(name);
        state.shadow.emplace_back(tensor->data().begin(), tensor->data().end());
    }
    return state;
}

void EmaState::update(ModelParams& params, double decay) {
    auto named = params.named_parameters();
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto data = named[i].second->data();
        std::vector<float>& s = shadow[i];
        for (std::size_t j = 0; j < s.size(); ++j) {
            s[j] = static_cast<float>(decay * s[j] + (1.0 - decay) * data[j]);
        }
    }
}

void EmaState::apply_to(ModelParams& params) const {
    auto named = params.named_parameters();
    for (std::size_t i = 0; i < named.size(); ++i) {
        auto data = named[i].second->mutable_data();
        std::copy(shadow[i].begin(), shadow[i].end(), data.begin());
    }
}

AdamState AdamState::from(ModelParams& params) {
    AdamState state;
    for (auto& [name, tensor] : params.named_parameters()) {
        state.m.emplace_back(tensor->data().size(), 0.0f);
        state.v.emplace_back(tensor->data().size(), 0.0f);
    }
    return state;
}

TrainState TrainState::init(DiTModel model, TrainConfig config) {
    config.validate();
    TrainState state;
    state.model = std::move(model);
    state.config = std::move(config);
    state.ema = EmaState::from(state.model.params);
    state.adam = AdamState::from(state.model.params);
    return state;
}

StepLosses train_step(TrainState& state, const std::vector<BatchSample>& batch) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    const TrainConfig& cfg = state.config;
    DiTModel& model = state.model;

    Rng item_rng = Rng::substream(cfg.seed, 0x17e30000ull + static_cast<std::uint64_t>(state.step));

    Tensor batch_total;
    double fm_value = 0.0, sem_value = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        TrainItem item = build_train_item(batch[i], model, cfg.sa, cfg.ma, item_rng);
        const ForwardResult fwd =
            dit_forward(model.params, model.config, item.seq, item.t, item.instruction_ids);
        const VelocityReadout readout = readout_velocity(fwd.output, item.seq.layout);

        Tensor v_pred;
        if (readout.semantic) {
            const std::vector<Tensor> parts{*readout.semantic, readout.target};
            v_pred = concat(parts, 0);
        } else {
            v_pred = readout.target;
        }
        const Tensor fm = fm_loss(v_pred, item.x1, item.x0);
        fm_value += fm.item();

        Tensor item_total = fm;
        if (item.sem_target) {
            const Tensor hidden_sem = slice(fwd.final_hidden, 0, item.seq.layout.semantic_offset,
                                            item.seq.layout.semantic_len);
            const Tensor predicted = semantic_head(model.params, hidden_sem);
            const Tensor sem = sem_loss(*item.sem_target, predicted);
            sem_value += sem.item();
            item_total = total_loss(fm, sem, static_cast<float>(cfg.lambda_sem));
        }
        batch_total = i == 0 ? item_total : add(batch_total, item_total);
    }
    const float inv_batch = 1.0f / static_cast<float>(batch.size());
    batch_total = scale(batch_total, inv_batch);

    StepLosses losses;
    losses.fm = fm_value * inv_batch;
    losses.sem = sem_value * inv_batch;
    losses.total = batch_total.item();
    if (!std::isfinite(losses.total) || !std::isfinite(losses.fm) || !std::isfinite(losses.sem)) {
        throw TrainingError("non-finite loss at step " + std::to_string(state.step));
    }

    auto named = model.params.named_parameters();
    for (auto& [name, tensor] : named) tensor->zero_grad();
    backward(batch_total);

    if (cfg.optimizer == "adam") {
        state.adam.t += 1;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.adam.t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.adam.t));
        for (std::size_t i = 0; i < named.size(); ++i) {
            Tensor& p = *named[i].second;
            if (!p.has_grad()) continue;
            auto data = p.mutable_data();
            const auto grad = p.grad();
            std::vector<float>& m = state.adam.m[i];
            std::vector<float>& v = state.adam.v[i];
            for (std::size_t j = 0; j < data.size(); ++j) {
                const double g = grad[j];
                m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * g);
                v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * g * g);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                data[j] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    } else {
        for (auto& [name, tensor] : named) {
            if (!tensor->has_grad()) continue;
            auto data = tensor->mutable_data();
            const auto grad = tensor->grad();
            for (std::size_t j = 0; j < data.size(); ++j) {
                data[j] -= static_cast<float>(cfg.lr) * grad[j];
            }
        }
    }

    if (cfg.ema) state.ema.update(model.params, cfg.ema_decay);
    state.step += 1;
    return losses;
}

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_train_log: cannot open " + path.string());
    out << "step,fm_loss,sem_loss,total,wall_ms\n";
    for (const TrainLogRow& row : rows) {
        out << row.step << ',' << row.fm << ',' << row.sem << ',' << row.total << ','
            << row.wall_ms << '\n';
    }
    if (!out) throw IoError("write_train_log: write failed for " + path.string());
}

std::vector<TrainLogRow> read_train_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_train_log: cannot open " + path.string());
    std::vector<TrainLogRow> rows;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("read_train_log: empty file " + path.string());
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        TrainLogRow row;
        char c1, c2, c3, c4;
        if (!(ss >> row.step >> c1 >> row.fm >> c2 >> row.sem >> c3 >> row.total >> c4 >>
              row.wall_ms) ||
            c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
            throw ParseError("read_train_log: malformed line " + std::to_string(line_no) + " in " +
                             path.string());
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace sama
