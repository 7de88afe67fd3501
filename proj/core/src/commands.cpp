#include "sama/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>

#include <json.hpp>

#include "sama/checkpoint.hpp"
#include "sama/errors.hpp"
#include "sama/judge.hpp"
#include "sama/metrics.hpp"
#include "sama/plot.hpp"
#include "sama/sampler.hpp"
#include "sama/scene.hpp"
#include "sama/vtensor.hpp"

namespace sama {

namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& workdir, const fs::path& p) {
    return p.is_absolute() ? p : workdir / p;
}

void save_region(const fs::path& path, const std::vector<std::uint8_t>& region, int frames,
                 int height, int width) {
    VTensorData t;
    t.dims = {static_cast<std::uint32_t>(frames), static_cast<std::uint32_t>(height),
              static_cast<std::uint32_t>(width)};
    t.values.reserve(region.size());
    for (std::uint8_t m : region) t.values.push_back(m ? 1.0f : 0.0f);
    write_vtensor(path, t);
}

// Scene generation keeps recolor/remove legal by construction (>= 1 shape).
ManifestRecord synth_pair(const RunConfig& cfg, const fs::path& data_dir, const fs::path& rel_dir,
                          const std::string& id, int frames, std::uint64_t stream,
                          const SyntheticJudge* judge) {
    Rng rng = Rng::substream(cfg.seed, stream);
    const SceneSpec scene = random_scene(rng, cfg.data.height, cfg.data.width);
    const EditKind kind = sample_edit_kind(rng, cfg.data.edit_weights);
    EditPair pair = make_edit_pair(scene, frames, kind, rng);

    ManifestRecord rec;
    rec.id = id;
    rec.kind = frames == 1 ? "image_edit" : "video_edit";
    rec.instruction = pair.instruction;
    rec.edit_kind = edit_kind_name(kind);
    rec.split = cfg.data.split;
    save_clip(data_dir / (id + "_src.vt"), pair.source);
    save_clip(data_dir / (id + "_tgt.vt"), pair.target);
    save_region(data_dir / (id + "_region.vt"), pair.region, frames, cfg.data.height,
                cfg.data.width);
    rec.paths["source"] = (rel_dir / (id + "_src.vt")).string();
    rec.paths["target"] = (rel_dir / (id + "_tgt.vt")).string();
    rec.paths["region"] = (rel_dir / (id + "_region.vt")).string();
    if (judge) {
        rec.scores = judge->score(pair.source, pair.target, pair.target, pair.region, frames > 1);
        rec.keep = filter_sample(*rec.scores, rec.kind, FilterThresholds{});
    }
    return rec;
}

DiTModel model_from_config(const RunConfig& cfg) {
    return DiTModel::init(cfg.dit, cfg.semantic, cfg.patch, cfg.seed);
}

TrainState checkpoint_for_sampling(const RunConfig& cfg, const fs::path& checkpoint) {
    TrainState state = load_checkpoint(checkpoint);
    if (cfg.sampler.use_ema) state.ema.apply_to(state.model.params);
    return state;
}

}  // namespace

fs::path cmd_synth(const RunConfig& cfg, const fs::path& workdir) {
    cfg.validate();
    const fs::path data_dir = resolve(workdir, cfg.paths.dataset_dir);
    fs::create_directories(data_dir);
    const fs::path manifest_path = resolve(workdir, cfg.paths.manifest);
    if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
    // Manifest paths stay relative to the manifest's own directory.
    const fs::path rel_dir = fs::relative(data_dir, manifest_path.parent_path());

    const SyntheticJudge judge(mix64(cfg.seed) ^ 0x7d6eull);
    const SyntheticJudge* judge_ptr = cfg.data.judge_filter ? &judge : nullptr;

    Manifest manifest;
    char id[32];
    for (int i = 0; i < cfg.data.image_pairs; ++i) {
        std::snprintf(id, sizeof(id), "img_%05d", i);
        manifest.records.push_back(synth_pair(cfg, data_dir, rel_dir, id, 1,
                                              0x100000ull + static_cast<std::uint64_t>(i),
                                              judge_ptr));
    }
    for (int i = 0; i < cfg.data.video_pairs; ++i) {
        std::snprintf(id, sizeof(id), "vid_%05d", i);
        manifest.records.push_back(synth_pair(cfg, data_dir, rel_dir, id, cfg.data.frames,
                                              0x200000ull + static_cast<std::uint64_t>(i),
                                              judge_ptr));
    }
    for (int i = 0; i < cfg.data.t2v_clips; ++i) {
        std::snprintf(id, sizeof(id), "t2v_%05d", i);
        Rng rng = Rng::substream(cfg.seed, 0x300000ull + static_cast<std::uint64_t>(i));
        const SceneSpec scene = random_scene(rng, cfg.data.height, cfg.data.width);
        const VideoClip clip = render_scene(scene, cfg.data.frames);
        ManifestRecord rec;
        rec.id = id;
        rec.kind = "t2v";
        rec.instruction = scene_caption(scene);
        rec.split = cfg.data.split;
        save_clip(data_dir / (std::string(id) + ".vt"), clip);
        rec.paths["clip"] = (rel_dir / (std::string(id) + ".vt")).string();
        manifest.records.push_back(std::move(rec));
    }
    write_manifest(manifest_path, manifest);
    std::cout << "synth: image_edit=" << cfg.data.image_pairs
              << " video_edit=" << cfg.data.video_pairs << " t2v=" << cfg.data.t2v_clips
              << " -> " << manifest_path.string() << '\n';
    return manifest_path;
}

fs::path cmd_train(const RunConfig& cfg, const fs::path& workdir) {
    cfg.validate();
    const Corpus corpus = load_corpus(resolve(workdir, cfg.paths.manifest));
    TrainState state = TrainState::init(model_from_config(cfg), cfg.train);
    const fs::path ckpt_root = resolve(workdir, cfg.paths.checkpoint_dir);
    fs::create_directories(ckpt_root);

    Rng batch_rng = Rng::substream(cfg.train.seed, 0xba7c4);
    std::vector<TrainLogRow> log;
    log.reserve(static_cast<std::size_t>(cfg.train.steps));
    for (int step = 0; step < cfg.train.steps; ++step) {
        const auto begin = std::chrono::steady_clock::now();
        const std::vector<BatchSample> batch =
            stage_batch(cfg.train.stage, corpus, cfg.train, batch_rng);
        const StepLosses losses = train_step(state, batch);
        const auto end = std::chrono::steady_clock::now();
        TrainLogRow row;
        row.step = step;
        row.fm = losses.fm;
        row.sem = losses.sem;
        row.total = losses.total;
        row.wall_ms = std::chrono::duration<double, std::milli>(end - begin).count();
        log.push_back(row);
        if (cfg.train.checkpoint_every > 0 && (step + 1) % cfg.train.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "step_%06d", step + 1);
            save_checkpoint(ckpt_root / name, state);
        }
    }
    const fs::path log_path = resolve(workdir, cfg.paths.log);
    if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
    write_train_log(log_path, log);
    const fs::path final_dir = ckpt_root / "final";
    save_checkpoint(final_dir, state);
    if (!log.empty()) {
        std::cout << "train: stage " << cfg.train.stage << ", " << cfg.train.steps
                  << " steps, final total=" << log.back().total << " -> " << final_dir.string()
                  << '\n';
    }
    return final_dir;
}

fs::path cmd_edit(const RunConfig& cfg, const fs::path& workdir, const fs::path& checkpoint,
                  const fs::path& source_clip, const std::string& instruction) {
    cfg.validate();
    const TrainState state = checkpoint_for_sampling(cfg, resolve(workdir, checkpoint));
    const VideoClip source = load_clip(resolve(workdir, source_clip));
    const VideoClip edited = edit_video(state.model, source, instruction, cfg.sampler);
    const fs::path out_path = resolve(workdir, cfg.paths.output_clip);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_clip(out_path, edited);
    if (!cfg.paths.ppm_dir.empty()) {
        dump_ppm_frames(resolve(workdir, cfg.paths.ppm_dir), edited);
    }
    std::cout << "edit: " << source_clip.string() << " -> " << out_path.string() << '\n';
    return out_path;
}

fs::path cmd_eval(const RunConfig& cfg, const fs::path& workdir, const fs::path& checkpoint,
                  const fs::path& manifest) {
    cfg.validate();
    const TrainState state = checkpoint_for_sampling(cfg, resolve(workdir, checkpoint));
    const Corpus corpus = load_corpus(resolve(workdir, manifest));

    EvalReport report;
    auto eval_pair = [&](const Corpus::PairItem& pair, const std::string& kind) {
        const VideoClip output = edit_video(state.model, pair.source, pair.instruction, cfg.sampler);
        SampleMetrics m;
        m.id = pair.id;
        m.kind = kind;
        m.edit_region_error = edit_region_error(output, pair.target, pair.region);
        m.preservation_error = preservation_error(output, pair.source, pair.region);
        // Single-frame pairs carry no motion; both sides count as static.
        m.motion_consistency = output.frames >= 2 ? motion_consistency(output, pair.source) : 1.0;
        report.samples.push_back(std::move(m));
    };
    for (const auto& pair : corpus.image_edits) eval_pair(pair, "image_edit");
    for (const auto& pair : corpus.video_edits) eval_pair(pair, "video_edit");
    for (const auto& item : corpus.t2v) {
        Rng rng = Rng::substream(cfg.seed, mix64(0x77be ^ std::hash<std::string>{}(item.id)));
        auto [shuffled, perm] = tube_shuffle(item.clip, rng);
        const VideoClip restored = restore_pretext(state.model, shuffled,
                                                   PretextTask::TubeShuffle, item.caption,
                                                   cfg.sampler);
        SampleMetrics m;
        m.id = item.id;
        m.kind = "t2v";
        m.restoration_error = restoration_error(restored, item.clip);
        m.has_restoration = true;
        report.samples.push_back(std::move(m));
    }
    report.finalize();

    const fs::path report_path = resolve(workdir, cfg.paths.report);
    if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
    nlohmann::json j;
    j["metric_axes"] = {
        {"edit_region_error", "instruction following (lower is better)"},
        {"preservation_error", "content preservation outside the edit region"},
        {"motion_consistency", "frame-difference correlation against the source"},
        {"restoration_error", "pretext restoration distance (t2v records)"}};
    j["means"] = {{"edit_region_error", report.mean_edit_region_error},
                  {"preservation_error", report.mean_preservation_error},
                  {"motion_consistency", report.mean_motion_consistency},
                  {"restoration_error", report.mean_restoration_error}};
    j["counts"] = {{"edit_samples", report.edit_samples},
                   {"restoration_samples", report.restoration_samples}};
    nlohmann::json rows = nlohmann::json::array();
    for (const SampleMetrics& m : report.samples) {
        nlohmann::json row;
        row["id"] = m.id;
        row["kind"] = m.kind;
        if (m.has_restoration) {
            row["restoration_error"] = m.restoration_error;
        } else {
            row["edit_region_error"] = m.edit_region_error;
            row["preservation_error"] = m.preservation_error;
            row["motion_consistency"] = m.motion_consistency;
        }
        rows.push_back(std::move(row));
    }
    j["samples"] = std::move(rows);
    {
        std::ofstream out(report_path);
        if (!out) throw IoError("cmd_eval: cannot open " + report_path.string());
        out << j.dump(2) << '\n';
    }
    const fs::path csv_path = resolve(workdir, cfg.paths.report_csv);
    {
        std::ofstream out(csv_path);
        if (!out) throw IoError("cmd_eval: cannot open " + csv_path.string());
        out << "id,kind,edit_region_error,preservation_error,motion_consistency,restoration_error\n";
        for (const SampleMetrics& m : report.samples) {
            out << m.id << ',' << m.kind << ',' << m.edit_region_error << ','
                << m.preservation_error << ',' << m.motion_consistency << ','
                << m.restoration_error << '\n';
        }
    }
    std::cout << "eval: " << report.samples.size() << " samples -> " << report_path.string()
              << '\n';
    return report_path;
}

fs::path cmd_plot(const std::vector<fs::path>& logs, const fs::path& out_svg,
                  const std::string& column, const fs::path& summary_csv) {
    if (logs.empty()) throw ContractError("cmd_plot: need at least one log");
    int field = 2;  // total
    if (column == "fm_loss") {
        field = 0;
    } else if (column == "sem_loss") {
        field = 1;
    } else if (column != "total") {
        throw ConfigError("cmd_plot: unknown column '" + column + "'");
    }

    std::vector<PlotSeries> series;
    std::ostringstream summary;
    summary << "run,column,final,min,mean\n";
    for (const fs::path& log_path : logs) {
        const std::vector<TrainLogRow> rows = read_train_log(log_path);
        if (rows.empty()) throw ContractError("cmd_plot: empty log " + log_path.string());
        std::vector<double> values;
        values.reserve(rows.size());
        for (const TrainLogRow& row : rows) {
            values.push_back(field == 0 ? row.fm : field == 1 ? row.sem : row.total);
        }
        PlotSeries s;
        s.label = log_path.stem().string();
        s.values = window_mean(values, 20);
        double mn = s.values[0], mean = 0.0;
        for (double v : s.values) {
            mn = std::min(mn, v);
            mean += v;
        }
        mean /= static_cast<double>(s.values.size());
        summary << s.label << ',' << column << ',' << s.values.back() << ',' << mn << ',' << mean
                << '\n';
        series.push_back(std::move(s));
    }
    if (out_svg.has_parent_path()) fs::create_directories(out_svg.parent_path());
    {
        std::ofstream out(out_svg);
        if (!out) throw IoError("cmd_plot: cannot open " + out_svg.string());
        out << render_loss_svg(series, column + " (window mean, w=20)");
    }
    {
        std::ofstream out(summary_csv);
        if (!out) throw IoError("cmd_plot: cannot open " + summary_csv.string());
        out << summary.str();
    }
    std::cout << "plot: " << logs.size() << " run(s) -> " << out_svg.string() << '\n';
    return out_svg;
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const ConfigError&) {
        return 2;
    } catch (const ContractError&) {
        return 2;
    } catch (const ShapeError&) {
        return 2;
    } catch (const TrainingError&) {
        return 4;
    } catch (const IoError&) {
        return 3;
    } catch (...) {
        return 1;
    }
}

}  // namespace sama
