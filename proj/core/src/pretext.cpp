#include "sama/pretext.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sama/errors.hpp"
#include "sama/vtensor.hpp"

namespace sama {

namespace {

constexpr const char* kCubeToken = "[Complete the missing regions in the video.]";
constexpr const char* kSpeedToken = "[Restore the video to normal playback speed.]";
constexpr const char* kTubeToken = "[Restore the correct spatio-temporal order of the video segments.]";

// Copies one half-extent tube. Tube index bits: (t << 2) | (y << 1) | x.
void copy_tube(const VideoClip& src, int src_tube, VideoClip& dst, int dst_tube) {
    const int ht = src.frames / 2, hh = src.height / 2, hw = src.width / 2;
    const int st = (src_tube >> 2) & 1, sy = (src_tube >> 1) & 1, sx = src_tube & 1;
    const int dt = (dst_tube >> 2) & 1, dy = (dst_tube >> 1) & 1, dx = dst_tube & 1;
    const std::size_t row_bytes = static_cast<std::size_t>(hw) * src.channels * sizeof(float);
    for (int t = 0; t < ht; ++t) {
        for (int y = 0; y < hh; ++y) {
            const float* s = &src.data[static_cast<std::size_t>(
                (((st * ht + t) * src.height + sy * hh + y) * src.width + sx * hw) * src.channels)];
            float* d = &dst.data[static_cast<std::size_t>(
                (((dt * ht + t) * dst.height + dy * hh + y) * dst.width + dx * hw) * dst.channels)];
            std::memcpy(d, s, row_bytes);
        }
    }
}

}  // namespace

const char* pretext_task_name(PretextTask task) {
    switch (task) {
        case PretextTask::None: return "none";
        case PretextTask::CubeInpaint: return "cube_inpaint";
        case PretextTask::SpeedPerturb: return "speed_perturb";
        case PretextTask::TubeShuffle: return "tube_shuffle";
    }
    return "none";
}

PretextTask pretext_task_from_name(const std::string& name) {
    if (name == "none") return PretextTask::None;
    if (name == "cube_inpaint") return PretextTask::CubeInpaint;
    if (name == "speed_perturb") return PretextTask::SpeedPerturb;
    if (name == "tube_shuffle") return PretextTask::TubeShuffle;
    throw ContractError("unknown pretext task: " + name);
}

std::pair<VideoClip, CubeMeta> cube_inpaint(const VideoClip& clip, double ratio, Rng& rng) {
    if (clip.frames < 2) throw ContractError("cube_inpaint: T must be >= 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("cube_inpaint: ratio must be in (0,1)");
    // round-half-up, clamped to [1, T-1]
    int length = static_cast<int>(std::floor(ratio * clip.frames + 0.5));
    length = std::max(1, std::min(clip.frames - 1, length));
    const int start = static_cast<int>(rng.uniform_int(clip.frames - length + 1));

    VideoClip out = clip;
    const std::size_t frame_elems =
        static_cast<std::size_t>(clip.height) * clip.width * clip.channels;
    for (int t = start; t < start + length; ++t) {
        std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(t * frame_elems), frame_elems,
                    0.5f);
    }
    return {std::move(out), CubeMeta{start, length}};
}

SpeedPerturbResult speed_perturb(const VideoClip& raw, int factor) {
    if (factor != 2) throw ContractError("speed_perturb: only factor 2 is supported");
    if (raw.frames % 2 != 0) throw ContractError("speed_perturb: raw length must be even");
    if (raw.frames < 2 * factor) throw ContractError("speed_perturb: raw length must be >= 4");
    const int half = raw.frames / 2;
    const std::size_t frame_elems = static_cast<std::size_t>(raw.height) * raw.width * raw.channels;

    SpeedPerturbResult result;
    result.fast_source = make_clip(half, raw.height, raw.width);
    result.normal_target = make_clip(half, raw.height, raw.width);
    for (int t = 0; t < half; ++t) {
        std::memcpy(&result.fast_source.data[t * frame_elems], &raw.data[(2 * t) * frame_elems],
                    frame_elems * sizeof(float));
        std::memcpy(&result.normal_target.data[t * frame_elems], &raw.data[t * frame_elems],
                    frame_elems * sizeof(float));
    }
    return result;
}

VideoClip apply_tube_permutation(const VideoClip& clip, const TubePermutation& perm) {
    if (clip.frames % 2 || clip.height % 2 || clip.width % 2) {
        throw ContractError("tube_shuffle: T, H, W must each be divisible by 2");
    }
    VideoClip out = clip;
    for (int slot = 0; slot < 8; ++slot) copy_tube(clip, perm[static_cast<std::size_t>(slot)], out, slot);
    return out;
}

TubePermutation invert_tube_permutation(const TubePermutation& perm) {
    TubePermutation inv{};
    for (int i = 0; i < 8; ++i) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
    return inv;
}

std::pair<VideoClip, TubePermutation> tube_shuffle(const VideoClip& clip, Rng& rng) {
    TubePermutation perm{0, 1, 2, 3, 4, 5, 6, 7};
    for (int i = 7; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
    }
    return {apply_tube_permutation(clip, perm), perm};
}

std::string task_prompt(PretextTask task, const std::string& caption) {
    const char* token = nullptr;
    switch (task) {
        case PretextTask::None: return caption;
        case PretextTask::CubeInpaint: token = kCubeToken; break;
        case PretextTask::SpeedPerturb: token = kSpeedToken; break;
        case PretextTask::TubeShuffle: token = kTubeToken; break;
    }
    if (caption.empty()) return token;
    return std::string(token) + " " + caption;
}

PretextTask sample_task(Rng& rng) {
    const double u = rng.uniform();
    if (u < 0.1) return PretextTask::None;
    if (u < 0.3) return PretextTask::CubeInpaint;
    if (u < 0.6) return PretextTask::SpeedPerturb;
    return PretextTask::TubeShuffle;
}

PretextSample make_pretext_sample(const VideoClip& clip, const std::string& caption,
                                  PretextTask task, double cube_ratio, Rng& rng) {
    PretextSample sample;
    sample.task = task;
    sample.prompt = task_prompt(task, caption);
    switch (task) {
        case PretextTask::None:
            sample.perturbed_source = clip;
            sample.target = clip;
            break;
        case PretextTask::CubeInpaint: {
            auto [src, meta] = cube_inpaint(clip, cube_ratio, rng);
            sample.perturbed_source = std::move(src);
            sample.target = clip;
            sample.meta.cube = meta;
            break;
        }
        case PretextTask::SpeedPerturb: {
            SpeedPerturbResult r = speed_perturb(clip);
            sample.perturbed_source = std::move(r.fast_source);
            sample.target = std::move(r.normal_target);
            sample.meta.speed_stride = r.stride;
            break;
        }
        case PretextTask::TubeShuffle: {
            auto [src, perm] = tube_shuffle(clip, rng);
            sample.perturbed_source = std::move(src);
            sample.target = clip;
            sample.meta.tube_perm = perm;
            break;
        }
    }
    return sample;
}

void save_pretext_sample(const std::filesystem::path& dir, const std::string& stem,
                         const PretextSample& sample) {
    std::filesystem::create_directories(dir);
    save_clip(dir / (stem + "_source.vt"), sample.perturbed_source);
    save_clip(dir / (stem + "_target.vt"), sample.target);
    nlohmann::json j;
    j["task"] = pretext_task_name(sample.task);
    j["prompt"] = sample.prompt;
    nlohmann::json meta;
    switch (sample.task) {
        case PretextTask::CubeInpaint:
            meta["mask_start"] = sample.meta.cube.start;
            meta["mask_length"] = sample.meta.cube.length;
            break;
        case PretextTask::SpeedPerturb:
            meta["stride"] = sample.meta.speed_stride;
            break;
        case PretextTask::TubeShuffle:
            meta["permutation"] = sample.meta.tube_perm;
            break;
        case PretextTask::None:
            break;
    }
    j["meta"] = meta;
    std::ofstream out(dir / (stem + ".json"));
    if (!out) throw IoError("save_pretext_sample: cannot open sidecar in " + dir.string());
    out << j.dump(2) << '\n';
}

PretextSample load_pretext_sample(const std::filesystem::path& dir, const std::string& stem) {
    std::ifstream in(dir / (stem + ".json"));
    if (!in) throw IoError("load_pretext_sample: cannot open sidecar in " + dir.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("load_pretext_sample: invalid sidecar JSON");

    PretextSample sample;
    sample.task = pretext_task_from_name(j.at("task").get<std::string>());
    sample.prompt = j.at("prompt").get<std::string>();
    const nlohmann::json& meta = j.at("meta");
    switch (sample.task) {
        case PretextTask::CubeInpaint:
            sample.meta.cube.start = meta.at("mask_start").get<int>();
            sample.meta.cube.length = meta.at("mask_length").get<int>();
            break;
        case PretextTask::SpeedPerturb:
            sample.meta.speed_stride = meta.at("stride").get<int>();
            break;
        case PretextTask::TubeShuffle:
            sample.meta.tube_perm = meta.at("permutation").get<TubePermutation>();
            break;
        case PretextTask::None:
            break;
    }
    sample.perturbed_source = load_clip(dir / (stem + "_source.vt"));
    sample.target = load_clip(dir / (stem + "_target.vt"));
    return sample;
}

}  // namespace sama
