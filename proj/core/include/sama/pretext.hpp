#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "sama/rng.hpp"
#include "sama/video.hpp"

namespace sama {

enum class PretextTask { None, CubeInpaint, SpeedPerturb, TubeShuffle };

const char* pretext_task_name(PretextTask task);
PretextTask pretext_task_from_name(const std::string& name);

struct CubeMeta {
    int start = 0;   // first masked frame
    int length = 0;  // number of masked frames
};

using TubePermutation = std::array<int, 8>;

// Perturbation metadata; which member is meaningful depends on the task.
struct PretextMeta {
    CubeMeta cube;
    int speed_stride = 0;
    TubePermutation tube_perm{0, 1, 2, 3, 4, 5, 6, 7};
};

// Perturbed source plus the untouched target it must be restored to.
struct PretextSample {
    PretextTask task = PretextTask::None;
    VideoClip perturbed_source;
    VideoClip target;
    std::string prompt;
    PretextMeta meta;
};

// Replaces a contiguous block of round(ratio*T) frames (clamped to [1, T-1],
// start uniform) with constant 0.5 gray across the full spatial extent.
std::pair<VideoClip, CubeMeta> cube_inpaint(const VideoClip& clip, double ratio, Rng& rng);

// Stride-2 decimation of an even-length raw clip paired against its
// first-half normal-speed segment; both outputs have length T = raw.T / 2.
struct SpeedPerturbResult {
    VideoClip fast_source;
    VideoClip normal_target;
    int stride = 2;
};
SpeedPerturbResult speed_perturb(const VideoClip& raw, int factor = 2);

// Partitions the clip into the 2x2x2 grid of half-extent tubes and rearranges
// them by a uniformly random permutation; slot i of the output receives input
// tube perm[i].
std::pair<VideoClip, TubePermutation> tube_shuffle(const VideoClip& clip, Rng& rng);
VideoClip apply_tube_permutation(const VideoClip& clip, const TubePermutation& perm);
TubePermutation invert_tube_permutation(const TubePermutation& perm);

// Verbatim task token prepended to the caption; None returns it unchanged.
std::string task_prompt(PretextTask task, const std::string& caption);

// Draws None / CubeInpaint / SpeedPerturb / TubeShuffle at 0.1/0.2/0.3/0.4.
PretextTask sample_task(Rng& rng);

// Builds the full sample for a raw clip + caption: applies the transform to
// the source stream only and keeps the target side unperturbed.
PretextSample make_pretext_sample(const VideoClip& clip, const std::string& caption,
                                  PretextTask task, double cube_ratio, Rng& rng);

// Two VTensor files plus a JSON sidecar {task, prompt, meta}.
void save_pretext_sample(const std::filesystem::path& dir, const std::string& stem,
                         const PretextSample& sample);
PretextSample load_pretext_sample(const std::filesystem::path& dir, const std::string& stem);

}  // namespace sama
