#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sama/dit.hpp"
#include "sama/pretext.hpp"
#include "sama/video.hpp"

namespace sama {

struct SamplerConfig {
    int steps = 32;
    double guidance = 0.0;  // reserved, off by default
    std::uint64_t seed = 0;
    bool use_ema = false;  // resolved by the caller owning the checkpoint
    // Semantic tokens start as noise and ride the integration alongside the
    // target rows; with this off the sequence carries no semantic segment.
    bool cointegrate_semantic = true;
};

// dx/dt = field(x, t) integrated by explicit Euler over the uniform grid
// t = 0 ... 1 with dt = 1/steps. State accumulates in double so a constant
// field reproduces its endpoint. Throws TrainingError (with the step index)
// when the state stops being finite.
using VelocityField = std::function<std::vector<float>(std::span<const float>, double)>;
std::vector<float> euler_integrate(const VelocityField& field, std::span<const float> x_start,
                                   int steps);

// Decodes the target rows of a final [semantic ; target] state to a clip
// clamped to [0,1]; the semantic rows never reach the decoded video.
VideoClip decode_target_state(std::span<const float> state, std::int64_t semantic_rows,
                              const TokenGrid& grid, const PatchSpec& patch);

// Instruction-conditioned editing: clean source tokens condition the joint
// [semantic ; target] state integrated along the learned field; the target
// rows decode to the edited clip.
VideoClip edit_video(const DiTModel& model, const VideoClip& source,
                     const std::string& instruction, const SamplerConfig& cfg);

// Inference counterpart of the pretext training tasks.
VideoClip restore_pretext(const DiTModel& model, const VideoClip& perturbed, PretextTask task,
                          const std::string& caption, const SamplerConfig& cfg);

}  // namespace sama
