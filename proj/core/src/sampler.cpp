#include "sama/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "sama/errors.hpp"
#include "sama/text.hpp"

namespace sama {

std::vector<float> euler_integrate(const VelocityField& field, std::span<const float> x_start,
                                   int steps) {
    if (steps < 1) throw ContractError("euler_integrate: steps must be >= 1");
    std::vector<double> x(x_start.begin(), x_start.end());
    std::vector<float> xf(x_start.begin(), x_start.end());
    const double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        const std::vector<float> v = field(xf, t);
        if (v.size() != x.size()) {
            throw ShapeError("euler_integrate: field returned " + std::to_string(v.size()) +
                             " values for a state of " + std::to_string(x.size()));
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += dt * v[i];
            if (!std::isfinite(x[i])) {
                throw TrainingError("euler_integrate: non-finite state at step " +
                                    std::to_string(k));
            }
            xf[i] = static_cast<float>(x[i]);
        }
    }
    return xf;
}

VideoClip decode_target_state(std::span<const float> state, std::int64_t semantic_rows,
                              const TokenGrid& grid, const PatchSpec& patch) {
    const std::int64_t dim = patch.token_dim();
    const std::int64_t expected = (semantic_rows + grid.count()) * dim;
    if (static_cast<std::int64_t>(state.size()) != expected) {
        throw ShapeError("decode_target_state: state has " + std::to_string(state.size()) +
                         " values, layout needs " + std::to_string(expected));
    }
    VideoClip clip = unpatchify_raw(state.subspan(static_cast<std::size_t>(semantic_rows * dim)),
                                    grid, patch);
    for (float& v : clip.data) v = std::clamp(v, 0.0f, 1.0f);
    return clip;
}

VideoClip edit_video(const DiTModel& model, const VideoClip& source,
                     const std::string& instruction, const SamplerConfig& cfg) {
    NoGradGuard no_grad;
    const std::vector<int> instruction_ids = text_vocab().encode(instruction);
    const LatentTokens z_source = patchify(source, model.patch);
    const TokenGrid grid = z_source.grid;
    const std::int64_t dim = model.patch.token_dim();
    const std::int64_t sem_rows = cfg.cointegrate_semantic ? model.semantic.segment_len() : 0;
    const std::int64_t state_rows = sem_rows + grid.count();

    Rng rng = Rng::substream(cfg.seed, 0xed17);
    std::vector<float> x0(static_cast<std::size_t>(state_rows * dim));
    for (float& v : x0) v = static_cast<float>(rng.normal());

    const VelocityField field = [&](std::span<const float> state, double t) {
        std::optional<Tensor> sem_input;
        if (sem_rows > 0) {
            sem_input = Tensor::from_data(
                {sem_rows, dim},
                std::vector<float>(state.begin(), state.begin() + sem_rows * dim));
        }
        const Tensor target_input = Tensor::from_data(
            {grid.count(), dim}, std::vector<float>(state.begin() + sem_rows * dim, state.end()));
        const AssembledSequence seq =
            assemble_sequence(z_source.tokens, grid, sem_input, target_input, grid);
        const ForwardResult fwd =
            dit_forward(model.params, model.config, seq, t, instruction_ids);
        const VelocityReadout readout = readout_velocity(fwd.output, seq.layout);
        std::vector<float> v;
        v.reserve(state.size());
        if (readout.semantic) {
            v.insert(v.end(), readout.semantic->data().begin(), readout.semantic->data().end());
        }
        v.insert(v.end(), readout.target.data().begin(), readout.target.data().end());
        return v;
    };

    const std::vector<float> x1 = euler_integrate(field, x0, cfg.steps);
    return decode_target_state(x1, sem_rows, grid, model.patch);
}

VideoClip restore_pretext(const DiTModel& model, const VideoClip& perturbed, PretextTask task,
                          const std::string& caption, const SamplerConfig& cfg) {
    return edit_video(model, perturbed, task_prompt(task, caption), cfg);
}

}  // namespace sama
