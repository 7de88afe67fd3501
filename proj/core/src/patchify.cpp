#include "sama/patchify.hpp"

#include "sama/errors.hpp"

namespace sama {

TokenGrid token_grid(const PatchSpec& spec, int frames, int height, int width) {
    if (spec.p_t < 1 || spec.p_h < 1 || spec.p_w < 1) {
        throw ContractError("patch extents must be positive");
    }
    if (frames % spec.p_t || height % spec.p_h || width % spec.p_w) {
        throw ShapeError("clip dims [" + std::to_string(frames) + "," + std::to_string(height) +
                         "," + std::to_string(width) + "] not divisible by patch [" +
                         std::to_string(spec.p_t) + "," + std::to_string(spec.p_h) + "," +
                         std::to_string(spec.p_w) + "]");
    }
    return TokenGrid{frames / spec.p_t, height / spec.p_h, width / spec.p_w};
}

LatentTokens patchify(const VideoClip& clip, const PatchSpec& spec) {
    if (clip.channels != spec.channels) {
        throw ShapeError("patchify: clip has " + std::to_string(clip.channels) +
                         " channels, spec expects " + std::to_string(spec.channels));
    }
    const TokenGrid grid = token_grid(spec, clip.frames, clip.height, clip.width);
    const int dim = spec.token_dim();
    std::vector<float> out(static_cast<std::size_t>(grid.count()) * dim);

    std::size_t pos = 0;
    for (int gt = 0; gt < grid.t; ++gt) {
        for (int gh = 0; gh < grid.h; ++gh) {
            for (int gw = 0; gw < grid.w; ++gw) {
                for (int dt = 0; dt < spec.p_t; ++dt) {
                    for (int dh = 0; dh < spec.p_h; ++dh) {
                        for (int dw = 0; dw < spec.p_w; ++dw) {
                            for (int c = 0; c < spec.channels; ++c) {
                                out[pos++] = clip.at(gt * spec.p_t + dt, gh * spec.p_h + dh,
                                                     gw * spec.p_w + dw, c);
                            }
                        }
                    }
                }
            }
        }
    }
    LatentTokens tokens;
    tokens.tokens = Tensor::from_data({grid.count(), dim}, std::move(out));
    tokens.grid = grid;
    return tokens;
}

VideoClip unpatchify_raw(std::span<const float> tokens, const TokenGrid& grid,
                         const PatchSpec& spec) {
    const int dim = spec.token_dim();
    if (static_cast<std::int64_t>(tokens.size()) != grid.count() * dim) {
        throw ShapeError("unpatchify: token payload does not match grid");
    }
    VideoClip clip;
    clip.frames = grid.t * spec.p_t;
    clip.height = grid.h * spec.p_h;
    clip.width = grid.w * spec.p_w;
    clip.channels = spec.channels;
    clip.data.resize(static_cast<std::size_t>(clip.voxels()));

    std::size_t pos = 0;
    for (int gt = 0; gt < grid.t; ++gt) {
        for (int gh = 0; gh < grid.h; ++gh) {
            for (int gw = 0; gw < grid.w; ++gw) {
                for (int dt = 0; dt < spec.p_t; ++dt) {
                    for (int dh = 0; dh < spec.p_h; ++dh) {
                        for (int dw = 0; dw < spec.p_w; ++dw) {
                            for (int c = 0; c < spec.channels; ++c) {
                                clip.at(gt * spec.p_t + dt, gh * spec.p_h + dh,
                                        gw * spec.p_w + dw, c) = tokens[pos++];
                            }
                        }
                    }
                }
            }
        }
    }
    return clip;
}

VideoClip unpatchify(const LatentTokens& tokens, const PatchSpec& spec) {
    return unpatchify_raw(tokens.tokens.data(), tokens.grid, spec);
}

}  // namespace sama
