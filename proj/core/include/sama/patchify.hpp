#pragma once

#include <cstdint>

#include "sama/tensor.hpp"
#include "sama/video.hpp"

namespace sama {

// Invertible patch tokenizer. Each p_t x p_h x p_w x C block flattens to one
// D-vector with D = p_t*p_h*p_w*C, so token width equals the model dimension
// and unpatchify reconstructs the clip bit-exactly.
struct PatchSpec {
    int p_t = 2;
    int p_h = 4;
    int p_w = 4;
    int channels = 3;

    int token_dim() const { return p_t * p_h * p_w * channels; }
};

struct TokenGrid {
    int t = 0, h = 0, w = 0;
    std::int64_t count() const { return static_cast<std::int64_t>(t) * h * w; }
};

struct LatentTokens {
    Tensor tokens;  // [L, D], raster order: t-major, then h, then w
    TokenGrid grid;
};

TokenGrid token_grid(const PatchSpec& spec, int frames, int height, int width);

LatentTokens patchify(const VideoClip& clip, const PatchSpec& spec);
VideoClip unpatchify(const LatentTokens& tokens, const PatchSpec& spec);

// Token matrix -> clip without the [0,1] clamp or validation; used to decode
// raw sampler states. Caller clamps.
VideoClip unpatchify_raw(std::span<const float> tokens, const TokenGrid& grid,
                         const PatchSpec& spec);

}  // namespace sama
