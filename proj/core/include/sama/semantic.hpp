#pragma once

#include <cstdint>
#include <vector>

#include "sama/rng.hpp"
#include "sama/tensor.hpp"
#include "sama/video.hpp"

namespace sama {

// Frozen per-frame patch encoder standing in for a pretrained image encoder:
// a seeded linear projection of flattened patches followed by gelu and layer
// normalization. Parameters never receive gradient updates.
class FrozenEncoder {
  public:
    FrozenEncoder(int patch, int feature_dim, std::uint64_t seed);

    int patch() const { return patch_; }
    int feature_dim() const { return feature_dim_; }
    std::uint64_t seed() const { return seed_; }

    // Per-patch feature grid, rows in raster order: [h'*w', D_s] with
    // h' = H/patch, w' = W/patch. Throws ShapeError on indivisible dims.
    std::vector<float> encode_frame(const VideoClip& clip, int frame, int& grid_h,
                                    int& grid_w) const;

    // Checksum over all fixed parameters; training must never change it.
    double parameter_checksum() const;

    const std::vector<float>& weight() const { return weight_; }
    const std::vector<float>& bias() const { return bias_; }

  private:
    int patch_;
    int feature_dim_;
    std::uint64_t seed_;
    std::vector<float> weight_;  // [patch*patch*3, D_s]
    std::vector<float> bias_;    // [D_s]
    std::vector<float> ln_gamma_, ln_beta_;
};

// Stratified anchor-frame selection: [0,T) is split into N equal strata and
// one uniform index is drawn per stratum; result is strictly increasing.
std::vector<int> select_anchor_frames(int frames, int n, Rng& rng);

// Pooled-but-unprojected semantic token set for N anchor frames.
struct PooledSemantic {
    std::vector<float> values;  // [(N*M + N), D_s]; locals first, then globals
    int local_tokens = 0;       // N*M
    int global_tokens = 0;      // N
    int feature_dim = 0;
    std::vector<int> anchor_indices;
};

// Average-pools an h' x w' feature grid onto an m_h x m_w region grid with
// m_h*m_w = M, plus one global mean token. Throws ConfigError when M is not
// realizable as a region grid over (h', w').
void pool_frame_features(const std::vector<float>& features, int grid_h, int grid_w,
                         int feature_dim, int m, std::vector<float>& locals,
                         std::vector<float>& global_token);

// Full anchor path: select frames (caller supplies indices), encode each with
// the frozen encoder, pool to M locals + 1 global per frame.
PooledSemantic pool_semantic(const VideoClip& clip, std::span<const int> anchor_indices,
                             const FrozenEncoder& encoder, int m);

// Trainable two-layer projection into the model dimension.
struct SemanticProjection {
    Tensor w1, b1;  // [D_s, hidden], [hidden]
    Tensor w2, b2;  // [hidden, D]

    static SemanticProjection init(int feature_dim, int hidden, int model_dim, Rng& rng);
};

// linear -> gelu -> linear applied per token; returns [(N*M + N), D] on the tape.
Tensor project_semantic(const PooledSemantic& pooled, const SemanticProjection& proj);
Tensor project_semantic(const Tensor& tokens, const SemanticProjection& proj);

}  // namespace sama
