#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sama/patchify.hpp"
#include "sama/semantic.hpp"
#include "sama/tensor.hpp"

namespace sama {

// Segment disambiguation: learned per-role type embeddings (source 0,
// semantic 1, target 2) added at the input projection, or per-segment
// constant offsets on the positional indices.
enum class PositionalScheme { TypeEmbed, ShiftedPositions };

const char* positional_scheme_name(PositionalScheme scheme);
PositionalScheme positional_scheme_from_name(const std::string& name);

struct DiTConfig {
    int layers = 4;
    int heads = 4;
    int model_dim = 96;
    int ff_dim = 384;
    PositionalScheme positional = PositionalScheme::TypeEmbed;
    int vocab_size = 0;  // 0 = use the built-in grammar vocabulary
    // ShiftedPositions: constants added to every positional index per segment.
    float shift_source = 0.0f;
    float shift_semantic = 256.0f;
    float shift_target = 512.0f;

    void validate() const;  // model_dim divisible by heads and by 6
};

// Anchor-token geometry for Semantic Anchoring.
struct SemanticConfig {
    int anchors_n = 1;        // N
    int local_tokens_m = 64;  // M
    int feature_dim = 32;     // frozen-encoder output width
    int proj_hidden = 96;
    int encoder_patch = 2;
    std::uint64_t encoder_seed = 0x5e11a;

    int segment_len() const { return anchors_n * (local_tokens_m + 1); }
};

struct Pos3 {
    float t = 0.0f, h = 0.0f, w = 0.0f;
};

// Contiguous, non-overlapping segments covering [source ; semantic ; target].
struct SequenceLayout {
    std::int64_t source_offset = 0, source_len = 0;
    std::int64_t semantic_offset = 0, semantic_len = 0;
    std::int64_t target_offset = 0, target_len = 0;
    std::int64_t total() const { return source_len + semantic_len + target_len; }
};

struct AssembledSequence {
    Tensor tokens;  // [L, D]
    std::vector<int> type_ids;
    std::vector<Pos3> positions;
    SequenceLayout layout;
};

// Concatenates [source ; semantic ; target] with per-segment type ids,
// spatiotemporal grid positions for latent tokens (source and target share
// the same grid coordinates) and sequential indices for semantic tokens.
AssembledSequence assemble_sequence(const Tensor& source_tokens, const TokenGrid& source_grid,
                                    const std::optional<Tensor>& semantic_tokens,
                                    const Tensor& target_tokens, const TokenGrid& target_grid);

struct BlockParams {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor lnc_g, lnc_b;
    Tensor cwq, cbq, cwk, cbk, cwv, cbv, cwo, cbo;
    Tensor ln2_g, ln2_b;
    Tensor w1, b1, w2, b2;
    Tensor ada_w, ada_b;  // timestep modulation -> 6 vectors, zero-initialized
};

struct ModelParams {
    Tensor in_w, in_b;
    Tensor type_table;   // [3, D], zero-initialized
    Tensor instr_table;  // [V, D]
    Tensor t_w1, t_b1, t_w2, t_b2;
    std::vector<BlockParams> blocks;
    Tensor lnf_g, lnf_b;
    Tensor adaf_w, adaf_b;  // -> 2 vectors, zero-initialized
    Tensor out_w, out_b;    // zero-initialized: an untrained model predicts 0
    Tensor head_w, head_b;  // semantic prediction head
    SemanticProjection sem_proj;

    static ModelParams init(const DiTConfig& config, const SemanticConfig& semantic,
                            std::uint64_t seed);

    // Stable name -> tensor view used by the optimizer, EMA and checkpoints.
    std::vector<std::pair<std::string, Tensor*>> named_parameters();
    std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
};

struct ForwardResult {
    Tensor output;        // same shape as the input sequence
    Tensor final_hidden;  // activation after the last block, pre final norm
};

// Full backbone pass: input projection + segment disambiguation + additive
// sinusoidal positions + blocks of (self-attention, cross-attention to the
// instruction embeddings, gated MLP) modulated by the timestep embedding.
ForwardResult dit_forward(const ModelParams& params, const DiTConfig& config,
                          const AssembledSequence& seq, double t,
                          std::span<const int> instruction_ids);

struct VelocityReadout {
    std::optional<Tensor> semantic;  // rows of segment 1, absent when empty
    Tensor target;                   // rows of segment 2
};

// Supervised-position slices; source-segment outputs are discarded (the
// source is clean conditioning and is never noised).
VelocityReadout readout_velocity(const Tensor& output, const SequenceLayout& layout);

// Per-token linear map D -> D over final-layer hidden at semantic positions.
Tensor semantic_head(const ModelParams& params, const Tensor& hidden_at_semantic);

// Everything needed to run the model on clips.
struct DiTModel {
    DiTConfig config;
    SemanticConfig semantic;
    PatchSpec patch;
    ModelParams params;
    std::shared_ptr<const FrozenEncoder> encoder;

    static DiTModel init(const DiTConfig& config, const SemanticConfig& semantic,
                         const PatchSpec& patch, std::uint64_t seed);
};

}  // namespace sama
