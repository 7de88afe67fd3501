#include "sama/dit.hpp"

#include <cmath>
#include <cstdio>

#include "sama/errors.hpp"
#include "sama/text.hpp"

namespace sama {

namespace {

constexpr float kInitStd = 0.02f;

// Sinusoidal embedding of one coordinate into `dim` slots (dim even).
void sincos_embed(float value, int dim, float* out) {
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        const double arg = static_cast<double>(value) * freq;
        out[2 * i] = static_cast<float>(std::sin(arg));
        out[2 * i + 1] = static_cast<float>(std::cos(arg));
    }
}

// [L, D] additive position table; per-segment offsets apply in shifted mode.
Tensor position_table(const AssembledSequence& seq, const DiTConfig& cfg) {
    const std::int64_t length = seq.layout.total();
    const int dim = cfg.model_dim;
    const int chunk = dim / 3;
    std::vector<float> table(static_cast<std::size_t>(length) * dim, 0.0f);
    for (std::int64_t i = 0; i < length; ++i) {
        Pos3 p = seq.positions[static_cast<std::size_t>(i)];
        if (cfg.positional == PositionalScheme::ShiftedPositions) {
            float shift = cfg.shift_source;
            if (i >= seq.layout.target_offset) {
                shift = cfg.shift_target;
            } else if (i >= seq.layout.semantic_offset && seq.layout.semantic_len > 0) {
                shift = cfg.shift_semantic;
            }
            p.t += shift;
            p.h += shift;
            p.w += shift;
        }
        float* row = &table[static_cast<std::size_t>(i) * dim];
        sincos_embed(p.t, chunk, row);
        sincos_embed(p.h, chunk, row + chunk);
        sincos_embed(p.w, chunk, row + 2 * chunk);
    }
    return Tensor::from_data({length, dim}, std::move(table));
}

Tensor timestep_features(double t, int dim) {
    std::vector<float> values(static_cast<std::size_t>(dim));
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        const double arg = t * 1000.0 * freq;
        values[static_cast<std::size_t>(i)] = static_cast<float>(std::cos(arg));
        values[static_cast<std::size_t>(half + i)] = static_cast<float>(std::sin(arg));
    }
    return Tensor::from_data({1, dim}, std::move(values));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), b);
}

// x * (1 + scale) + shift with [D] modulation vectors broadcast over rows.
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scl) {
    return add(mul(x, add_scalar(scl, 1.0f)), shift);
}

// Splits a [1, k*D] modulation row into k broadcastable [D] vectors.
std::vector<Tensor> split_modulation(const Tensor& row, int k, int dim) {
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        out.push_back(reshape(slice(row, 1, static_cast<std::int64_t>(i) * dim, dim), {dim}));
    }
    return out;
}

// Multi-head attention of queries `x` against keys/values `kv`. The
// softmax reduction and the value mixing are order-stable so that permuting
// kv rows (with matched positions) cannot perturb unrelated outputs.
Tensor attention(const Tensor& x, const Tensor& kv, int heads, const Tensor& wq, const Tensor& bq,
                 const Tensor& wk, const Tensor& bk, const Tensor& wv, const Tensor& bv,
                 const Tensor& wo, const Tensor& bo) {
    const int dim = static_cast<int>(x.dim(1));
    const int head_dim = dim / heads;
    const Tensor q = linear(x, wq, bq);
    const Tensor k = linear(kv, wk, bk);
    const Tensor v = linear(kv, wv, bv);
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(head_dim));

    std::vector<Tensor> contexts;
    contexts.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const Tensor qh = slice(q, 1, static_cast<std::int64_t>(h) * head_dim, head_dim);
        const Tensor kh = slice(k, 1, static_cast<std::int64_t>(h) * head_dim, head_dim);
        const Tensor vh = slice(v, 1, static_cast<std::int64_t>(h) * head_dim, head_dim);
        const Tensor scores = scale(matmul(qh, transpose2d(kh)), inv_sqrt);
        const Tensor attn = softmax_lastdim(scores);
        contexts.push_back(matmul_stable(attn, vh));
    }
    const Tensor ctx = concat(contexts, 1);
    return linear(ctx, wo, bo);
}

}  // namespace

const char* positional_scheme_name(PositionalScheme scheme) {
    return scheme == PositionalScheme::TypeEmbed ? "type_embed" : "shifted";
}

PositionalScheme positional_scheme_from_name(const std::string& name) {
    if (name == "type_embed") return PositionalScheme::TypeEmbed;
    if (name == "shifted") return PositionalScheme::ShiftedPositions;
    throw ConfigError("unknown positional scheme: " + name);
}

void DiTConfig::validate() const {
    if (layers < 1 || heads < 1 || model_dim < 6 || ff_dim < 1) {
        throw ConfigError("DiTConfig: non-positive dimensions");
    }
    if (model_dim % heads != 0) {
        throw ConfigError("DiTConfig: model_dim " + std::to_string(model_dim) +
                          " not divisible by heads " + std::to_string(heads));
    }
    if (model_dim % 6 != 0) {
        throw ConfigError("DiTConfig: model_dim must be divisible by 6 for 3-axis positions");
    }
}

AssembledSequence assemble_sequence(const Tensor& source_tokens, const TokenGrid& source_grid,
                                    const std::optional<Tensor>& semantic_tokens,
                                    const Tensor& target_tokens, const TokenGrid& target_grid) {
    const std::int64_t dim = source_tokens.dim(1);
    if (target_tokens.dim(1) != dim ||
        (semantic_tokens && semantic_tokens->dim(1) != dim)) {
        throw ShapeError("assemble_sequence: token widths disagree (source " +
                         shape_str(source_tokens.shape()) + ", target " +
                         shape_str(target_tokens.shape()) + ")");
    }
    if (source_tokens.dim(0) != source_grid.count() || target_tokens.dim(0) != target_grid.count()) {
        throw ShapeError("assemble_sequence: token counts do not match grids");
    }

    AssembledSequence seq;
    seq.layout.source_offset = 0;
    seq.layout.source_len = source_tokens.dim(0);
    seq.layout.semantic_offset = seq.layout.source_len;
    seq.layout.semantic_len = semantic_tokens ? semantic_tokens->dim(0) : 0;
    seq.layout.target_offset = seq.layout.semantic_offset + seq.layout.semantic_len;
    seq.layout.target_len = target_tokens.dim(0);

    std::vector<Tensor> parts;
    parts.push_back(source_tokens);
    if (semantic_tokens) parts.push_back(*semantic_tokens);
    parts.push_back(target_tokens);
    seq.tokens = concat(parts, 0);

    const std::int64_t total = seq.layout.total();
    seq.type_ids.resize(static_cast<std::size_t>(total));
    seq.positions.resize(static_cast<std::size_t>(total));

    auto fill_grid = [&seq](std::int64_t offset, const TokenGrid& grid, int type_id) {
        std::int64_t i = offset;
        for (int t = 0; t < grid.t; ++t) {
            for (int h = 0; h < grid.h; ++h) {
                for (int w = 0; w < grid.w; ++w, ++i) {
                    seq.type_ids[static_cast<std::size_t>(i)] = type_id;
                    seq.positions[static_cast<std::size_t>(i)] =
                        Pos3{static_cast<float>(t), static_cast<float>(h), static_cast<float>(w)};
                }
            }
        }
    };
    fill_grid(seq.layout.source_offset, source_grid, 0);
    for (std::int64_t i = 0; i < seq.layout.semantic_len; ++i) {
        const std::int64_t at = seq.layout.semantic_offset + i;
        seq.type_ids[static_cast<std::size_t>(at)] = 1;
        seq.positions[static_cast<std::size_t>(at)] = Pos3{static_cast<float>(i), 0.0f, 0.0f};
    }
    fill_grid(seq.layout.target_offset, target_grid, 2);
    return seq;
}

ModelParams ModelParams::init(const DiTConfig& config, const SemanticConfig& semantic,
                              std::uint64_t seed) {
    config.validate();
    const int d = config.model_dim;
    const int vocab = config.vocab_size > 0 ? config.vocab_size : text_vocab().size();
    Rng rng = Rng::substream(seed, 0xd17);

    auto w = [&rng](Shape shape) { return Tensor::randn(std::move(shape), rng, kInitStd, true); };
    auto zeros = [](Shape shape) { return Tensor::zeros(std::move(shape), true); };
    auto ones = [](Shape shape) { return Tensor::full(std::move(shape), 1.0f, true); };

    ModelParams p;
    p.in_w = w({d, d});
    p.in_b = zeros({d});
    p.type_table = zeros({3, d});
    p.instr_table = w({vocab, d});
    p.t_w1 = w({d, d});
    p.t_b1 = zeros({d});
    p.t_w2 = w({d, d});
    p.t_b2 = zeros({d});
    p.blocks.resize(static_cast<std::size_t>(config.layers));
    for (BlockParams& b : p.blocks) {
        b.ln1_g = ones({d});
        b.ln1_b = zeros({d});
        b.wq = w({d, d});
        b.bq = zeros({d});
        b.wk = w({d, d});
        b.bk = zeros({d});
        b.wv = w({d, d});
        b.bv = zeros({d});
        b.wo = w({d, d});
        b.bo = zeros({d});
        b.lnc_g = ones({d});
        b.lnc_b = zeros({d});
        b.cwq = w({d, d});
        b.cbq = zeros({d});
        b.cwk = w({d, d});
        b.cbk = zeros({d});
        b.cwv = w({d, d});
        b.cbv = zeros({d});
        b.cwo = w({d, d});
        b.cbo = zeros({d});
        b.ln2_g = ones({d});
        b.ln2_b = zeros({d});
        b.w1 = w({d, config.ff_dim});
        b.b1 = zeros({config.ff_dim});
        b.w2 = w({config.ff_dim, d});
        b.b2 = zeros({d});
        b.ada_w = zeros({d, 6 * d});
        b.ada_b = zeros({6 * d});
    }
    p.lnf_g = ones({d});
    p.lnf_b = zeros({d});
    p.adaf_w = zeros({d, 2 * d});
    p.adaf_b = zeros({2 * d});
    p.out_w = zeros({d, d});
    p.out_b = zeros({d});
    p.head_w = w({d, d});
    p.head_b = zeros({d});
    p.sem_proj = SemanticProjection::init(semantic.feature_dim, semantic.proj_hidden, d, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto put = [&out](std::string name, Tensor& t) { out.emplace_back(std::move(name), &t); };
    put("input.w", in_w);
    put("input.b", in_b);
    put("type_table", type_table);
    put("instr_table", instr_table);
    put("time.w1", t_w1);
    put("time.b1", t_b1);
    put("time.w2", t_w2);
    put("time.b2", t_b2);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "block%zu.", i);
        BlockParams& b = blocks[i];
        const std::pair<const char*, Tensor*> entries[] = {
            {"ln1.g", &b.ln1_g}, {"ln1.b", &b.ln1_b}, {"attn.wq", &b.wq}, {"attn.bq", &b.bq},
            {"attn.wk", &b.wk},  {"attn.bk", &b.bk},  {"attn.wv", &b.wv}, {"attn.bv", &b.bv},
            {"attn.wo", &b.wo},  {"attn.bo", &b.bo},  {"lnc.g", &b.lnc_g}, {"lnc.b", &b.lnc_b},
            {"cross.wq", &b.cwq}, {"cross.bq", &b.cbq}, {"cross.wk", &b.cwk}, {"cross.bk", &b.cbk},
            {"cross.wv", &b.cwv}, {"cross.bv", &b.cbv}, {"cross.wo", &b.cwo}, {"cross.bo", &b.cbo},
            {"ln2.g", &b.ln2_g}, {"ln2.b", &b.ln2_b}, {"mlp.w1", &b.w1},   {"mlp.b1", &b.b1},
            {"mlp.w2", &b.w2},   {"mlp.b2", &b.b2},   {"ada.w", &b.ada_w}, {"ada.b", &b.ada_b},
        };
        for (const auto& [suffix, tensor] : entries) put(prefix + std::string(suffix), *tensor);
    }
    put("final.ln.g", lnf_g);
    put("final.ln.b", lnf_b);
    put("final.ada.w", adaf_w);
    put("final.ada.b", adaf_b);
    put("final.out.w", out_w);
    put("final.out.b", out_b);
    put("sem_head.w", head_w);
    put("sem_head.b", head_b);
    put("sem_proj.w1", sem_proj.w1);
    put("sem_proj.b1", sem_proj.b1);
    put("sem_proj.w2", sem_proj.w2);
    put("sem_proj.b2", sem_proj.b2);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_parameters() const {
    auto mutable_view = const_cast<ModelParams*>(this)->named_parameters();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, tensor] : mutable_view) out.emplace_back(std::move(name), tensor);
    return out;
}

ForwardResult dit_forward(const ModelParams& params, const DiTConfig& config,
                          const AssembledSequence& seq, double t,
                          std::span<const int> instruction_ids) {
    config.validate();
    if (!(t >= 0.0 && t <= 1.0)) {
        throw ContractError("dit_forward: t=" + std::to_string(t) + " outside [0,1]");
    }
    if (seq.tokens.dim(1) != config.model_dim) {
        throw ShapeError("dit_forward: sequence width " + shape_str(seq.tokens.shape()) +
                         " does not match model_dim " + std::to_string(config.model_dim));
    }
    const std::int64_t vocab = params.instr_table.dim(0);
    for (int id : instruction_ids) {
        if (id < 0 || id >= vocab) {
            throw VocabError("dit_forward: instruction token id " + std::to_string(id) +
                             " outside vocabulary of " + std::to_string(vocab));
        }
    }
    const int d = config.model_dim;

    Tensor h = linear(seq.tokens, params.in_w, params.in_b);
    if (config.positional == PositionalScheme::TypeEmbed) {
        h = add(h, select_rows(params.type_table, seq.type_ids));
    }
    h = add(h, position_table(seq, config));

    const Tensor t_emb =
        linear(gelu(linear(timestep_features(t, d), params.t_w1, params.t_b1)), params.t_w2,
               params.t_b2);

    std::optional<Tensor> instr;
    if (!instruction_ids.empty()) {
        instr = select_rows(params.instr_table, instruction_ids);
    }

    for (const BlockParams& b : params.blocks) {
        const std::vector<Tensor> mods = split_modulation(
            linear(t_emb, b.ada_w, b.ada_b), 6, d);
        const Tensor& shift_sa = mods[0];
        const Tensor& scale_sa = mods[1];
        const Tensor& gate_sa = mods[2];
        const Tensor& shift_mlp = mods[3];
        const Tensor& scale_mlp = mods[4];
        const Tensor& gate_mlp = mods[5];

        const Tensor sa_in = modulate(layernorm_lastdim(h, b.ln1_g, b.ln1_b), shift_sa, scale_sa);
        const Tensor sa = attention(sa_in, sa_in, config.heads, b.wq, b.bq, b.wk, b.bk, b.wv, b.bv,
                                    b.wo, b.bo);
        h = add(h, mul(sa, gate_sa));

        if (instr) {
            const Tensor ca_in = layernorm_lastdim(h, b.lnc_g, b.lnc_b);
            const Tensor ca = attention(ca_in, *instr, config.heads, b.cwq, b.cbq, b.cwk, b.cbk,
                                        b.cwv, b.cbv, b.cwo, b.cbo);
            h = add(h, ca);
        }

        const Tensor mlp_in = modulate(layernorm_lastdim(h, b.ln2_g, b.ln2_b), shift_mlp, scale_mlp);
        const Tensor mlp = linear(gelu(linear(mlp_in, b.w1, b.b1)), b.w2, b.b2);
        h = add(h, mul(mlp, gate_mlp));
    }

    ForwardResult result;
    result.final_hidden = h;
    const std::vector<Tensor> fmods = split_modulation(
        linear(t_emb, params.adaf_w, params.adaf_b), 2, d);
    const Tensor y = modulate(layernorm_lastdim(h, params.lnf_g, params.lnf_b), fmods[0], fmods[1]);
    result.output = linear(y, params.out_w, params.out_b);
    return result;
}

VelocityReadout readout_velocity(const Tensor& output, const SequenceLayout& layout) {
    if (output.dim(0) != layout.total()) {
        throw ShapeError("readout_velocity: output rows " + shape_str(output.shape()) +
                         " do not match layout length " + std::to_string(layout.total()));
    }
    VelocityReadout readout;
    if (layout.semantic_len > 0) {
        readout.semantic = slice(output, 0, layout.semantic_offset, layout.semantic_len);
    }
    readout.target = slice(output, 0, layout.target_offset, layout.target_len);
    return readout;
}

Tensor semantic_head(const ModelParams& params, const Tensor& hidden_at_semantic) {
    return add(matmul(hidden_at_semantic, params.head_w), params.head_b);
}

DiTModel DiTModel::init(const DiTConfig& config, const SemanticConfig& semantic,
                        const PatchSpec& patch, std::uint64_t seed) {
    DiTModel model;
    model.config = config;
    model.semantic = semantic;
    model.patch = patch;
    model.params = ModelParams::init(config, semantic, seed);
    model.encoder = std::make_shared<FrozenEncoder>(semantic.encoder_patch, semantic.feature_dim,
                                                    semantic.encoder_seed);
    return model;
}

}  // namespace sama
