#include "sama/semantic.hpp"

#include <cmath>

#include "sama/errors.hpp"

namespace sama {

FrozenEncoder::FrozenEncoder(int patch, int feature_dim, std::uint64_t seed)
    : patch_(patch), feature_dim_(feature_dim), seed_(seed) {
    if (patch < 1 || feature_dim < 1) throw ContractError("FrozenEncoder: bad configuration");
    Rng rng = Rng::substream(seed, 0x5eed);
    const int in_dim = patch * patch * 3;
    weight_.resize(static_cast<std::size_t>(in_dim) * feature_dim);
    const float stdev = 1.0f / std::sqrt(static_cast<float>(in_dim));
    for (float& w : weight_) w = static_cast<float>(rng.normal()) * stdev;
    bias_.resize(static_cast<std::size_t>(feature_dim));
    for (float& b : bias_) b = static_cast<float>(rng.normal()) * 0.1f;
    ln_gamma_.assign(static_cast<std::size_t>(feature_dim), 1.0f);
    ln_beta_.assign(static_cast<std::size_t>(feature_dim), 0.0f);
}

std::vector<float> FrozenEncoder::encode_frame(const VideoClip& clip, int frame, int& grid_h,
                                               int& grid_w) const {
    if (frame < 0 || frame >= clip.frames) throw ContractError("encode_frame: frame out of range");
    if (clip.height % patch_ || clip.width % patch_) {
        throw ShapeError("encode_frame: frame dims [" + std::to_string(clip.height) + "," +
                         std::to_string(clip.width) + "] not divisible by encoder patch " +
                         std::to_string(patch_));
    }
    grid_h = clip.height / patch_;
    grid_w = clip.width / patch_;
    const int in_dim = patch_ * patch_ * 3;
    std::vector<float> features(static_cast<std::size_t>(grid_h) * grid_w * feature_dim_);
    std::vector<float> patch_vals(static_cast<std::size_t>(in_dim));

    for (int gy = 0; gy < grid_h; ++gy) {
        for (int gx = 0; gx < grid_w; ++gx) {
            std::size_t p = 0;
            for (int dy = 0; dy < patch_; ++dy) {
                for (int dx = 0; dx < patch_; ++dx) {
                    for (int c = 0; c < 3; ++c) {
                        patch_vals[p++] = clip.at(frame, gy * patch_ + dy, gx * patch_ + dx, c);
                    }
                }
            }
            float* out = &features[static_cast<std::size_t>(gy * grid_w + gx) * feature_dim_];
            // linear -> gelu
            for (int j = 0; j < feature_dim_; ++j) {
                double acc = bias_[static_cast<std::size_t>(j)];
                for (int i = 0; i < in_dim; ++i) {
                    acc += static_cast<double>(patch_vals[static_cast<std::size_t>(i)]) *
                           weight_[static_cast<std::size_t>(i) * feature_dim_ + j];
                }
                const float x = static_cast<float>(acc);
                out[j] = 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f));
            }
            // layer normalization over the feature dim
            double mu = 0.0;
            for (int j = 0; j < feature_dim_; ++j) mu += out[j];
            mu /= feature_dim_;
            double var = 0.0;
            for (int j = 0; j < feature_dim_; ++j) {
                const double d = out[j] - mu;
                var += d * d;
            }
            var /= feature_dim_;
            const double inv = 1.0 / std::sqrt(var + 1e-5);
            for (int j = 0; j < feature_dim_; ++j) {
                out[j] = static_cast<float>((out[j] - mu) * inv) * ln_gamma_[static_cast<std::size_t>(j)] +
                         ln_beta_[static_cast<std::size_t>(j)];
            }
        }
    }
    return features;
}

double FrozenEncoder::parameter_checksum() const {
    double sum = 0.0;
    std::size_t k = 1;
    for (const auto* vec : {&weight_, &bias_, &ln_gamma_, &ln_beta_}) {
        for (float v : *vec) sum += static_cast<double>(v) * static_cast<double>(k++ % 97);
    }
    return sum;
}

std::vector<int> select_anchor_frames(int frames, int n, Rng& rng) {
    if (n < 1 || n > frames) {
        throw ContractError("select_anchor_frames: N=" + std::to_string(n) +
                            " outside [1, T=" + std::to_string(frames) + "]");
    }
    std::vector<int> indices;
    indices.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int lo = static_cast<int>((static_cast<std::int64_t>(i) * frames) / n);
        const int hi = static_cast<int>((static_cast<std::int64_t>(i + 1) * frames) / n);
        indices.push_back(lo + static_cast<int>(rng.uniform_int(hi - lo)));
    }
    return indices;
}

void pool_frame_features(const std::vector<float>& features, int grid_h, int grid_w,
                         int feature_dim, int m, std::vector<float>& locals,
                         std::vector<float>& global_token) {
    if (static_cast<std::size_t>(grid_h) * grid_w * feature_dim != features.size()) {
        throw ShapeError("pool_frame_features: feature grid size mismatch");
    }
    if (m < 1 || m > grid_h * grid_w) {
        throw ConfigError("pool_frame_features: M=" + std::to_string(m) +
                          " not realizable over a " + std::to_string(grid_h) + "x" +
                          std::to_string(grid_w) + " grid");
    }
    // Pick the most square m_h x m_w factorization with m_h | h' and m_w | w'.
    int best_mh = -1, best_mw = -1;
    for (int mh = 1; mh <= m; ++mh) {
        if (m % mh || grid_h % mh) continue;
        const int mw = m / mh;
        if (grid_w % mw) continue;
        if (best_mh < 0 || std::abs(mh - mw) < std::abs(best_mh - best_mw)) {
            best_mh = mh;
            best_mw = mw;
        }
    }
    if (best_mh < 0) {
        throw ConfigError("pool_frame_features: M=" + std::to_string(m) +
                          " has no region-grid factorization over " + std::to_string(grid_h) +
                          "x" + std::to_string(grid_w));
    }
    const int rh = grid_h / best_mh, rw = grid_w / best_mw;

    locals.assign(static_cast<std::size_t>(m) * feature_dim, 0.0f);
    for (int my = 0; my < best_mh; ++my) {
        for (int mx = 0; mx < best_mw; ++mx) {
            float* out = &locals[static_cast<std::size_t>(my * best_mw + mx) * feature_dim];
            for (int dy = 0; dy < rh; ++dy) {
                for (int dx = 0; dx < rw; ++dx) {
                    const float* f = &features[static_cast<std::size_t>(
                        ((my * rh + dy) * grid_w + mx * rw + dx)) * feature_dim];
                    for (int j = 0; j < feature_dim; ++j) out[j] += f[j];
                }
            }
            const float inv = 1.0f / static_cast<float>(rh * rw);
            for (int j = 0; j < feature_dim; ++j) out[j] *= inv;
        }
    }
    global_token.assign(static_cast<std::size_t>(feature_dim), 0.0f);
    const int total = grid_h * grid_w;
    for (int p = 0; p < total; ++p) {
        const float* f = &features[static_cast<std::size_t>(p) * feature_dim];
        for (int j = 0; j < feature_dim; ++j) global_token[static_cast<std::size_t>(j)] += f[j];
    }
    for (int j = 0; j < feature_dim; ++j) global_token[static_cast<std::size_t>(j)] /= static_cast<float>(total);
}

PooledSemantic pool_semantic(const VideoClip& clip, std::span<const int> anchor_indices,
                             const FrozenEncoder& encoder, int m) {
    if (anchor_indices.empty()) throw ContractError("pool_semantic: need at least one anchor");
    PooledSemantic pooled;
    const int n = static_cast<int>(anchor_indices.size());
    const int dim = encoder.feature_dim();
    pooled.local_tokens = n * m;
    pooled.global_tokens = n;
    pooled.feature_dim = dim;
    pooled.anchor_indices.assign(anchor_indices.begin(), anchor_indices.end());
    pooled.values.resize(static_cast<std::size_t>(n * m + n) * dim);

    std::vector<float> locals, global_token;
    for (int i = 0; i < n; ++i) {
        int gh = 0, gw = 0;
        const std::vector<float> features =
            encoder.encode_frame(clip, anchor_indices[static_cast<std::size_t>(i)], gh, gw);
        pool_frame_features(features, gh, gw, dim, m, locals, global_token);
        std::copy(locals.begin(), locals.end(),
                  pooled.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * m * dim));
        std::copy(global_token.begin(), global_token.end(),
                  pooled.values.begin() +
                      static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n * m + i) * dim));
    }
    return pooled;
}

SemanticProjection SemanticProjection::init(int feature_dim, int hidden, int model_dim, Rng& rng) {
    SemanticProjection proj;
    proj.w1 = Tensor::randn({feature_dim, hidden}, rng, 1.0f / std::sqrt(static_cast<float>(feature_dim)), true);
    proj.b1 = Tensor::zeros({hidden}, true);
    proj.w2 = Tensor::randn({hidden, model_dim}, rng, 1.0f / std::sqrt(static_cast<float>(hidden)), true);
    proj.b2 = Tensor::zeros({model_dim}, true);
    return proj;
}

Tensor project_semantic(const Tensor& tokens, const SemanticProjection& proj) {
    if (tokens.rank() != 2 || tokens.dim(1) != proj.w1.dim(0)) {
        throw ShapeError("project_semantic: tokens " + shape_str(tokens.shape()) +
                         " do not match projection input dim " + shape_str(proj.w1.shape()));
    }
    const Tensor h = gelu(add(matmul(tokens, proj.w1), proj.b1));
    return add(matmul(h, proj.w2), proj.b2);
}

Tensor project_semantic(const PooledSemantic& pooled, const SemanticProjection& proj) {
    const auto rows = static_cast<std::int64_t>(pooled.local_tokens + pooled.global_tokens);
    const Tensor raw = Tensor::from_data({rows, pooled.feature_dim}, pooled.values);
    return project_semantic(raw, proj);
}

}  // namespace sama
