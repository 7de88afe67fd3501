#include "sama/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "sama/errors.hpp"

namespace sama {

using detail::Node;

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

thread_local bool g_autograd_enabled = true;

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::int64_t d : shape) {
        if (d < 1) throw ShapeError("tensor shape has non-positive dimension " + shape_str(shape));
    }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes disagree " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// Suffix-broadcast layout: rhs must equal lhs or match its trailing dims.
// Returns the repeat count of lhs over rhs blocks.
std::int64_t broadcast_reps(const char* op, const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa == sb) return 1;
    if (sb.size() < sa.size() &&
        std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()))) {
        return numel(sa) / numel(sb);
    }
    throw ShapeError(std::string(op) + ": " + shape_str(sb) + " does not broadcast over " +
                     shape_str(sa));
}

// --- flat matmul kernels (row-major) ---------------------------------------

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const float* A, const float* B,
             float* C) {
    for (std::int64_t i = 0; i < m; ++i) {
        float* c = C + i * n;
        const float* a = A + i * k;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const float av = a[kk];
            const float* b = B + kk * n;
            for (std::int64_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const float* A, const float* B,
             float* C) {
    for (std::int64_t i = 0; i < m; ++i) {
        const float* a = A + i * k;
        float* c = C + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const float* b = B + j * k;
            float acc = 0.0f;
            for (std::int64_t kk = 0; kk < k; ++kk) acc += a[kk] * b[kk];
            c[j] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const float* A, const float* B,
             float* C) {
    for (std::int64_t kk = 0; kk < k; ++kk) {
        const float* a = A + kk * m;
        const float* b = B + kk * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const float av = a[i];
            float* c = C + i * n;
            for (std::int64_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] = A[m,k] * B[k,n] with double accumulation: the result is invariant
// (at float32 precision) to reorderings of the k dimension.
void gemm_nn_stable(std::int64_t m, std::int64_t n, std::int64_t k, const float* A, const float* B,
                    float* C) {
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* a = A + i * k;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const double av = a[kk];
            const float* b = B + kk * n;
            for (std::int64_t j = 0; j < n; ++j) acc[static_cast<std::size_t>(j)] += av * b[j];
        }
        float* c = C + i * n;
        for (std::int64_t j = 0; j < n; ++j) c[j] = static_cast<float>(acc[static_cast<std::size_t>(j)]);
    }
}

float gelu_value(float x) {
    return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f));
}

float gelu_derivative(float x) {
    const float cdf = 0.5f * (1.0f + std::erf(x * 0.70710678118654752f));
    const float pdf = std::exp(-0.5f * x * x) * 0.39894228040143268f;
    return cdf + x * pdf;
}

}  // namespace

bool autograd_enabled() { return g_autograd_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_autograd_enabled) { g_autograd_enabled = false; }
NoGradGuard::~NoGradGuard() { g_autograd_enabled = prev_; }

// --- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    validate_shape(shape);
    auto node = std::make_shared<Node>();
    node->data.assign(static_cast<std::size_t>(numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
        throw ShapeError("from_data: " + std::to_string(data.size()) +
                         " values do not fill shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stdev, bool requires_grad) {
    validate_shape(shape);
    std::vector<float> data(static_cast<std::size_t>(numel(shape)));
    for (float& v : data) v = static_cast<float>(rng.normal()) * stdev;
    return from_data(std::move(shape), std::move(data), requires_grad);
}

std::span<float> Tensor::mutable_data() {
    if (!node_->is_leaf()) throw ContractError("mutable_data: only leaf tensors may be mutated");
    return node_->data;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

float Tensor::item() const {
    if (size() != 1) throw ContractError("item: tensor has " + std::to_string(size()) + " elements");
    return node_->data[0];
}

Tensor Tensor::detached() const {
    return from_data(node_->shape, node_->data, false);
}

// --- op construction --------------------------------------------------------

Tensor make_op_output(Shape shape, const char* op, std::vector<Tensor> inputs,
                      std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->data.resize(static_cast<std::size_t>(numel(shape)));
    node->shape = std::move(shape);
    node->op = op;
    bool needs_grad = false;
    if (g_autograd_enabled) {
        for (const Tensor& in : inputs) {
            if (in.requires_grad()) {
                needs_grad = true;
                break;
            }
        }
    }
    if (needs_grad) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (const Tensor& in : inputs) node->parents.push_back(in.node());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

namespace {

// Shared implementation for the two matmul flavors.
Tensor matmul_impl(const Tensor& a, const Tensor& b, bool stable) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner dimensions disagree for " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto an = a.node();
    auto bn = b.node();
    Tensor out = make_op_output({m, n}, stable ? "matmul_stable" : "matmul", {a, b},
                                [an, bn, m, k, n](Node& self) {
                                    if (an->requires_grad) {
                                        an->ensure_grad();
                                        gemm_nt(m, k, n, self.grad.data(), bn->data.data(),
                                                an->grad.data());
                                    }
                                    if (bn->requires_grad) {
                                        bn->ensure_grad();
                                        gemm_tn(k, n, m, an->data.data(), self.grad.data(),
                                                bn->grad.data());
                                    }
                                });
    float* c = out.node()->data.data();
    if (stable) {
        gemm_nn_stable(m, n, k, a.data().data(), b.data().data(), c);
    } else {
        gemm_nn(m, n, k, a.data().data(), b.data().data(), c);
    }
    return out;
}

// Elementwise binary with suffix broadcast; op: 0 add, 1 sub, 2 mul.
template <int kOp>
Tensor binary_impl(const char* name, const Tensor& a, const Tensor& b) {
    const std::int64_t reps = broadcast_reps(name, a, b);
    const std::int64_t nb = b.size();
    auto an = a.node();
    auto bn = b.node();
    Tensor out = make_op_output(a.shape(), name, {a, b}, [an, bn, reps, nb](Node& self) {
        const float* g = self.grad.data();
        if (an->requires_grad) {
            an->ensure_grad();
            float* da = an->grad.data();
            const float* bv = bn->data.data();
            for (std::int64_t r = 0; r < reps; ++r) {
                const std::int64_t base = r * nb;
                for (std::int64_t j = 0; j < nb; ++j) {
                    if constexpr (kOp == 2) {
                        da[base + j] += g[base + j] * bv[j];
                    } else {
                        da[base + j] += g[base + j];
                    }
                }
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            float* db = bn->grad.data();
            const float* av = an->data.data();
            for (std::int64_t r = 0; r < reps; ++r) {
                const std::int64_t base = r * nb;
                for (std::int64_t j = 0; j < nb; ++j) {
                    if constexpr (kOp == 0) {
                        db[j] += g[base + j];
                    } else if constexpr (kOp == 1) {
                        db[j] -= g[base + j];
                    } else {
                        db[j] += g[base + j] * av[base + j];
                    }
                }
            }
        }
    });
    float* o = out.node()->data.data();
    const float* av = a.data().data();
    const float* bv = b.data().data();
    for (std::int64_t r = 0; r < reps; ++r) {
        const std::int64_t base = r * nb;
        for (std::int64_t j = 0; j < nb; ++j) {
            if constexpr (kOp == 0) o[base + j] = av[base + j] + bv[j];
            if constexpr (kOp == 1) o[base + j] = av[base + j] - bv[j];
            if constexpr (kOp == 2) o[base + j] = av[base + j] * bv[j];
        }
    }
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, false); }
Tensor matmul_stable(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, true); }

Tensor add(const Tensor& a, const Tensor& b) { return binary_impl<0>("add", a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_impl<1>("sub", a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_impl<2>("mul", a, b); }

Tensor scale(const Tensor& a, float s) {
    auto an = a.node();
    Tensor out = make_op_output(a.shape(), "scale", {a}, [an, s](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += s * self.grad[i];
    });
    const float* av = a.data().data();
    float* o = out.node()->data.data();
    for (std::int64_t i = 0; i < a.size(); ++i) o[i] = av[i] * s;
    return out;
}

Tensor add_scalar(const Tensor& a, float s) {
    auto an = a.node();
    Tensor out = make_op_output(a.shape(), "add_scalar", {a}, [an](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
    const float* av = a.data().data();
    float* o = out.node()->data.data();
    for (std::int64_t i = 0; i < a.size(); ++i) o[i] = av[i] + s;
    return out;
}

Tensor gelu(const Tensor& x) {
    auto xn = x.node();
    Tensor out = make_op_output(x.shape(), "gelu", {x}, [xn](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            xn->grad[i] += self.grad[i] * gelu_derivative(xn->data[i]);
        }
    });
    const float* xv = x.data().data();
    float* o = out.node()->data.data();
    for (std::int64_t i = 0; i < x.size(); ++i) o[i] = gelu_value(xv[i]);
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    const std::int64_t n = x.shape().back();
    const std::int64_t rows = x.size() / n;
    auto xn = x.node();
    Tensor out = make_op_output(x.shape(), "softmax_lastdim", {x}, [xn, n, rows](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const float* y = self.data.data() + r * n;
            const float* g = self.grad.data() + r * n;
            float* dx = xn->grad.data() + r * n;
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) dot += static_cast<double>(g[j]) * y[j];
            for (std::int64_t j = 0; j < n; ++j) {
                dx[j] += y[j] * (g[j] - static_cast<float>(dot));
            }
        }
    });
    const float* xv = x.data().data();
    float* o = out.node()->data.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* row = xv + r * n;
        float* orow = o + r * n;
        float mx = row[0];
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        const double inv = 1.0 / sum;
        for (std::int64_t j = 0; j < n; ++j) {
            orow[j] = static_cast<float>(orow[j] * inv);
        }
    }
    return out;
}

Tensor layernorm_lastdim(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    const std::int64_t n = x.shape().back();
    if (gamma.size() != n || beta.size() != n) {
        throw ShapeError("layernorm_lastdim: affine params " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match last dim of " +
                         shape_str(x.shape()));
    }
    const std::int64_t rows = x.size() / n;
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    Tensor out =
        make_op_output(x.shape(), "layernorm_lastdim", {x, gamma, beta},
                       [xn, gn, bn, n, rows, eps](Node& self) {
                           const float* gam = gn->data.data();
                           if (xn->requires_grad) xn->ensure_grad();
                           if (gn->requires_grad) gn->ensure_grad();
                           if (bn->requires_grad) bn->ensure_grad();
                           for (std::int64_t r = 0; r < rows; ++r) {
                               const float* xv = xn->data.data() + r * n;
                               const float* g = self.grad.data() + r * n;
                               double mu = 0.0;
                               for (std::int64_t j = 0; j < n; ++j) mu += xv[j];
                               mu /= static_cast<double>(n);
                               double var = 0.0;
                               for (std::int64_t j = 0; j < n; ++j) {
                                   const double d = xv[j] - mu;
                                   var += d * d;
                               }
                               var /= static_cast<double>(n);
                               const double s = std::sqrt(var + eps);
                               if (gn->requires_grad || bn->requires_grad) {
                                   for (std::int64_t j = 0; j < n; ++j) {
                                       const float xh = static_cast<float>((xv[j] - mu) / s);
                                       if (gn->requires_grad) gn->grad[static_cast<std::size_t>(j)] += g[j] * xh;
                                       if (bn->requires_grad) bn->grad[static_cast<std::size_t>(j)] += g[j];
                                   }
                               }
                               if (xn->requires_grad) {
                                   double mean_gg = 0.0, mean_ggxh = 0.0;
                                   for (std::int64_t j = 0; j < n; ++j) {
                                       const double xh = (xv[j] - mu) / s;
                                       const double gg = static_cast<double>(g[j]) * gam[j];
                                       mean_gg += gg;
                                       mean_ggxh += gg * xh;
                                   }
                                   mean_gg /= static_cast<double>(n);
                                   mean_ggxh /= static_cast<double>(n);
                                   float* dx = xn->grad.data() + r * n;
                                   for (std::int64_t j = 0; j < n; ++j) {
                                       const double xh = (xv[j] - mu) / s;
                                       const double gg = static_cast<double>(g[j]) * gam[j];
                                       dx[j] += static_cast<float>((gg - mean_gg - xh * mean_ggxh) / s);
                                   }
                               }
                           }
                       });
    const float* xv = x.data().data();
    const float* gam = gamma.data().data();
    const float* bet = beta.data().data();
    float* o = out.node()->data.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* row = xv + r * n;
        float* orow = o + r * n;
        double mu = 0.0;
        for (std::int64_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double d = row[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::int64_t j = 0; j < n; ++j) {
            orow[j] = static_cast<float>((row[j] - mu) * inv) * gam[j] + bet[j];
        }
    }
    return out;
}

Tensor mean_all(const Tensor& x) {
    const std::int64_t n = x.size();
    auto xn = x.node();
    Tensor out = make_op_output({1}, "mean_all", {x}, [xn, n](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const float g = self.grad[0] / static_cast<float>(n);
        for (float& d : xn->grad) d += g;
    });
    double sum = 0.0;
    for (float v : x.data()) sum += v;
    out.node()->data[0] = static_cast<float>(sum / static_cast<double>(n));
    return out;
}

Tensor sum_all(const Tensor& x) {
    auto xn = x.node();
    Tensor out = make_op_output({1}, "sum_all", {x}, [xn](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const float g = self.grad[0];
        for (float& d : xn->grad) d += g;
    });
    double sum = 0.0;
    for (float v : x.data()) sum += v;
    out.node()->data[0] = static_cast<float>(sum);
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    validate_shape(shape);
    if (numel(shape) != x.size()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " cannot be viewed as " +
                         shape_str(shape));
    }
    auto xn = x.node();
    Tensor out = make_op_output(std::move(shape), "reshape", {x}, [xn](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    });
    out.node()->data = std::vector<float>(x.data().begin(), x.data().end());
    return out;
}

Tensor transpose2d(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("transpose2d: expects rank-2, got " + shape_str(x.shape()));
    const std::int64_t m = x.dim(0), n = x.dim(1);
    auto xn = x.node();
    Tensor out = make_op_output({n, m}, "transpose2d", {x}, [xn, m, n](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < m; ++j) {
                xn->grad[static_cast<std::size_t>(j * n + i)] += self.grad[static_cast<std::size_t>(i * m + j)];
            }
        }
    });
    const float* xv = x.data().data();
    float* o = out.node()->data.data();
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) o[j * m + i] = xv[i * n + j];
    }
    return out;
}

Tensor concat(std::span<const Tensor> parts, int dim) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const int rank = parts[0].rank();
    if (dim < 0 || dim >= rank) throw ShapeError("concat: bad dim " + std::to_string(dim));
    Shape out_shape = parts[0].shape();
    std::int64_t total = parts[0].dim(dim);
    for (std::size_t p = 1; p < parts.size(); ++p) {
        const Shape& s = parts[p].shape();
        if (static_cast<int>(s.size()) != rank) {
            throw ShapeError("concat: rank mismatch " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(s));
        }
        for (int i = 0; i < rank; ++i) {
            if (i != dim && s[static_cast<std::size_t>(i)] != out_shape[static_cast<std::size_t>(i)]) {
                throw ShapeError("concat: shapes disagree " + shape_str(out_shape) + " vs " +
                                 shape_str(s));
            }
        }
        total += s[static_cast<std::size_t>(dim)];
    }
    out_shape[static_cast<std::size_t>(dim)] = total;

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < dim; ++i) outer *= out_shape[static_cast<std::size_t>(i)];
    for (int i = dim + 1; i < rank; ++i) inner *= out_shape[static_cast<std::size_t>(i)];

    std::vector<Tensor> inputs(parts.begin(), parts.end());
    std::vector<std::shared_ptr<Node>> pnodes;
    std::vector<std::int64_t> sizes;
    pnodes.reserve(parts.size());
    for (const Tensor& t : parts) {
        pnodes.push_back(t.node());
        sizes.push_back(t.dim(dim));
    }
    Tensor out = make_op_output(out_shape, "concat", std::move(inputs),
                                [pnodes, sizes, outer, inner, total](Node& self) {
                                    std::int64_t offset = 0;
                                    for (std::size_t p = 0; p < pnodes.size(); ++p) {
                                        const std::int64_t len = sizes[p] * inner;
                                        if (pnodes[p]->requires_grad) {
                                            pnodes[p]->ensure_grad();
                                            for (std::int64_t o = 0; o < outer; ++o) {
                                                const float* g =
                                                    self.grad.data() + o * total * inner + offset;
                                                float* dst = pnodes[p]->grad.data() + o * len;
                                                for (std::int64_t j = 0; j < len; ++j) dst[j] += g[j];
                                            }
                                        }
                                        offset += len;
                                    }
                                });
    float* o = out.node()->data.data();
    std::int64_t offset = 0;
    for (const Tensor& t : parts) {
        const std::int64_t len = t.dim(dim) * inner;
        const float* src = t.data().data();
        for (std::int64_t ou = 0; ou < outer; ++ou) {
            std::copy_n(src + ou * len, len, o + ou * total * inner + offset);
        }
        offset += len;
    }
    return out;
}

Tensor slice(const Tensor& x, int dim, std::int64_t start, std::int64_t len) {
    const int rank = x.rank();
    if (dim < 0 || dim >= rank) throw ShapeError("slice: bad dim " + std::to_string(dim));
    const std::int64_t d = x.dim(dim);
    if (len < 1 || start < 0 || start + len > d) {
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of bounds for dim " +
                         std::to_string(dim) + " of " + shape_str(x.shape()));
    }
    Shape out_shape = x.shape();
    out_shape[static_cast<std::size_t>(dim)] = len;
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < dim; ++i) outer *= x.dim(i);
    for (int i = dim + 1; i < rank; ++i) inner *= x.dim(i);

    auto xn = x.node();
    Tensor out = make_op_output(out_shape, "slice", {x},
                                [xn, outer, inner, d, start, len](Node& self) {
                                    if (!xn->requires_grad) return;
                                    xn->ensure_grad();
                                    for (std::int64_t o = 0; o < outer; ++o) {
                                        const float* g = self.grad.data() + o * len * inner;
                                        float* dst = xn->grad.data() + (o * d + start) * inner;
                                        for (std::int64_t j = 0; j < len * inner; ++j) dst[j] += g[j];
                                    }
                                });
    float* o = out.node()->data.data();
    const float* src = x.data().data();
    for (std::int64_t ou = 0; ou < outer; ++ou) {
        std::copy_n(src + (ou * d + start) * inner, len * inner, o + ou * len * inner);
    }
    return out;
}

Tensor select_rows(const Tensor& table, std::span<const int> ids) {
    if (table.rank() != 2) {
        throw ShapeError("select_rows: table must be rank-2, got " + shape_str(table.shape()));
    }
    if (ids.empty()) throw ContractError("select_rows: empty id list");
    const std::int64_t rows = table.dim(0), width = table.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= rows) {
            throw ContractError("select_rows: id " + std::to_string(id) + " outside table of " +
                                std::to_string(rows) + " rows");
        }
    }
    std::vector<int> idv(ids.begin(), ids.end());
    auto tn = table.node();
    Tensor out = make_op_output({static_cast<std::int64_t>(idv.size()), width}, "select_rows",
                                {table}, [tn, idv, width](Node& self) {
                                    if (!tn->requires_grad) return;
                                    tn->ensure_grad();
                                    for (std::size_t i = 0; i < idv.size(); ++i) {
                                        const float* g = self.grad.data() + static_cast<std::int64_t>(i) * width;
                                        float* dst = tn->grad.data() + static_cast<std::int64_t>(idv[i]) * width;
                                        for (std::int64_t j = 0; j < width; ++j) dst[j] += g[j];
                                    }
                                });
    float* o = out.node()->data.data();
    const float* src = table.data().data();
    for (std::size_t i = 0; i < idv.size(); ++i) {
        std::copy_n(src + static_cast<std::int64_t>(idv[i]) * width, width,
                    o + static_cast<std::int64_t>(i) * width);
    }
    return out;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape("l1_loss", pred, target);
    const std::int64_t n = pred.size();
    auto pn = pred.node();
    auto tn = target.node();
    Tensor out = make_op_output({1}, "l1_loss", {pred, target}, [pn, tn, n](Node& self) {
        const float g = self.grad[0] / static_cast<float>(n);
        if (pn->requires_grad) pn->ensure_grad();
        if (tn->requires_grad) tn->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) {
            const float d = pn->data[static_cast<std::size_t>(i)] - tn->data[static_cast<std::size_t>(i)];
            const float s = d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f);
            if (pn->requires_grad) pn->grad[static_cast<std::size_t>(i)] += g * s;
            if (tn->requires_grad) tn->grad[static_cast<std::size_t>(i)] -= g * s;
        }
    });
    double sum = 0.0;
    const float* p = pred.data().data();
    const float* t = target.data().data();
    for (std::int64_t i = 0; i < n; ++i) sum += std::abs(static_cast<double>(p[i]) - t[i]);
    out.node()->data[0] = static_cast<float>(sum / static_cast<double>(n));
    return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape("mse_loss", pred, target);
    const std::int64_t n = pred.size();
    auto pn = pred.node();
    auto tn = target.node();
    Tensor out = make_op_output({1}, "mse_loss", {pred, target}, [pn, tn, n](Node& self) {
        const float g = 2.0f * self.grad[0] / static_cast<float>(n);
        if (pn->requires_grad) pn->ensure_grad();
        if (tn->requires_grad) tn->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) {
            const float d = pn->data[static_cast<std::size_t>(i)] - tn->data[static_cast<std::size_t>(i)];
            if (pn->requires_grad) pn->grad[static_cast<std::size_t>(i)] += g * d;
            if (tn->requires_grad) tn->grad[static_cast<std::size_t>(i)] -= g * d;
        }
    });
    double sum = 0.0;
    const float* p = pred.data().data();
    const float* t = target.data().data();
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(p[i]) - t[i];
        sum += d * d;
    }
    out.node()->data[0] = static_cast<float>(sum / static_cast<double>(n));
    return out;
}

void backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    Node* root = loss.node().get();
    if (!root->requires_grad) return;  // constant loss: nothing to do

    // Iterative post-order DFS over grad-requiring parents; the reversed list
    // is a valid reverse-topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        bool descended = false;
        while (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            Node* done = stack.back().first;
            // Intermediate grads are per-pass scratch; leaf grads accumulate.
            if (done->is_leaf()) {
                done->ensure_grad();
            } else {
                done->grad.assign(done->data.size(), 0.0f);
            }
            order.push_back(done);
            stack.pop_back();
        }
    }

    root->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

}  // namespace sama
