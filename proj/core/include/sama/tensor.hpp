#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sama/rng.hpp"

namespace sama {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One tape node. The tape is a DAG over shared_ptr<Node>: outputs point at
// their inputs through `parents`, never the other way around, so backward
// traversal in reverse topological order visits each node exactly once.
struct Node {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // same length as data once touched by backward
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads self.grad (and self.data where the forward value is needed) and
    // accumulates into the parents' grad buffers.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return parents.empty(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    }
};

}  // namespace detail

// Thread-local autograd switch; forwards run identically with it off, they
// just skip tape construction.
bool autograd_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// Dense float32 tensor with value semantics over a shared tape node.
// Row-major flat storage; views are materialized copies.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, float stdev = 1.0f, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(node_->data.size()); }

    std::span<const float> data() const { return node_->data; }
    // In-place access for leaf tensors (parameter updates, test perturbation).
    std::span<float> mutable_data();

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const float> grad() const { return node_->grad; }
    void zero_grad();

    // Scalar read; throws ContractError on non-scalar tensors.
    float item() const;

    // Copy of the values as a fresh leaf outside any tape.
    Tensor detached() const;

    const char* op_name() const { return node_->op; }
    std::shared_ptr<detail::Node> node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op_output(Shape shape, const char* op,
                                 std::vector<Tensor> inputs,
                                 std::function<void(detail::Node&)> backward_fn);
};

// --- op suite -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// Matmul whose inner accumulation runs in double; used where the summation
// order must not leak into float32 results (attention mixing).
Tensor matmul_stable(const Tensor& a, const Tensor& b);

// add/sub/mul accept equal shapes, or a rhs whose shape is a trailing suffix
// of lhs (broadcast over the leading dimensions).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);

Tensor gelu(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
Tensor layernorm_lastdim(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         float eps = 1e-5f);

Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose2d(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, int dim);
Tensor slice(const Tensor& x, int dim, std::int64_t start, std::int64_t len);
// Row gather from a 2-D table; backward scatter-adds into the table.
Tensor select_rows(const Tensor& table, std::span<const int> ids);

// Mean absolute difference; subgradient at zero difference is 0.
Tensor l1_loss(const Tensor& pred, const Tensor& target);
// Mean squared difference.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Reverse pass from a scalar loss. Leaf gradients accumulate across calls;
// intermediate gradients are reset per call.
void backward(const Tensor& loss);

}  // namespace sama
