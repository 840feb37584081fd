#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace complearn::ad {

using Shape = std::vector<int>;

int64_t numel_of(const Shape& shape);

class TensorError : public std::runtime_error {
public:
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BackwardCtx;

// One recorded operation on the tape. Nodes are created in program order;
// backward visits the reachable set exactly once in reverse creation order.
struct Node {
    int64_t id = 0;
    int64_t numel = 0;
    std::string param_name;  // non-empty for named parameter leaves
    bool consumed = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(const std::vector<double>&, BackwardCtx&)> backward;
};

using NodePtr = std::shared_ptr<Node>;

// Immutable dense f64 tensor, row-major. Grad-enabled tensors carry a tape
// node; results of ops on grad-enabled inputs are recorded automatically.
class Tensor {
public:
    Tensor() = default;

    // Plain value, no gradient tracking.
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);
    static Tensor scalar(double v) { return constant({}, {v}); }

    // Named grad-enabled leaf. Copies the values so later in-place parameter
    // updates cannot corrupt a live tape.
    static Tensor param(const std::string& name, Shape shape, const std::vector<double>& values);

    const Shape& shape() const { return shape_; }
    int dim(int i) const { return shape_[size_t(i)]; }
    int ndim() const { return int(shape_.size()); }
    int64_t numel() const { return data_ ? int64_t(data_->size()) : 0; }
    const std::vector<double>& data() const { return *data_; }
    std::shared_ptr<const std::vector<double>> data_ptr() const { return data_; }
    double value() const;  // scalar tensors only
    double at(int64_t i) const { return (*data_)[size_t(i)]; }

    bool grad_enabled() const { return node_ != nullptr; }
    const NodePtr& node() const { return node_; }

    // Same data viewed without the tape node.
    Tensor detach() const;

    // Internal: used by op implementations.
    static Tensor make(Shape shape, std::vector<double> values, NodePtr node);

private:
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    NodePtr node_;
};

// Gradients of a scalar loss keyed by parameter name. std::map keeps the
// iteration order deterministic.
struct GradMap {
    std::map<std::string, Tensor> grads;

    bool contains(const std::string& name) const { return grads.count(name) > 0; }
    const Tensor& at(const std::string& name) const;
    size_t size() const { return grads.size(); }
};

struct BackwardCtx {
    std::map<const Node*, std::vector<double>> buffers;
    std::vector<double>& grad_of(const NodePtr& n);
};

// Reverse pass over the loss tensor's tape. The tape is released afterwards;
// a second backward over the same nodes is an error.
GradMap backward(const Tensor& loss);

// ---- elementwise and structural ops ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor scale(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2-D

Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes);
Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

Tensor reshape(const Tensor& a, Shape new_shape);

// [N,C,H,W] -> [N, H*W, C]; pairs spatial cells with their channel vectors.
Tensor nchw_to_cells(const Tensor& a);

// Normalizes along axis 1: rows of [N,C], channel vectors of [N,C,...].
// A vector with norm below 1e-12 is an error (degenerate embedding).
Tensor l2_normalize(const Tensor& a);

// Per-row dot product of two [N,C] tensors -> [N].
Tensor rowwise_dot(const Tensor& a, const Tensor& b);

// ---- verification harness ----
// Central-difference gradient of f at x compared against backward().
// Returns max over components of |g_ad - g_fd| / max(1, |g_fd|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps);

namespace detail {
// Registers a custom op on the tape: checks the output for non-finite
// values, and attaches a node with the given backward closure when any
// input is grad-enabled. Layer and loss kernels build on this.
Tensor make_op(Shape shape, std::vector<double> values, const char* op,
               std::initializer_list<const Tensor*> inputs,
               std::function<void(const std::vector<double>&, BackwardCtx&)> bw);
}  // namespace detail

}  // namespace complearn::ad
