#include "complearn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace complearn::ad {

namespace {

std::atomic<int64_t> g_next_node_id{1};

NodePtr new_node(int64_t numel) {
    auto n = std::make_shared<Node>();
    n->id = g_next_node_id.fetch_add(1);
    n->numel = numel;
    return n;
}

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw TensorError(std::string(op) + ": non-finite value in result");
        }
    }
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
}

}  // namespace

namespace detail {

Tensor make_op(Shape shape, std::vector<double> out, const char* op,
               std::initializer_list<const Tensor*> inputs,
               std::function<void(const std::vector<double>&, BackwardCtx&)> bw) {
    check_finite(out, op);
    NodePtr node;
    bool any_grad = false;
    for (const Tensor* t : inputs) any_grad = any_grad || t->grad_enabled();
    if (any_grad) {
        node = new_node(int64_t(out.size()));
        for (const Tensor* t : inputs) {
            if (t->grad_enabled()) node->inputs.push_back(t->node());
        }
        node->backward = std::move(bw);
    }
    return Tensor::make(std::move(shape), std::move(out), std::move(node));
}

}  // namespace detail

namespace {
inline Tensor finish(Shape shape, std::vector<double> out, const char* op,
                     std::initializer_list<const Tensor*> inputs,
                     std::function<void(const std::vector<double>&, BackwardCtx&)> bw) {
    return detail::make_op(std::move(shape), std::move(out), op, inputs, std::move(bw));
}
}  // namespace

int64_t numel_of(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw TensorError("negative dimension");
        n *= d;
    }
    return n;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    if (numel_of(shape) != int64_t(values.size())) {
        throw TensorError("tensor_new: shape/value-length mismatch");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw TensorError("tensor_new: non-finite value");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(std::move(values));
    return t;
}

Tensor Tensor::zeros(Shape shape) {
    auto n = numel_of(shape);
    return constant(std::move(shape), std::vector<double>(size_t(n), 0.0));
}

Tensor Tensor::param(const std::string& name, Shape shape, const std::vector<double>& values) {
    Tensor t = constant(std::move(shape), values);
    t.node_ = new_node(t.numel());
    t.node_->param_name = name;
    return t;
}

double Tensor::value() const {
    if (numel() != 1) throw TensorError("value(): tensor is not scalar");
    return (*data_)[0];
}

Tensor Tensor::detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
}

Tensor Tensor::make(Shape shape, std::vector<double> values, NodePtr node) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(std::move(values));
    t.node_ = std::move(node);
    return t;
}

const Tensor& GradMap::at(const std::string& name) const {
    auto it = grads.find(name);
    if (it == grads.end()) throw TensorError("GradMap: no gradient for '" + name + "'");
    return it->second;
}

std::vector<double>& BackwardCtx::grad_of(const NodePtr& n) {
    auto it = buffers.find(n.get());
    if (it == buffers.end()) {
        it = buffers.emplace(n.get(), std::vector<double>(size_t(n->numel), 0.0)).first;
    }
    return it->second;
}

GradMap backward(const Tensor& loss) {
    if (loss.numel() != 1) throw TensorError("backward: loss must be scalar");
    if (!loss.grad_enabled()) throw TensorError("backward: loss is not grad-enabled");

    // Gather the reachable tape slice.
    std::vector<NodePtr> order;
    std::map<const Node*, bool> seen;
    std::vector<NodePtr> stack{loss.node()};
    while (!stack.empty()) {
        NodePtr n = stack.back();
        stack.pop_back();
        if (seen[n.get()]) continue;
        seen[n.get()] = true;
        if (n->consumed) throw TensorError("backward: tape already consumed");
        order.push_back(n);
        for (const auto& in : n->inputs) stack.push_back(in);
    }
    std::sort(order.begin(), order.end(),
              [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });

    BackwardCtx ctx;
    ctx.grad_of(loss.node())[0] = 1.0;
    for (const NodePtr& n : order) {
        auto it = ctx.buffers.find(n.get());
        if (it == ctx.buffers.end()) continue;  // not on a path from the loss
        if (n->backward) n->backward(it->second, ctx);
    }

    GradMap out;
    for (const NodePtr& n : order) {
        if (n->param_name.empty()) continue;
        auto it = ctx.buffers.find(n.get());
        if (it == ctx.buffers.end()) continue;
        auto ins = out.grads.find(n->param_name);
        if (ins == out.grads.end()) {
            out.grads.emplace(n->param_name, Tensor::constant({int(n->numel)}, it->second));
        } else {
            std::vector<double> acc = ins->second.data();
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += it->second[i];
            ins->second = Tensor::constant({int(n->numel)}, std::move(acc));
        }
    }

    // Release the tape: drop closures and edges, refuse reuse.
    for (const NodePtr& n : order) {
        n->consumed = true;
        n->backward = nullptr;
        n->inputs.clear();
    }
    return out;
}

// ---- elementwise ----

namespace {

template <class Fwd>
Tensor binary_ew(const Tensor& a, const Tensor& b, const char* op, Fwd f,
                 std::function<void(const std::vector<double>&, BackwardCtx&)> bw) {
    require_same_shape(a, b, op);
    const auto& da = a.data();
    const auto& db = b.data();
    std::vector<double> out(da.size());
    for (size_t i = 0; i < da.size(); ++i) out[i] = f(da[i], db[i]);
    return finish(a.shape(), std::move(out), op, {&a, &b}, std::move(bw));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    NodePtr na = a.node(), nb = b.node();
    return binary_ew(a, b, "add", [](double x, double y) { return x + y; },
                     [na, nb](const std::vector<double>& g, BackwardCtx& ctx) {
                         if (na) {
                             auto& ga = ctx.grad_of(na);
                             for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         }
                         if (nb) {
                             auto& gb = ctx.grad_of(nb);
                             for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                         }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    NodePtr na = a.node(), nb = b.node();
    return binary_ew(a, b, "sub", [](double x, double y) { return x - y; },
                     [na, nb](const std::vector<double>& g, BackwardCtx& ctx) {
                         if (na) {
                             auto& ga = ctx.grad_of(na);
                             for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         }
                         if (nb) {
                             auto& gb = ctx.grad_of(nb);
                             for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                         }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    NodePtr na = a.node(), nb = b.node();
    auto da = a.data_ptr(), db = b.data_ptr();
    return binary_ew(a, b, "mul", [](double x, double y) { return x * y; },
                     [na, nb, da, db](const std::vector<double>& g, BackwardCtx& ctx) {
                         if (na) {
                             auto& ga = ctx.grad_of(na);
                             for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*db)[i];
                         }
                         if (nb) {
                             auto& gb = ctx.grad_of(nb);
                             for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * (*da)[i];
                         }
                     });
}

Tensor neg(const Tensor& a) {
    NodePtr na = a.node();
    const auto& da = a.data();
    std::vector<double> out(da.size());
    for (size_t i = 0; i < da.size(); ++i) out[i] = -da[i];
    return finish(a.shape(), std::move(out), "neg", {&a},
                  [na](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
                  });
}

Tensor relu(const Tensor& a) {
    NodePtr na = a.node();
    auto da = a.data_ptr();
    std::vector<double> out(da->size());
    for (size_t i = 0; i < da->size(); ++i) out[i] = (*da)[i] > 0.0 ? (*da)[i] : 0.0;
    return finish(a.shape(), std::move(out), "relu", {&a},
                  [na, da](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (size_t i = 0; i < g.size(); ++i) {
                          if ((*da)[i] > 0.0) ga[i] += g[i];
                      }
                  });
}

Tensor exp(const Tensor& a) {
    NodePtr na = a.node();
    const auto& da = a.data();
    auto out = std::make_shared<std::vector<double>>(da.size());
    for (size_t i = 0; i < da.size(); ++i) (*out)[i] = std::exp(da[i]);
    std::vector<double> copy = *out;
    return finish(a.shape(), std::move(copy), "exp", {&a},
                  [na, out](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*out)[i];
                  });
}

Tensor log(const Tensor& a) {
    NodePtr na = a.node();
    auto da = a.data_ptr();
    std::vector<double> out(da->size());
    for (size_t i = 0; i < da->size(); ++i) {
        if ((*da)[i] <= 0.0) throw TensorError("log: non-positive input");
        out[i] = std::log((*da)[i]);
    }
    return finish(a.shape(), std::move(out), "log", {&a},
                  [na, da](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (*da)[i];
                  });
}

Tensor scale(const Tensor& a, double s) {
    if (!std::isfinite(s)) throw TensorError("scale: non-finite factor");
    NodePtr na = a.node();
    const auto& da = a.data();
    std::vector<double> out(da.size());
    for (size_t i = 0; i < da.size(); ++i) out[i] = da[i] * s;
    return finish(a.shape(), std::move(out), "scale", {&a},
                  [na, s](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
                  });
}

// ---- matmul / transpose ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) throw TensorError("matmul: expects 2-D tensors");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) throw TensorError("matmul: inner dimension mismatch");
    auto da = a.data_ptr(), db = b.data_ptr();
    std::vector<double> out(size_t(m) * size_t(n), 0.0);
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = (*da)[size_t(i) * k + p];
            const double* brow = db->data() + size_t(p) * n;
            double* orow = out.data() + size_t(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    NodePtr na = a.node(), nb = b.node();
    return finish({m, n}, std::move(out), "matmul", {&a, &b},
                  [na, nb, da, db, m, k, n](const std::vector<double>& g, BackwardCtx& ctx) {
                      if (na) {
                          auto& ga = ctx.grad_of(na);  // g @ b^T
                          for (int i = 0; i < m; ++i)
                              for (int j = 0; j < n; ++j) {
                                  const double gv = g[size_t(i) * n + j];
                                  for (int p = 0; p < k; ++p)
                                      ga[size_t(i) * k + p] += gv * (*db)[size_t(p) * n + j];
                              }
                      }
                      if (nb) {
                          auto& gb = ctx.grad_of(nb);  // a^T @ g
                          for (int i = 0; i < m; ++i)
                              for (int p = 0; p < k; ++p) {
                                  const double av = (*da)[size_t(i) * k + p];
                                  for (int j = 0; j < n; ++j)
                                      gb[size_t(p) * n + j] += av * g[size_t(i) * n + j];
                              }
                      }
                  });
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw TensorError("transpose: expects 2-D tensor");
    const int m = a.dim(0), n = a.dim(1);
    const auto& da = a.data();
    std::vector<double> out(da.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[size_t(j) * m + i] = da[size_t(i) * n + j];
    NodePtr na = a.node();
    return finish({n, m}, std::move(out), "transpose", {&a},
                  [na, m, n](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (int i = 0; i < m; ++i)
                          for (int j = 0; j < n; ++j) ga[size_t(i) * n + j] += g[size_t(j) * m + i];
                  });
}

// ---- reductions ----

namespace {

Tensor reduce_impl(const Tensor& a, const std::vector<int>& axes, bool mean) {
    const char* op = mean ? "mean" : "sum";
    const int nd = a.ndim();
    std::vector<bool> reduced(size_t(nd), false);
    for (int ax : axes) {
        if (ax < 0 || ax >= nd) throw TensorError(std::string(op) + ": invalid axis");
        if (reduced[size_t(ax)]) throw TensorError(std::string(op) + ": duplicate axis");
        reduced[size_t(ax)] = true;
    }
    if (axes.empty()) {
        // No axes: identity copy (still recorded so gradients flow through).
        NodePtr na = a.node();
        std::vector<double> out = a.data();
        return finish(a.shape(), std::move(out), op, {&a},
                      [na](const std::vector<double>& g, BackwardCtx& ctx) {
                          auto& ga = ctx.grad_of(na);
                          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                      });
    }

    Shape out_shape;
    int64_t count = 1;
    for (int i = 0; i < nd; ++i) {
        if (reduced[size_t(i)]) count *= a.dim(i);
        else out_shape.push_back(a.dim(i));
    }
    const int64_t out_n = numel_of(out_shape);

    // Row-major strides; output index of an input element drops reduced axes.
    std::vector<int64_t> in_strides(size_t(nd), 1);
    for (int i = nd - 2; i >= 0; --i) in_strides[size_t(i)] = in_strides[size_t(i) + 1] * a.dim(i + 1);
    std::vector<int64_t> out_strides;
    {
        std::vector<int64_t> os(out_shape.size(), 1);
        for (int i = int(out_shape.size()) - 2; i >= 0; --i)
            os[size_t(i)] = os[size_t(i) + 1] * out_shape[size_t(i) + 1];
        out_strides = std::move(os);
    }
    // Per input axis: stride into the output (0 when reduced).
    std::vector<int64_t> map_stride(size_t(nd), 0);
    {
        int oi = 0;
        for (int i = 0; i < nd; ++i) {
            if (!reduced[size_t(i)]) map_stride[size_t(i)] = out_strides[size_t(oi++)];
        }
    }

    auto out_index_of = [in_strides, map_stride, nd](int64_t flat) {
        int64_t rem = flat, oidx = 0;
        for (int i = 0; i < nd; ++i) {
            int64_t c = rem / in_strides[size_t(i)];
            rem -= c * in_strides[size_t(i)];
            oidx += c * map_stride[size_t(i)];
        }
        return oidx;
    };

    const auto& da = a.data();
    std::vector<double> out(size_t(out_n), 0.0);
    for (int64_t i = 0; i < int64_t(da.size()); ++i) out[size_t(out_index_of(i))] += da[i];
    if (mean) {
        if (count == 0) throw TensorError("mean: reduction over zero elements");
        for (double& v : out) v /= double(count);
    }

    NodePtr na = a.node();
    const int64_t in_n = int64_t(da.size());
    const double inv = mean ? 1.0 / double(count) : 1.0;
    return finish(std::move(out_shape), std::move(out), op, {&a},
                  [na, in_n, inv, out_index_of](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (int64_t i = 0; i < in_n; ++i) ga[size_t(i)] += g[size_t(out_index_of(i))] * inv;
                  });
}

}  // namespace

Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes) { return reduce_impl(a, axes, false); }
Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes) { return reduce_impl(a, axes, true); }

Tensor sum_all(const Tensor& a) {
    std::vector<int> axes(size_t(a.ndim()));
    for (int i = 0; i < a.ndim(); ++i) axes[size_t(i)] = i;
    if (axes.empty()) return reduce_impl(a, {}, false);
    return reduce_impl(a, axes, false);
}

Tensor mean_all(const Tensor& a) {
    std::vector<int> axes(size_t(a.ndim()));
    for (int i = 0; i < a.ndim(); ++i) axes[size_t(i)] = i;
    if (axes.empty()) return reduce_impl(a, {}, true);
    return reduce_impl(a, axes, true);
}

Tensor reshape(const Tensor& a, Shape new_shape) {
    if (numel_of(new_shape) != a.numel()) throw TensorError("reshape: element count mismatch");
    NodePtr na = a.node();
    std::vector<double> out = a.data();
    return finish(std::move(new_shape), std::move(out), "reshape", {&a},
                  [na](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  });
}

Tensor nchw_to_cells(const Tensor& a) {
    if (a.ndim() != 4) throw TensorError("nchw_to_cells: expects 4-D tensor");
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    const int64_t hw = int64_t(h) * w;
    const auto& da = a.data();
    std::vector<double> out(da.size());
    for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic)
            for (int64_t s = 0; s < hw; ++s)
                out[size_t((int64_t(in) * hw + s) * c + ic)] =
                    da[size_t((int64_t(in) * c + ic) * hw + s)];
    NodePtr na = a.node();
    return finish({n, int(hw), c}, std::move(out), "nchw_to_cells", {&a},
                  [na, n, c, hw](const std::vector<double>& g, BackwardCtx& ctx) {
                      auto& ga = ctx.grad_of(na);
                      for (int in = 0; in < n; ++in)
                          for (int ic = 0; ic < c; ++ic)
                              for (int64_t s = 0; s < hw; ++s)
                                  ga[size_t((int64_t(in) * c + ic) * hw + s)] +=
                                      g[size_t((int64_t(in) * hw + s) * c + ic)];
                  });
}

Tensor l2_normalize(const Tensor& a) {
    if (a.ndim() < 2) throw TensorError("l2_normalize: expects at least 2-D tensor");
    const int n = a.dim(0), c = a.dim(1);
    int64_t m = 1;
    for (int i = 2; i < a.ndim(); ++i) m *= a.dim(i);
    auto da = a.data_ptr();
    auto norms = std::make_shared<std::vector<double>>(size_t(n) * size_t(m));
    std::vector<double> out(da->size());
    for (int in = 0; in < n; ++in) {
        for (int64_t im = 0; im < m; ++im) {
            double ss = 0.0;
            for (int ic = 0; ic < c; ++ic) {
                double v = (*da)[size_t((int64_t(in) * c + ic) * m + im)];
                ss += v * v;
            }
            double norm = std::sqrt(ss);
            if (norm < 1e-12) throw TensorError("l2_normalize: zero vector (dead head)");
            (*norms)[size_t(int64_t(in) * m + im)] = norm;
            for (int ic = 0; ic < c; ++ic) {
                size_t idx = size_t((int64_t(in) * c + ic) * m + im);
                out[idx] = (*da)[idx] / norm;
            }
        }
    }
    NodePtr na = a.node();
    auto dout = std::make_shared<std::vector<double>>(out);
    return finish(a.shape(), std::move(out), "l2_normalize", {&a},
                  [na, dout, norms, n, c, m](const std::vector<double>& g, BackwardCtx& ctx) {
                      // dv = (g - y * (y . g)) / ||v||
                      auto& ga = ctx.grad_of(na);
                      for (int in = 0; in < n; ++in) {
                          for (int64_t im = 0; im < m; ++im) {
                              double dot = 0.0;
                              for (int ic = 0; ic < c; ++ic) {
                                  size_t idx = size_t((int64_t(in) * c + ic) * m + im);
                                  dot += (*dout)[idx] * g[idx];
                              }
                              const double norm = (*norms)[size_t(int64_t(in) * m + im)];
                              for (int ic = 0; ic < c; ++ic) {
                                  size_t idx = size_t((int64_t(in) * c + ic) * m + im);
                                  ga[idx] += (g[idx] - (*dout)[idx] * dot) / norm;
                              }
                          }
                      }
                  });
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) throw TensorError("rowwise_dot: expects 2-D tensors");
    require_same_shape(a, b, "rowwise_dot");
    const int n = a.dim(0), c = a.dim(1);
    auto da = a.data_ptr(), db = b.data_ptr();
    std::vector<double> out(size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += (*da)[size_t(i) * c + j] * (*db)[size_t(i) * c + j];
        out[size_t(i)] = s;
    }
    NodePtr na = a.node(), nb = b.node();
    return finish({n}, std::move(out), "rowwise_dot", {&a, &b},
                  [na, nb, da, db, n, c](const std::vector<double>& g, BackwardCtx& ctx) {
                      if (na) {
                          auto& ga = ctx.grad_of(na);
                          for (int i = 0; i < n; ++i)
                              for (int j = 0; j < c; ++j)
                                  ga[size_t(i) * c + j] += g[size_t(i)] * (*db)[size_t(i) * c + j];
                      }
                      if (nb) {
                          auto& gb = ctx.grad_of(nb);
                          for (int i = 0; i < n; ++i)
                              for (int j = 0; j < c; ++j)
                                  gb[size_t(i) * c + j] += g[size_t(i)] * (*da)[size_t(i) * c + j];
                      }
                  });
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    if (eps <= 0.0) throw TensorError("grad_check: eps must be > 0");

    Tensor xp = Tensor::param("gradcheck.x", x.shape(), x.data());
    Tensor loss = f(xp);
    if (loss.numel() != 1) throw TensorError("grad_check: f must return a scalar");
    GradMap gm = backward(loss);
    std::vector<double> g_ad(size_t(x.numel()), 0.0);
    if (gm.contains("gradcheck.x")) g_ad = gm.at("gradcheck.x").data();

    double worst = 0.0;
    std::vector<double> base = x.data();
    for (size_t i = 0; i < base.size(); ++i) {
        std::vector<double> lo = base, hi = base;
        hi[i] += eps;
        lo[i] -= eps;
        double fh = f(Tensor::constant(x.shape(), hi)).value();
        double fl = f(Tensor::constant(x.shape(), lo)).value();
        double g_fd = (fh - fl) / (2.0 * eps);
        double err = std::abs(g_ad[i] - g_fd) / std::max(1.0, std::abs(g_fd));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace complearn::ad
