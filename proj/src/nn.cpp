#include "complearn/nn.hpp"

#include <cmath>

namespace complearn::nn {

using ad::BackwardCtx;
using ad::NodePtr;
using ad::Shape;
using ad::TensorError;
using ad::detail::make_op;

namespace {

// Valid output range [lo,hi) along one spatial axis so that the sampled
// input index o*stride + (k - pad) stays inside [0, in_size).
inline void valid_out_range(int out_size, int in_size, int stride, int k, int pad, int& lo,
                            int& hi) {
    const int q = k - pad;
    lo = 0;
    if (q < 0) lo = (-q + stride - 1) / stride;
    if (in_size - 1 - q < 0) {
        hi = lo;
        return;
    }
    hi = std::min(out_size, (in_size - 1 - q) / stride + 1);
    if (hi < lo) hi = lo;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x.ndim() != 4 || w.ndim() != 4 || b.ndim() != 1) {
        throw TensorError("conv2d: expects x[N,C,H,W], w[OC,C,KH,KW], b[OC]");
    }
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int oc = w.dim(0), wc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (wc != c) throw TensorError("conv2d: channel mismatch");
    if (b.dim(0) != oc) throw TensorError("conv2d: bias size mismatch");
    if (stride < 1 || pad < 0) throw TensorError("conv2d: bad stride/pad");
    if (h + 2 * pad < kh || wd + 2 * pad < kw) {
        throw TensorError("conv2d: kernel larger than padded input");
    }
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;

    auto dx = x.data_ptr();
    auto dw = w.data_ptr();
    auto db = b.data_ptr();
    std::vector<double> out(size_t(n) * oc * oh * ow);

    for (int in = 0; in < n; ++in) {
        for (int io = 0; io < oc; ++io) {
            double* oplane = out.data() + (size_t(in) * oc + io) * oh * ow;
            const double bias = (*db)[size_t(io)];
            for (int i = 0; i < oh * ow; ++i) oplane[i] = bias;
            for (int ic = 0; ic < c; ++ic) {
                const double* xplane = dx->data() + (size_t(in) * c + ic) * h * wd;
                const double* wpl = dw->data() + (size_t(io) * c + ic) * kh * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    int ylo, yhi;
                    valid_out_range(oh, h, stride, ky, pad, ylo, yhi);
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv = wpl[ky * kw + kx];
                        int xlo, xhi;
                        valid_out_range(ow, wd, stride, kx, pad, xlo, xhi);
                        for (int oy = ylo; oy < yhi; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            const double* xrow = xplane + size_t(iy) * wd + (kx - pad);
                            double* orow = oplane + size_t(oy) * ow;
                            for (int ox = xlo; ox < xhi; ++ox) {
                                orow[ox] += wv * xrow[size_t(ox) * stride];
                            }
                        }
                    }
                }
            }
        }
    }

    NodePtr nx = x.node(), nw = w.node(), nb = b.node();
    auto bw = [nx, nw, nb, dx, dw, n, c, h, wd, oc, kh, kw, oh, ow, stride,
               pad](const std::vector<double>& g, BackwardCtx& ctx) {
        if (nb) {
            auto& gb = ctx.grad_of(nb);
            for (int in = 0; in < n; ++in)
                for (int io = 0; io < oc; ++io) {
                    const double* gplane = g.data() + (size_t(in) * oc + io) * oh * ow;
                    double s = 0.0;
                    for (int i = 0; i < oh * ow; ++i) s += gplane[i];
                    gb[size_t(io)] += s;
                }
        }
        if (nw) {
            auto& gw = ctx.grad_of(nw);
            for (int in = 0; in < n; ++in)
                for (int io = 0; io < oc; ++io) {
                    const double* gplane = g.data() + (size_t(in) * oc + io) * oh * ow;
                    for (int ic = 0; ic < c; ++ic) {
                        const double* xplane = dx->data() + (size_t(in) * c + ic) * h * wd;
                        double* gwpl = gw.data() + (size_t(io) * c + ic) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            int ylo, yhi;
                            valid_out_range(oh, h, stride, ky, pad, ylo, yhi);
                            for (int kx = 0; kx < kw; ++kx) {
                                int xlo, xhi;
                                valid_out_range(ow, wd, stride, kx, pad, xlo, xhi);
                                double acc = 0.0;
                                for (int oy = ylo; oy < yhi; ++oy) {
                                    const int iy = oy * stride + ky - pad;
                                    const double* xrow = xplane + size_t(iy) * wd + (kx - pad);
                                    const double* grow = gplane + size_t(oy) * ow;
                                    for (int ox = xlo; ox < xhi; ++ox)
                                        acc += grow[ox] * xrow[size_t(ox) * stride];
                                }
                                gwpl[ky * kw + kx] += acc;
                            }
                        }
                    }
                }
        }
        if (nx) {
            auto& gx = ctx.grad_of(nx);
            for (int in = 0; in < n; ++in)
                for (int io = 0; io < oc; ++io) {
                    const double* gplane = g.data() + (size_t(in) * oc + io) * oh * ow;
                    for (int ic = 0; ic < c; ++ic) {
                        double* gxplane = gx.data() + (size_t(in) * c + ic) * h * wd;
                        const double* wpl = dw->data() + (size_t(io) * c + ic) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            int ylo, yhi;
                            valid_out_range(oh, h, stride, ky, pad, ylo, yhi);
                            for (int kx = 0; kx < kw; ++kx) {
                                const double wv = wpl[ky * kw + kx];
                                if (wv == 0.0) continue;
                                int xlo, xhi;
                                valid_out_range(ow, wd, stride, kx, pad, xlo, xhi);
                                for (int oy = ylo; oy < yhi; ++oy) {
                                    const int iy = oy * stride + ky - pad;
                                    double* gxrow = gxplane + size_t(iy) * wd + (kx - pad);
                                    const double* grow = gplane + size_t(oy) * ow;
                                    for (int ox = xlo; ox < xhi; ++ox)
                                        gxrow[size_t(ox) * stride] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
        }
    };
    return make_op({n, oc, oh, ow}, std::move(out), "conv2d", {&x, &w, &b}, std::move(bw));
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int num_groups,
                  double eps) {
    if (x.ndim() != 4) throw TensorError("group_norm: expects [N,C,H,W]");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (num_groups < 1 || c % num_groups != 0) {
        throw TensorError("group_norm: channel count not divisible by group count");
    }
    if (gamma.numel() != c || beta.numel() != c) throw TensorError("group_norm: affine size");
    const int cpg = c / num_groups;
    const int64_t hw = int64_t(h) * w;
    const int64_t gsize = int64_t(cpg) * hw;

    auto dx = x.data_ptr();
    auto dgm = gamma.data_ptr();
    const auto& dbt = beta.data();

    // x-hat plus per-(sample,group) 1/sqrt(var+eps) are saved for backward.
    auto xhat = std::make_shared<std::vector<double>>(dx->size());
    auto inv_std = std::make_shared<std::vector<double>>(size_t(n) * num_groups);

    std::vector<double> out(dx->size());
    for (int in = 0; in < n; ++in) {
        for (int ig = 0; ig < num_groups; ++ig) {
            const double* gx = dx->data() + (size_t(in) * c + size_t(ig) * cpg) * hw;
            double mean = 0.0;
            for (int64_t i = 0; i < gsize; ++i) mean += gx[i];
            mean /= double(gsize);
            double var = 0.0;
            for (int64_t i = 0; i < gsize; ++i) {
                const double d = gx[i] - mean;
                var += d * d;
            }
            var /= double(gsize);
            const double inv = 1.0 / std::sqrt(var + eps);
            (*inv_std)[size_t(in) * num_groups + ig] = inv;

            const size_t base = (size_t(in) * c + size_t(ig) * cpg) * hw;
            for (int lc = 0; lc < cpg; ++lc) {
                const int ch = ig * cpg + lc;
                const double gm = (*dgm)[size_t(ch)];
                const double bt = dbt[size_t(ch)];
                for (int64_t i = 0; i < hw; ++i) {
                    const size_t idx = base + size_t(lc) * hw + size_t(i);
                    const double xh = ((*dx)[idx] - mean) * inv;
                    (*xhat)[idx] = xh;
                    out[idx] = gm * xh + bt;
                }
            }
        }
    }

    NodePtr nx = x.node(), ng = gamma.node(), nb = beta.node();
    auto bw = [nx, ng, nb, dgm, xhat, inv_std, n, c, h, w, num_groups, cpg, hw,
               gsize](const std::vector<double>& g, BackwardCtx& ctx) {
        if (ng) {
            auto& gg = ctx.grad_of(ng);
            for (int in = 0; in < n; ++in)
                for (int ch = 0; ch < c; ++ch) {
                    const size_t base = (size_t(in) * c + ch) * hw;
                    double s = 0.0;
                    for (int64_t i = 0; i < hw; ++i) s += g[base + size_t(i)] * (*xhat)[base + size_t(i)];
                    gg[size_t(ch)] += s;
                }
        }
        if (nb) {
            auto& gb = ctx.grad_of(nb);
            for (int in = 0; in < n; ++in)
                for (int ch = 0; ch < c; ++ch) {
                    const size_t base = (size_t(in) * c + ch) * hw;
                    double s = 0.0;
                    for (int64_t i = 0; i < hw; ++i) s += g[base + size_t(i)];
                    gb[size_t(ch)] += s;
                }
        }
        if (nx) {
            auto& gx = ctx.grad_of(nx);
            for (int in = 0; in < n; ++in) {
                for (int ig = 0; ig < num_groups; ++ig) {
                    const size_t base = (size_t(in) * c + size_t(ig) * cpg) * hw;
                    const double inv = (*inv_std)[size_t(in) * num_groups + ig];
                    // ghat = dL/dxhat; two reductions then the standard form
                    double s1 = 0.0, s2 = 0.0;
                    for (int lc = 0; lc < cpg; ++lc) {
                        const double gm = (*dgm)[size_t(ig * cpg + lc)];
                        for (int64_t i = 0; i < hw; ++i) {
                            const size_t idx = base + size_t(lc) * hw + size_t(i);
                            const double gh = g[idx] * gm;
                            s1 += gh;
                            s2 += gh * (*xhat)[idx];
                        }
                    }
                    const double k1 = s1 / double(gsize);
                    const double k2 = s2 / double(gsize);
                    for (int lc = 0; lc < cpg; ++lc) {
                        const double gm = (*dgm)[size_t(ig * cpg + lc)];
                        for (int64_t i = 0; i < hw; ++i) {
                            const size_t idx = base + size_t(lc) * hw + size_t(i);
                            const double gh = g[idx] * gm;
                            gx[idx] += inv * (gh - k1 - (*xhat)[idx] * k2);
                        }
                    }
                }
            }
        }
    };
    return make_op({n, c, h, w}, std::move(out), "group_norm", {&x, &gamma, &beta}, std::move(bw));
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.ndim() != 4) throw TensorError("global_avg_pool: expects [N,C,H,W]");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h < 1 || w < 1) throw TensorError("global_avg_pool: empty spatial dims");
    const int64_t hw = int64_t(h) * w;
    const auto& dx = x.data();
    std::vector<double> out(size_t(n) * c);
    for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic) {
            const double* plane = dx.data() + (size_t(in) * c + ic) * hw;
            double s = 0.0;
            for (int64_t i = 0; i < hw; ++i) s += plane[i];
            out[size_t(in) * c + ic] = s / double(hw);
        }
    NodePtr nx = x.node();
    return make_op({n, c}, std::move(out), "global_avg_pool", {&x},
                   [nx, n, c, hw](const std::vector<double>& g, BackwardCtx& ctx) {
                       auto& gx = ctx.grad_of(nx);
                       for (int in = 0; in < n; ++in)
                           for (int ic = 0; ic < c; ++ic) {
                               const double gv = g[size_t(in) * c + ic] / double(hw);
                               double* plane = gx.data() + (size_t(in) * c + ic) * hw;
                               for (int64_t i = 0; i < hw; ++i) plane[i] += gv;
                           }
                   });
}

Tensor adaptive_avg_pool(const Tensor& x, int grid) {
    if (x.ndim() != 4) throw TensorError("adaptive_avg_pool: expects [N,C,H,W]");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (grid < 1 || grid > h || grid > w) {
        throw TensorError("adaptive_avg_pool: grid exceeds spatial size");
    }
    const auto& dx = x.data();
    std::vector<double> out(size_t(n) * c * grid * grid);
    for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic) {
            const double* plane = dx.data() + (size_t(in) * c + ic) * h * w;
            double* oplane = out.data() + (size_t(in) * c + ic) * grid * grid;
            for (int gy = 0; gy < grid; ++gy) {
                const int y0 = gy * h / grid, y1 = (gy + 1) * h / grid;
                for (int gx2 = 0; gx2 < grid; ++gx2) {
                    const int x0 = gx2 * w / grid, x1 = (gx2 + 1) * w / grid;
                    double s = 0.0;
                    for (int yy = y0; yy < y1; ++yy)
                        for (int xx = x0; xx < x1; ++xx) s += plane[size_t(yy) * w + xx];
                    oplane[size_t(gy) * grid + gx2] = s / double((y1 - y0) * (x1 - x0));
                }
            }
        }
    NodePtr nx = x.node();
    return make_op({n, c, grid, grid}, std::move(out), "adaptive_avg_pool", {&x},
                   [nx, n, c, h, w, grid](const std::vector<double>& g, BackwardCtx& ctx) {
                       auto& gx = ctx.grad_of(nx);
                       for (int in = 0; in < n; ++in)
                           for (int ic = 0; ic < c; ++ic) {
                               double* plane = gx.data() + (size_t(in) * c + ic) * h * w;
                               const double* gplane = g.data() + (size_t(in) * c + ic) * grid * grid;
                               for (int gy = 0; gy < grid; ++gy) {
                                   const int y0 = gy * h / grid, y1 = (gy + 1) * h / grid;
                                   for (int gx2 = 0; gx2 < grid; ++gx2) {
                                       const int x0 = gx2 * w / grid, x1 = (gx2 + 1) * w / grid;
                                       const double gv = gplane[size_t(gy) * grid + gx2] /
                                                         double((y1 - y0) * (x1 - x0));
                                       for (int yy = y0; yy < y1; ++yy)
                                           for (int xx = x0; xx < x1; ++xx)
                                               plane[size_t(yy) * w + xx] += gv;
                                   }
                               }
                           }
                   });
}

Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w) {
    if (x.ndim() != 4) throw TensorError("bilinear_upsample: expects [N,C,H,W]");
    if (out_h < 1 || out_w < 1) throw TensorError("bilinear_upsample: bad output size");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);

    // Corner-aligned sampling: output corners coincide with input corners.
    const double sy = out_h > 1 ? double(h - 1) / double(out_h - 1) : 0.0;
    const double sx = out_w > 1 ? double(w - 1) / double(out_w - 1) : 0.0;

    struct Tap {
        int i0, i1;
        double f;  // weight of i1
    };
    std::vector<Tap> ty(static_cast<size_t>(out_h)), tx(static_cast<size_t>(out_w));
    for (int y = 0; y < out_h; ++y) {
        double p = y * sy;
        int i0 = int(p);
        if (i0 > h - 1) i0 = h - 1;
        int i1 = std::min(i0 + 1, h - 1);
        ty[size_t(y)] = {i0, i1, p - double(i0)};
    }
    for (int xo = 0; xo < out_w; ++xo) {
        double p = xo * sx;
        int i0 = int(p);
        if (i0 > w - 1) i0 = w - 1;
        int i1 = std::min(i0 + 1, w - 1);
        tx[size_t(xo)] = {i0, i1, p - double(i0)};
    }

    const auto& dx = x.data();
    std::vector<double> out(size_t(n) * c * out_h * out_w);
    for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic) {
            const double* plane = dx.data() + (size_t(in) * c + ic) * h * w;
            double* oplane = out.data() + (size_t(in) * c + ic) * out_h * out_w;
            for (int y = 0; y < out_h; ++y) {
                const Tap& a = ty[size_t(y)];
                for (int xo = 0; xo < out_w; ++xo) {
                    const Tap& bx = tx[size_t(xo)];
                    const double v00 = plane[size_t(a.i0) * w + bx.i0];
                    const double v01 = plane[size_t(a.i0) * w + bx.i1];
                    const double v10 = plane[size_t(a.i1) * w + bx.i0];
                    const double v11 = plane[size_t(a.i1) * w + bx.i1];
                    oplane[size_t(y) * out_w + xo] = (1 - a.f) * ((1 - bx.f) * v00 + bx.f * v01) +
                                                     a.f * ((1 - bx.f) * v10 + bx.f * v11);
                }
            }
        }
    NodePtr nx = x.node();
    return make_op({n, c, out_h, out_w}, std::move(out), "bilinear_upsample", {&x},
                   [nx, n, c, h, w, out_h, out_w, ty, tx](const std::vector<double>& g,
                                                          BackwardCtx& ctx) {
                       auto& gx = ctx.grad_of(nx);
                       for (int in = 0; in < n; ++in)
                           for (int ic = 0; ic < c; ++ic) {
                               double* plane = gx.data() + (size_t(in) * c + ic) * h * w;
                               const double* gplane =
                                   g.data() + (size_t(in) * c + ic) * out_h * out_w;
                               for (int y = 0; y < out_h; ++y) {
                                   const Tap& a = ty[size_t(y)];
                                   for (int xo = 0; xo < out_w; ++xo) {
                                       const Tap& bx = tx[size_t(xo)];
                                       const double gv = gplane[size_t(y) * out_w + xo];
                                       plane[size_t(a.i0) * w + bx.i0] += (1 - a.f) * (1 - bx.f) * gv;
                                       plane[size_t(a.i0) * w + bx.i1] += (1 - a.f) * bx.f * gv;
                                       plane[size_t(a.i1) * w + bx.i0] += a.f * (1 - bx.f) * gv;
                                       plane[size_t(a.i1) * w + bx.i1] += a.f * bx.f * gv;
                                   }
                               }
                           }
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1) {
        throw TensorError("linear: expects x[N,in], w[out,in], b[out]");
    }
    const int n = x.dim(0), in_dim = x.dim(1), out_dim = w.dim(0);
    if (w.dim(1) != in_dim || b.dim(0) != out_dim) throw TensorError("linear: dimension mismatch");
    auto dx = x.data_ptr();
    auto dw = w.data_ptr();
    const auto& db = b.data();
    std::vector<double> out(size_t(n) * out_dim);
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_dim; ++o) {
            double s = db[size_t(o)];
            const double* xr = dx->data() + size_t(i) * in_dim;
            const double* wr = dw->data() + size_t(o) * in_dim;
            for (int k = 0; k < in_dim; ++k) s += xr[k] * wr[k];
            out[size_t(i) * out_dim + o] = s;
        }
    NodePtr nx = x.node(), nw = w.node(), nb = b.node();
    return make_op({n, out_dim}, std::move(out), "linear", {&x, &w, &b},
                   [nx, nw, nb, dx, dw, n, in_dim, out_dim](const std::vector<double>& g,
                                                            BackwardCtx& ctx) {
                       if (nx) {
                           auto& gx = ctx.grad_of(nx);
                           for (int i = 0; i < n; ++i)
                               for (int o = 0; o < out_dim; ++o) {
                                   const double gv = g[size_t(i) * out_dim + o];
                                   const double* wr = dw->data() + size_t(o) * in_dim;
                                   double* gxr = gx.data() + size_t(i) * in_dim;
                                   for (int k = 0; k < in_dim; ++k) gxr[k] += gv * wr[k];
                               }
                       }
                       if (nw) {
                           auto& gw = ctx.grad_of(nw);
                           for (int i = 0; i < n; ++i)
                               for (int o = 0; o < out_dim; ++o) {
                                   const double gv = g[size_t(i) * out_dim + o];
                                   const double* xr = dx->data() + size_t(i) * in_dim;
                                   double* gwr = gw.data() + size_t(o) * in_dim;
                                   for (int k = 0; k < in_dim; ++k) gwr[k] += gv * xr[k];
                               }
                       }
                       if (nb) {
                           auto& gb = ctx.grad_of(nb);
                           for (int i = 0; i < n; ++i)
                               for (int o = 0; o < out_dim; ++o) gb[size_t(o)] += g[size_t(i) * out_dim + o];
                       }
                   });
}

// ---- model spec ----

std::string task_name(Task t) {
    switch (t) {
        case Task::depth: return "depth";
        case Task::semseg: return "semseg";
        case Task::boundary: return "boundary";
    }
    return "?";
}

std::string aux_name(Aux a) {
    switch (a) {
        case Aux::none: return "none";
        case Aux::rot: return "rot";
        case Aux::moco: return "moco";
        case Aux::densecl: return "densecl";
    }
    return "?";
}

Task task_from_name(const std::string& s) {
    if (s == "depth") return Task::depth;
    if (s == "semseg") return Task::semseg;
    if (s == "boundary") return Task::boundary;
    throw TensorError("unknown task '" + s + "'");
}

Aux aux_from_name(const std::string& s) {
    if (s == "none") return Aux::none;
    if (s == "rot") return Aux::rot;
    if (s == "moco") return Aux::moco;
    if (s == "densecl") return Aux::densecl;
    throw TensorError("unknown aux '" + s + "'");
}

int task_out_channels(Task t, int seg_classes) {
    switch (t) {
        case Task::depth: return 1;
        case Task::semseg: return seg_classes;
        case Task::boundary: return 1;
    }
    return 0;
}

std::vector<ConvSpec> TrunkSpec::conv_specs() const {
    std::vector<ConvSpec> specs;
    int prev = in_ch;
    for (size_t i = 0; i < enc_channels.size(); ++i) {
        specs.push_back({"trunk.enc" + std::to_string(i + 1), prev, enc_channels[i], 3, 3, 2, 1, true});
        prev = enc_channels[i];
    }
    for (size_t i = enc_channels.size(); i-- > 0;) {
        const int out = i == 0 ? feature_dim : enc_channels[i - 1];
        specs.push_back({"trunk.dec" + std::to_string(enc_channels.size() - i), prev, out, 3, 3, 1, 1, true});
        prev = out;
    }
    return specs;
}

namespace {

void add_conv_params(ModelParams& p, Rng& rng, const std::string& name, int out_ch, int in_ch,
                     int kh, int kw, bool with_norm) {
    const double std_dev = std::sqrt(2.0 / double(in_ch * kh * kw));
    std::vector<double> wv(size_t(out_ch) * in_ch * kh * kw);
    for (auto& v : wv) v = rng.normal() * std_dev;
    p.add(name + ".w", {out_ch, in_ch, kh, kw}, std::move(wv));
    p.add(name + ".b", {out_ch}, std::vector<double>(size_t(out_ch), 0.0));
    if (with_norm) {
        p.add(name + ".gn.gamma", {out_ch}, std::vector<double>(size_t(out_ch), 1.0));
        p.add(name + ".gn.beta", {out_ch}, std::vector<double>(size_t(out_ch), 0.0));
    }
}

void add_linear_params(ModelParams& p, Rng& rng, const std::string& name, int out_dim,
                       int in_dim) {
    const double std_dev = std::sqrt(2.0 / double(in_dim));
    std::vector<double> wv(size_t(out_dim) * in_dim);
    for (auto& v : wv) v = rng.normal() * std_dev;
    p.add(name + ".w", {out_dim, in_dim}, std::move(wv));
    p.add(name + ".b", {out_dim}, std::vector<double>(size_t(out_dim), 0.0));
}

}  // namespace

ModelParams init_params(const ModelSpec& spec, uint64_t seed) {
    ModelParams p;
    Rng rng(seed);
    for (const auto& cs : spec.trunk.conv_specs()) {
        add_conv_params(p, rng, cs.name, cs.out_ch, cs.in_ch, cs.kh, cs.kw, cs.has_norm);
    }
    const int f = spec.trunk.feature_dim;
    for (Task t : spec.heads.target_tasks) {
        add_conv_params(p, rng, "head." + task_name(t),
                        task_out_channels(t, spec.heads.seg_classes), f, 1, 1, false);
    }
    switch (spec.heads.aux) {
        case Aux::none: break;
        case Aux::rot:
            add_linear_params(p, rng, "aux.rot.fc", 4, f);
            break;
        case Aux::densecl:
            add_linear_params(p, rng, "aux.moco.fc1", f, f);
            add_linear_params(p, rng, "aux.moco.fc2", spec.heads.embed_dim, f);
            add_conv_params(p, rng, "aux.dense.conv1", f, f, 1, 1, false);
            add_conv_params(p, rng, "aux.dense.conv2", spec.heads.embed_dim, f, 1, 1, false);
            break;
        case Aux::moco:
            add_linear_params(p, rng, "aux.moco.fc1", f, f);
            add_linear_params(p, rng, "aux.moco.fc2", spec.heads.embed_dim, f);
            break;
    }
    return p;
}

std::vector<std::string> key_encoder_param_names(const ModelSpec& spec, const ModelParams& p) {
    (void)spec;
    std::vector<std::string> names = p.names_with_prefix("trunk.");
    for (const auto& n : p.names_with_prefix("aux.")) names.push_back(n);
    return names;
}

Tensor trunk_forward(const ModelSpec& spec, const ParamView& pv, const Tensor& images) {
    if (images.ndim() != 4) throw TensorError("trunk_forward: expects [N,C,H,W]");
    const auto& tr = spec.trunk;
    auto specs = tr.conv_specs();
    const size_t n_enc = tr.enc_channels.size();

    std::vector<std::pair<int, int>> sizes;  // spatial size before each encoder stage
    Tensor h = images;
    for (size_t i = 0; i < n_enc; ++i) {
        sizes.emplace_back(h.dim(2), h.dim(3));
        const auto& cs = specs[i];
        h = conv2d(h, pv(cs.name + ".w"), pv(cs.name + ".b"), cs.stride, cs.pad);
        h = group_norm(h, pv(cs.name + ".gn.gamma"), pv(cs.name + ".gn.beta"), tr.gn_groups,
                       tr.gn_eps);
        h = ad::relu(h);
    }
    for (size_t i = 0; i < n_enc; ++i) {
        const auto& cs = specs[n_enc + i];
        const auto [th, tw] = sizes[n_enc - 1 - i];
        h = bilinear_upsample(h, th, tw);
        h = conv2d(h, pv(cs.name + ".w"), pv(cs.name + ".b"), cs.stride, cs.pad);
        h = group_norm(h, pv(cs.name + ".gn.gamma"), pv(cs.name + ".gn.beta"), tr.gn_groups,
                       tr.gn_eps);
        h = ad::relu(h);
    }
    return h;
}

Tensor target_head_forward(const ModelSpec& spec, const ParamView& pv, Task task,
                           const Tensor& features) {
    (void)spec;
    const std::string base = "head." + task_name(task);
    return conv2d(features, pv(base + ".w"), pv(base + ".b"), 1, 0);
}

Tensor rot_head_forward(const ModelSpec& spec, const ParamView& pv, const Tensor& features) {
    (void)spec;
    Tensor pooled = global_avg_pool(features);
    return linear(pooled, pv("aux.rot.fc.w"), pv("aux.rot.fc.b"));
}

Tensor project_global(const ModelSpec& spec, const ParamView& pv, const Tensor& features) {
    (void)spec;
    Tensor pooled = global_avg_pool(features);
    Tensor hidden = ad::relu(linear(pooled, pv("aux.moco.fc1.w"), pv("aux.moco.fc1.b")));
    Tensor embed = linear(hidden, pv("aux.moco.fc2.w"), pv("aux.moco.fc2.b"));
    return ad::l2_normalize(embed);
}

Tensor project_dense(const ModelSpec& spec, const ParamView& pv, const Tensor& features) {
    Tensor grid = adaptive_avg_pool(features, spec.heads.dense_grid);
    Tensor hidden = ad::relu(conv2d(grid, pv("aux.dense.conv1.w"), pv("aux.dense.conv1.b"), 1, 0));
    Tensor embed = conv2d(hidden, pv("aux.dense.conv2.w"), pv("aux.dense.conv2.b"), 1, 0);
    return ad::nchw_to_cells(ad::l2_normalize(embed));
}

}  // namespace complearn::nn
