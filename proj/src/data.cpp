#include "complearn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "complearn/params.hpp"
#include "complearn/tensor.hpp"

namespace complearn::data {

using ad::TensorError;

DomainParams shifted_domain(const DomainParams& base) {
    DomainParams b = base;
    b.palette_shift = base.palette_shift + 0.25;
    b.texture_noise_std = base.texture_noise_std * 2.0;
    b.shape_scale = base.shape_scale * 0.6;
    return b;
}

namespace {

struct ShapeDesc {
    bool ellipse = false;
    int cls = 1;
    double cy = 0, cx = 0;     // center
    double hh = 1, hw = 1;     // half extents
    double d0 = 1;             // plane depth at center
    double gy = 0, gx = 0;     // depth gradient per pixel
};

bool covers(const ShapeDesc& s, int y, int x) {
    const double dy = (double(y) - s.cy) / s.hh;
    const double dx = (double(x) - s.cx) / s.hw;
    if (s.ellipse) return dy * dy + dx * dx <= 1.0;
    return std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
}

double depth_at(const ShapeDesc& s, int y, int x) {
    return s.d0 + s.gy * (double(y) - s.cy) + s.gx * (double(x) - s.cx);
}

// Fixed class palette: hue wheel at moderate saturation.
void class_color(int cls, int class_count, double rgb[3]) {
    const double hue = double(cls) / double(class_count) * 6.0;
    const double v = 0.8, sat = cls == 0 ? 0.15 : 0.6;
    const int sector = int(hue) % 6;
    const double f = hue - std::floor(hue);
    const double p = v * (1 - sat), q = v * (1 - sat * f), t = v * (1 - sat * (1 - f));
    switch (sector) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

}  // namespace

SyntheticSample gen_scene(uint64_t seed, const DomainParams& params) {
    if (!params.valid()) throw TensorError("gen_scene: invalid domain params");
    Rng rng(seed);
    const int h = params.h, w = params.w;
    const double near = params.depth_near, far = params.depth_far;
    const double range = far - near;

    const int span = params.max_shapes - params.min_shapes + 1;
    const int n_shapes = params.min_shapes + int(rng.uniform_int(uint64_t(span)));

    std::vector<ShapeDesc> shapes;
    for (int si = 0; si < n_shapes; ++si) {
        ShapeDesc s;
        // Rejection loop: resample until the shape covers at least one pixel.
        for (int attempt = 0; attempt < 32; ++attempt) {
            s.ellipse = rng.bernoulli(0.5);
            s.cls = 1 + int(rng.uniform_int(uint64_t(params.class_count - 1)));
            s.cy = rng.uniform(0.0, double(h));
            s.cx = rng.uniform(0.0, double(w));
            const double max_half = std::max(2.0, double(std::min(h, w)) / 3.0);
            s.hh = std::max(1.0, rng.uniform(2.0, max_half) * params.shape_scale);
            s.hw = std::max(1.0, rng.uniform(2.0, max_half) * params.shape_scale);
            s.d0 = rng.uniform(near + 0.15 * range, far - 0.15 * range);
            if (rng.bernoulli(0.5)) {
                // Planar gradient bounded so the plane stays inside (near, far).
                const double margin = 0.9 * std::min(s.d0 - near, far - s.d0);
                const double extent = s.hh + s.hw;
                const double mag = rng.uniform(0.0, margin / extent);
                const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                s.gy = mag * std::sin(ang);
                s.gx = mag * std::cos(ang);
            } else {
                s.gy = s.gx = 0.0;
            }
            bool any = false;
            for (int y = 0; y < h && !any; ++y)
                for (int x = 0; x < w && !any; ++x) any = covers(s, y, x);
            if (any) break;
        }
        shapes.push_back(s);
    }

    SyntheticSample out;
    out.h = h;
    out.w = w;
    out.image.assign(size_t(3) * h * w, 0.0);
    out.depth = {h, w, std::vector<double>(size_t(h) * w, far)};
    out.seg = {h, w, std::vector<int>(size_t(h) * w, 0)};
    out.boundary = {h, w, std::vector<uint8_t>(size_t(h) * w, 0)};

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t p = size_t(y) * w + x;
            double best_d = far;
            int best_cls = 0;
            for (const auto& s : shapes) {
                if (!covers(s, y, x)) continue;
                const double d = depth_at(s, y, x);
                if (d < best_d) {
                    best_d = d;
                    best_cls = s.cls;
                }
            }
            out.depth.values[p] = best_d;
            out.seg.labels[p] = best_cls;
        }
    }

    // Boundary = 4-connectivity label discontinuities of the class map.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int c = out.seg.labels[size_t(y) * w + x];
            const bool edge = (y > 0 && out.seg.labels[size_t(y - 1) * w + x] != c) ||
                              (y + 1 < h && out.seg.labels[size_t(y + 1) * w + x] != c) ||
                              (x > 0 && out.seg.labels[size_t(y) * w + x - 1] != c) ||
                              (x + 1 < w && out.seg.labels[size_t(y) * w + x + 1] != c);
            out.boundary.mask[size_t(y) * w + x] = edge ? 1 : 0;
        }
    }

    // Base class color, shaded by depth, plus texture noise.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t p = size_t(y) * w + x;
            double rgb[3];
            class_color(out.seg.labels[p], params.class_count, rgb);
            const double shade = 1.0 - 0.35 * (out.depth.values[p] - near) / range;
            for (int ch = 0; ch < 3; ++ch) {
                double v = rgb[ch] * shade + params.palette_shift +
                           rng.normal() * params.texture_noise_std;
                out.image[size_t(ch) * h * w + p] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

std::vector<SyntheticSample> make_dataset(int n, uint64_t seed, const DomainParams& params) {
    std::vector<SyntheticSample> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(gen_scene(Rng::derive(seed, uint64_t(i)).next_u64(), params));
    }
    return out;
}

std::vector<int> make_splits(int n, double fraction, uint64_t seed) {
    if (n < 1) throw TensorError("make_splits: dataset size must be >= 1");
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw TensorError("make_splits: fraction outside (0,1]");
    }
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[size_t(i)] = i;
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = int(rng.uniform_int(uint64_t(i + 1)));
        std::swap(perm[size_t(i)], perm[size_t(j)]);
    }
    const int take = int(std::ceil(fraction * double(n)));
    perm.resize(size_t(std::min(take, n)));
    return perm;
}

// ---- target augmentation ----

double target_scale_factor(int scale_idx) { return 0.5 + 0.25 * double(scale_idx); }

TargetAugmentOps draw_target_augment(Rng& rng) {
    TargetAugmentOps ops;
    ops.flip = rng.bernoulli(0.5);
    ops.scale_idx = int(rng.uniform_int(7));
    ops.crop_y_draw = uint32_t(rng.next_u64() & 0xffffffffu);
    ops.crop_x_draw = uint32_t(rng.next_u64() & 0xffffffffu);
    return ops;
}

namespace {

// Corner-aligned source coordinate for resampling.
inline double src_coord(int dst, int dst_size, int src_size) {
    if (dst_size <= 1) return 0.0;
    return double(dst) * double(src_size - 1) / double(dst_size - 1);
}

std::vector<double> resample_bilinear(const std::vector<double>& src, int channels, int h, int w,
                                      int nh, int nw) {
    std::vector<double> out(size_t(channels) * nh * nw);
    for (int c = 0; c < channels; ++c) {
        const double* plane = src.data() + size_t(c) * h * w;
        double* oplane = out.data() + size_t(c) * nh * nw;
        for (int y = 0; y < nh; ++y) {
            const double fy = src_coord(y, nh, h);
            const int y0 = std::min(int(fy), h - 1), y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - double(y0);
            for (int x = 0; x < nw; ++x) {
                const double fx = src_coord(x, nw, w);
                const int x0 = std::min(int(fx), w - 1), x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - double(x0);
                oplane[size_t(y) * nw + x] =
                    (1 - wy) * ((1 - wx) * plane[size_t(y0) * w + x0] + wx * plane[size_t(y0) * w + x1]) +
                    wy * ((1 - wx) * plane[size_t(y1) * w + x0] + wx * plane[size_t(y1) * w + x1]);
            }
        }
    }
    return out;
}

template <typename T>
std::vector<T> resample_nearest(const std::vector<T>& src, int h, int w, int nh, int nw) {
    std::vector<T> out(size_t(nh) * nw);
    for (int y = 0; y < nh; ++y) {
        const int sy = std::min(h - 1, int(std::lround(src_coord(y, nh, h))));
        for (int x = 0; x < nw; ++x) {
            const int sx = std::min(w - 1, int(std::lround(src_coord(x, nw, w))));
            out[size_t(y) * nw + x] = src[size_t(sy) * w + sx];
        }
    }
    return out;
}

template <typename T>
void flip_horizontal(std::vector<T>& v, int channels, int h, int w) {
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y) {
            T* row = v.data() + (size_t(c) * h + y) * w;
            std::reverse(row, row + w);
        }
}

}  // namespace

SyntheticSample apply_target_augment(const SyntheticSample& s, const TargetAugmentOps& ops) {
    const int h = s.h, w = s.w;
    SyntheticSample a = s;

    if (ops.flip) {
        flip_horizontal(a.image, 3, h, w);
        flip_horizontal(a.depth.values, 1, h, w);
        flip_horizontal(a.seg.labels, 1, h, w);
        flip_horizontal(a.boundary.mask, 1, h, w);
    }

    const double scale = target_scale_factor(ops.scale_idx);
    const int nh = std::max(1, int(std::lround(double(h) * scale)));
    const int nw = std::max(1, int(std::lround(double(w) * scale)));
    if (nh != h || nw != w) {
        a.image = resample_bilinear(a.image, 3, h, w, nh, nw);
        a.depth.values = resample_bilinear(a.depth.values, 1, h, w, nh, nw);
        a.seg.labels = resample_nearest(a.seg.labels, h, w, nh, nw);
        a.boundary.mask = resample_nearest(a.boundary.mask, h, w, nh, nw);
    }
    // Geometric consistency: doubling the image halves the apparent depth.
    for (auto& d : a.depth.values) d /= scale;

    // Crop back when larger, center-pad when smaller.
    const double pad_depth = *std::max_element(a.depth.values.begin(), a.depth.values.end());
    SyntheticSample out;
    out.h = h;
    out.w = w;
    out.image.assign(size_t(3) * h * w, 0.0);
    out.depth = {h, w, std::vector<double>(size_t(h) * w, pad_depth)};
    out.seg = {h, w, std::vector<int>(size_t(h) * w, 0)};
    out.boundary = {h, w, std::vector<uint8_t>(size_t(h) * w, 0)};

    const int off_y = nh > h ? int(ops.crop_y_draw % uint32_t(nh - h + 1)) : -(h - nh) / 2;
    const int off_x = nw > w ? int(ops.crop_x_draw % uint32_t(nw - w + 1)) : -(w - nw) / 2;
    for (int y = 0; y < h; ++y) {
        const int sy = y + off_y;
        if (sy < 0 || sy >= nh) continue;
        for (int x = 0; x < w; ++x) {
            const int sx = x + off_x;
            if (sx < 0 || sx >= nw) continue;
            for (int c = 0; c < 3; ++c)
                out.image[(size_t(c) * h + y) * w + x] = a.image[(size_t(c) * nh + sy) * nw + sx];
            out.depth.values[size_t(y) * w + x] = a.depth.values[size_t(sy) * nw + sx];
            out.seg.labels[size_t(y) * w + x] = a.seg.labels[size_t(sy) * nw + sx];
            out.boundary.mask[size_t(y) * w + x] = a.boundary.mask[size_t(sy) * nw + sx];
        }
    }
    return out;
}

SyntheticSample target_augment(const SyntheticSample& s, uint64_t seed) {
    Rng rng(seed);
    return apply_target_augment(s, draw_target_augment(rng));
}

// ---- ssl augmentation ----

SslPairOps draw_ssl_pair(Rng& rng, int img_h, int img_w, const CropGeometry& geom) {
    if (geom.crop_h + geom.offset > img_h || geom.crop_w + geom.offset > img_w) {
        throw TensorError("ssl_augment_pair: crop geometry does not fit image");
    }
    SslPairOps ops;
    ops.corner_y = int(rng.uniform_int(uint64_t(img_h - geom.crop_h - geom.offset + 1)));
    ops.corner_x = int(rng.uniform_int(uint64_t(img_w - geom.crop_w - geom.offset + 1)));
    for (ViewJitter* v : {&ops.view_q, &ops.view_k}) {
        v->flip = rng.bernoulli(0.5);
        v->brightness = rng.uniform(-0.2, 0.2);
        v->contrast = rng.uniform(-0.2, 0.2);
        v->blur = rng.bernoulli(0.5);
        v->blur_sigma = rng.uniform(0.1, 1.0);
    }
    return ops;
}

namespace {

std::vector<double> crop_image(const std::vector<double>& image, int h, int w, int cy, int cx,
                               int ch, int cw) {
    std::vector<double> out(size_t(3) * ch * cw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x)
                out[(size_t(c) * ch + y) * cw + x] = image[(size_t(c) * h + cy + y) * w + cx + x];
    return out;
}

void gaussian_blur(std::vector<double>& img, int h, int w, double sigma) {
    const int radius = std::max(1, int(std::ceil(2.0 * sigma)));
    std::vector<double> kernel(size_t(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[size_t(i + radius)] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
        ksum += kernel[size_t(i + radius)];
    }
    for (auto& k : kernel) k /= ksum;

    std::vector<double> tmp(size_t(h) * w);
    for (int c = 0; c < 3; ++c) {
        double* plane = img.data() + size_t(c) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, w - 1);
                    s += kernel[size_t(i + radius)] * plane[size_t(y) * w + xx];
                }
                tmp[size_t(y) * w + x] = s;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, h - 1);
                    s += kernel[size_t(i + radius)] * tmp[size_t(yy) * w + x];
                }
                plane[size_t(y) * w + x] = s;
            }
    }
}

}  // namespace

std::vector<double> jitter_image(const std::vector<double>& image, int h, int w,
                                 const ViewJitter& jit) {
    std::vector<double> v = image;
    if (jit.flip) flip_horizontal(v, 3, h, w);
    for (auto& px : v) {
        px = std::clamp((px - 0.5) * (1.0 + jit.contrast) + 0.5 + jit.brightness, 0.0, 1.0);
    }
    if (jit.blur) gaussian_blur(v, h, w, jit.blur_sigma);
    return v;
}

SslViewPair apply_ssl_pair(const std::vector<double>& image, int h, int w,
                           const CropGeometry& geom, const SslPairOps& ops) {
    SslViewPair out;
    auto q = crop_image(image, h, w, ops.corner_y, ops.corner_x, geom.crop_h, geom.crop_w);
    auto k = crop_image(image, h, w, ops.corner_y + geom.offset, ops.corner_x + geom.offset,
                        geom.crop_h, geom.crop_w);
    out.view_q = jitter_image(q, geom.crop_h, geom.crop_w, ops.view_q);
    out.view_k = jitter_image(k, geom.crop_h, geom.crop_w, ops.view_k);
    return out;
}

SslViewPair ssl_augment_pair(const std::vector<double>& image, int h, int w,
                             const CropGeometry& geom, uint64_t seed) {
    Rng rng(seed);
    return apply_ssl_pair(image, h, w, geom, draw_ssl_pair(rng, h, w, geom));
}

// ---- dump / load ----

void dataset_save(const std::string& path_prefix, const std::vector<SyntheticSample>& samples,
                  const DomainParams& params) {
    nlohmann::json j;
    j["count"] = samples.size();
    j["h"] = params.h;
    j["w"] = params.w;
    j["class_count"] = params.class_count;
    j["depth_near"] = params.depth_near;
    j["depth_far"] = params.depth_far;
    j["min_shapes"] = params.min_shapes;
    j["max_shapes"] = params.max_shapes;
    j["texture_noise_std"] = params.texture_noise_std;
    j["palette_shift"] = params.palette_shift;
    j["shape_scale"] = params.shape_scale;
    {
        std::ofstream os(path_prefix + ".json");
        if (!os) throw TensorError("dataset_save: cannot open " + path_prefix + ".json");
        os << j.dump(2) << "\n";
    }
    std::ofstream os(path_prefix + ".bin", std::ios::binary);
    if (!os) throw TensorError("dataset_save: cannot open " + path_prefix + ".bin");
    for (const auto& s : samples) {
        nn::io::write_f64_vec(os, s.image);
        nn::io::write_f64_vec(os, s.depth.values);
        nn::io::write_u64(os, s.seg.labels.size());
        for (int l : s.seg.labels) nn::io::write_u64(os, uint64_t(l));
        nn::io::write_u64(os, s.boundary.mask.size());
        for (uint8_t b : s.boundary.mask) nn::io::write_u64(os, b);
    }
}

std::vector<SyntheticSample> dataset_load(const std::string& path_prefix,
                                          DomainParams* params_out) {
    std::ifstream js(path_prefix + ".json");
    if (!js) throw TensorError("dataset_load: cannot open " + path_prefix + ".json");
    nlohmann::json j;
    js >> j;
    DomainParams params;
    params.h = j.at("h").get<int>();
    params.w = j.at("w").get<int>();
    params.class_count = j.at("class_count").get<int>();
    params.depth_near = j.at("depth_near").get<double>();
    params.depth_far = j.at("depth_far").get<double>();
    params.min_shapes = j.at("min_shapes").get<int>();
    params.max_shapes = j.at("max_shapes").get<int>();
    params.texture_noise_std = j.at("texture_noise_std").get<double>();
    params.palette_shift = j.at("palette_shift").get<double>();
    params.shape_scale = j.at("shape_scale").get<double>();
    if (params_out) *params_out = params;

    const size_t count = j.at("count").get<size_t>();
    std::ifstream is(path_prefix + ".bin", std::ios::binary);
    if (!is) throw TensorError("dataset_load: cannot open " + path_prefix + ".bin");
    std::vector<SyntheticSample> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        SyntheticSample s;
        s.h = params.h;
        s.w = params.w;
        s.image = nn::io::read_f64_vec(is);
        s.depth = {params.h, params.w, nn::io::read_f64_vec(is)};
        uint64_t n = nn::io::read_u64(is);
        s.seg = {params.h, params.w, {}};
        s.seg.labels.resize(n);
        for (uint64_t k = 0; k < n; ++k) s.seg.labels[k] = int(nn::io::read_u64(is));
        n = nn::io::read_u64(is);
        s.boundary = {params.h, params.w, {}};
        s.boundary.mask.resize(n);
        for (uint64_t k = 0; k < n; ++k) s.boundary.mask[k] = uint8_t(nn::io::read_u64(is));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace complearn::data
