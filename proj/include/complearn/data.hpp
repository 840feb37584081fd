#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "complearn/rng.hpp"
#include "complearn/tasks.hpp"

namespace complearn::data {

// Procedural scene recipe. Domain B for zero-shot transfer differs by a
// palette shift, stronger texture noise and a different shape-size spread.
struct DomainParams {
    int h = 32, w = 32;
    int min_shapes = 2, max_shapes = 4;
    int class_count = 4;  // 0 = background
    double depth_near = 1.0, depth_far = 4.0;
    double texture_noise_std = 0.03;
    double palette_shift = 0.0;
    double shape_scale = 1.0;

    bool valid() const {
        return h > 0 && w > 0 && class_count >= 2 && depth_near > 0.0 &&
               depth_near < depth_far && min_shapes >= 0 && max_shapes >= min_shapes;
    }
};

DomainParams shifted_domain(const DomainParams& base);

// Image plus mutually consistent dense labels.
struct SyntheticSample {
    int h = 0, w = 0;
    std::vector<double> image;  // [3,H,W], values in [0,1]
    tasks::DepthMap depth;
    tasks::SegMap seg;
    tasks::BoundaryMap boundary;
};

// Deterministic given (seed, params). Boundary pixels are exactly the
// 4-connectivity label discontinuities of the class map; within a shape the
// depth is one plane; the nearer shape wins contested pixels.
SyntheticSample gen_scene(uint64_t seed, const DomainParams& params);

std::vector<SyntheticSample> make_dataset(int n, uint64_t seed, const DomainParams& params);

// First ceil(fraction*n) indices of a seeded permutation; nested across
// fractions for a fixed seed.
std::vector<int> make_splits(int n, double fraction, uint64_t seed);

// ---- target-task augmentation (flip, scale in [0.5,2.0] by 0.25, crop/pad) ----

struct TargetAugmentOps {
    bool flip = false;
    int scale_idx = 2;  // 0.5 + 0.25 * idx, idx in [0,6]
    uint32_t crop_y_draw = 0, crop_x_draw = 0;  // raw draws, reduced mod the valid range
};

TargetAugmentOps draw_target_augment(Rng& rng);
double target_scale_factor(int scale_idx);

// Image and every label map transformed congruently; depth values divided
// by the scale factor. Output keeps the input (H,W).
SyntheticSample apply_target_augment(const SyntheticSample& s, const TargetAugmentOps& ops);
SyntheticSample target_augment(const SyntheticSample& s, uint64_t seed);

// ---- self-supervised two-view augmentation ----

struct CropGeometry {
    int crop_h = 24, crop_w = 24;
    int offset = 2;  // distance between the two crop corners on both axes
};

struct ViewJitter {
    bool flip = false;
    double brightness = 0.0;  // additive, drawn from [-0.2, 0.2]
    double contrast = 0.0;    // multiplicative around 0.5, drawn from [-0.2, 0.2]
    bool blur = false;
    double blur_sigma = 0.5;  // uniform in [0.1, 1.0]
};

struct SslPairOps {
    int corner_y = 0, corner_x = 0;  // query crop corner; key corner adds the offset
    ViewJitter view_q, view_k;
};

SslPairOps draw_ssl_pair(Rng& rng, int img_h, int img_w, const CropGeometry& geom);

struct SslViewPair {
    std::vector<double> view_q, view_k;  // [3, crop_h, crop_w]
};

SslViewPair apply_ssl_pair(const std::vector<double>& image, int h, int w,
                           const CropGeometry& geom, const SslPairOps& ops);
SslViewPair ssl_augment_pair(const std::vector<double>& image, int h, int w,
                             const CropGeometry& geom, uint64_t seed);

// Same jitter pipeline minus cropping, used to prepare rotation views.
std::vector<double> jitter_image(const std::vector<double>& image, int h, int w,
                                 const ViewJitter& jit);

// ---- dataset dump/load: flat f64 binary plus a JSON sidecar ----

void dataset_save(const std::string& path_prefix, const std::vector<SyntheticSample>& samples,
                  const DomainParams& params);
std::vector<SyntheticSample> dataset_load(const std::string& path_prefix, DomainParams* params_out);

}  // namespace complearn::data
