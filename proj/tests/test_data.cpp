#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "complearn/data.hpp"

using namespace complearn;

namespace {

data::DomainParams small_params() {
    data::DomainParams p;
    p.h = p.w = 16;
    return p;
}

// Independent edge rule: a pixel is boundary iff some 4-neighbor differs.
tasks::BoundaryMap edge_oracle(const tasks::SegMap& seg) {
    tasks::BoundaryMap b{seg.h, seg.w, std::vector<uint8_t>(size_t(seg.h) * seg.w, 0)};
    for (int y = 0; y < seg.h; ++y)
        for (int x = 0; x < seg.w; ++x) {
            const int c = seg.labels[size_t(y) * seg.w + x];
            bool edge = false;
            if (y > 0) edge |= seg.labels[size_t(y - 1) * seg.w + x] != c;
            if (y + 1 < seg.h) edge |= seg.labels[size_t(y + 1) * seg.w + x] != c;
            if (x > 0) edge |= seg.labels[size_t(y) * seg.w + x - 1] != c;
            if (x + 1 < seg.w) edge |= seg.labels[size_t(y) * seg.w + x + 1] != c;
            b.mask[size_t(y) * seg.w + x] = edge ? 1 : 0;
        }
    return b;
}

}  // namespace

TEST_CASE("gen_scene determinism") {
    auto p = small_params();
    auto a = data::gen_scene(42, p);
    auto b = data::gen_scene(42, p);
    CHECK(a.image == b.image);
    CHECK(a.depth.values == b.depth.values);
    CHECK(a.seg.labels == b.seg.labels);
    CHECK(a.boundary.mask == b.boundary.mask);

    auto c = data::gen_scene(43, p);
    CHECK(a.image != c.image);
}

TEST_CASE("background-only scene") {
    auto p = small_params();
    p.min_shapes = p.max_shapes = 0;
    auto s = data::gen_scene(1, p);
    for (int lab : s.seg.labels) CHECK(lab == 0);
    for (uint8_t m : s.boundary.mask) CHECK(m == 0);
    for (double d : s.depth.values) CHECK(d == p.depth_far);
}

TEST_CASE("boundary equals the 4-connectivity edge oracle") {
    auto p = small_params();
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto s = data::gen_scene(seed, p);
        auto oracle = edge_oracle(s.seg);
        CHECK(s.boundary.mask == oracle.mask);
    }
}

TEST_CASE("generated samples stay in range") {
    auto p = small_params();
    for (uint64_t seed = 100; seed < 120; ++seed) {
        auto s = data::gen_scene(seed, p);
        for (double v : s.image) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (double d : s.depth.values) {
            CHECK(d > p.depth_near);
            CHECK(d <= p.depth_far);
        }
        for (int lab : s.seg.labels) {
            CHECK(lab >= 0);
            CHECK(lab < p.class_count);
        }
    }
}

TEST_CASE("shifted domain changes the recipe") {
    auto a = small_params();
    auto b = data::shifted_domain(a);
    CHECK(b.palette_shift > a.palette_shift);
    CHECK(b.texture_noise_std > a.texture_noise_std);
    auto sa = data::gen_scene(5, a);
    auto sb = data::gen_scene(5, b);
    CHECK(sa.image != sb.image);
}

TEST_CASE("make_splits") {
    auto full = data::make_splits(10, 1.0, 3);
    CHECK(full.size() == 10);
    std::set<int> uniq(full.begin(), full.end());
    CHECK(uniq.size() == 10);

    auto half = data::make_splits(10, 0.5, 3);
    CHECK(half.size() == 5);
    for (size_t i = 0; i < half.size(); ++i) CHECK(half[i] == full[i]);  // prefix property

    // nesting chain for a fixed seed
    auto f1 = data::make_splits(100, 0.1, 1);
    auto f2 = data::make_splits(100, 0.2, 1);
    auto f5 = data::make_splits(100, 0.5, 1);
    CHECK(f1.size() == 10);
    CHECK(f2.size() == 20);
    CHECK(f5.size() == 50);
    for (size_t i = 0; i < f1.size(); ++i) CHECK(f1[i] == f2[i]);
    for (size_t i = 0; i < f2.size(); ++i) CHECK(f2[i] == f5[i]);

    // ceil rounding
    CHECK(data::make_splits(10, 0.01, 1).size() == 1);

    CHECK_THROWS_AS(data::make_splits(10, 0.0, 1), ad::TensorError);
    CHECK_THROWS_AS(data::make_splits(10, 1.5, 1), ad::TensorError);
    CHECK_THROWS_AS(data::make_splits(0, 0.5, 1), ad::TensorError);
}

TEST_CASE("target_augment identity paths") {
    auto p = small_params();
    auto s = data::gen_scene(7, p);

    // forced double flip is the identity
    data::TargetAugmentOps flip;
    flip.flip = true;
    flip.scale_idx = 2;  // scale 1.0
    auto once = data::apply_target_augment(s, flip);
    auto twice = data::apply_target_augment(once, flip);
    CHECK(twice.image == s.image);
    CHECK(twice.seg.labels == s.seg.labels);
    CHECK(twice.depth.values == s.depth.values);
    CHECK(twice.boundary.mask == s.boundary.mask);

    // scale 1.0, no flip: identity
    data::TargetAugmentOps noop;
    noop.flip = false;
    noop.scale_idx = 2;
    auto same = data::apply_target_augment(s, noop);
    CHECK(same.image == s.image);
    CHECK(same.seg.labels == s.seg.labels);
}

TEST_CASE("target_augment scales depth geometrically") {
    // constant-depth scene: scaling by 2 halves the depth values
    auto p = small_params();
    p.min_shapes = p.max_shapes = 0;  // background plane at far
    auto s = data::gen_scene(3, p);
    data::TargetAugmentOps ops;
    ops.flip = false;
    ops.scale_idx = 6;  // 2.0
    ops.crop_y_draw = 0;
    ops.crop_x_draw = 0;
    auto a = data::apply_target_augment(s, ops);
    for (double d : a.depth.values) CHECK(d == doctest::Approx(p.depth_far / 2.0).epsilon(1e-12));
}

TEST_CASE("target_augment keeps label maps congruent") {
    // label grid encodes the pixel position; the augmented map must agree
    // with the documented flip -> corner-aligned NN resample -> crop chain.
    const int hw = 16;
    data::SyntheticSample s;
    s.h = s.w = hw;
    s.image.assign(3 * hw * hw, 0.0);
    s.depth = {hw, hw, std::vector<double>(hw * hw, 2.0)};
    s.boundary = {hw, hw, std::vector<uint8_t>(hw * hw, 0)};
    s.seg = {hw, hw, {}};
    for (int i = 0; i < hw * hw; ++i) s.seg.labels.push_back(i);

    data::TargetAugmentOps ops;
    ops.flip = true;
    ops.scale_idx = 4;  // 1.5
    ops.crop_y_draw = 5;
    ops.crop_x_draw = 11;
    auto a = data::apply_target_augment(s, ops);

    const int nh = int(std::lround(hw * 1.5)), nw = nh;
    const int off_y = int(ops.crop_y_draw % uint32_t(nh - hw + 1));
    const int off_x = int(ops.crop_x_draw % uint32_t(nw - hw + 1));
    for (int y = 0; y < hw; ++y) {
        for (int x = 0; x < hw; ++x) {
            const int sy = y + off_y, sx = x + off_x;
            const int py = int(std::lround(double(sy) * double(hw - 1) / double(nh - 1)));
            const int px = int(std::lround(double(sx) * double(hw - 1) / double(nw - 1)));
            const int pre_flip_x = hw - 1 - px;  // flip applied before scaling
            CHECK(a.seg.labels[size_t(y) * hw + x] == py * hw + pre_flip_x);
        }
    }
}

TEST_CASE("ssl_augment_pair geometry") {
    auto p = small_params();
    p.h = p.w = 32;
    auto s = data::gen_scene(11, p);
    data::CropGeometry geom{24, 24, 4};

    // disabled jitter and zero offset: identical views
    data::CropGeometry g0{24, 24, 0};
    data::SslPairOps ops;
    ops.corner_y = 3;
    ops.corner_x = 5;
    auto views = data::apply_ssl_pair(s.image, 32, 32, g0, ops);
    CHECK(views.view_q == views.view_k);

    // corners differ by exactly the configured offset: overlapping region
    // of the two views carries identical pixels
    auto v2 = data::apply_ssl_pair(s.image, 32, 32, geom, ops);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x) {
                const double from_q = v2.view_q[(size_t(c) * 24 + y + 4) * 24 + x + 4];
                const double from_k = v2.view_k[(size_t(c) * 24 + y) * 24 + x];
                CHECK(from_q == from_k);
            }

    // same seed twice: identical pair
    auto a = data::ssl_augment_pair(s.image, 32, 32, geom, 99);
    auto b = data::ssl_augment_pair(s.image, 32, 32, geom, 99);
    CHECK(a.view_q == b.view_q);
    CHECK(a.view_k == b.view_k);

    // geometry that cannot fit
    Rng rng(1);
    CHECK_THROWS_AS(data::draw_ssl_pair(rng, 16, 16, data::CropGeometry{16, 16, 2}),
                    ad::TensorError);
}

TEST_CASE("ssl pair corner draws stay in bounds") {
    Rng rng(21);
    data::CropGeometry geom{24, 24, 4};
    for (int t = 0; t < 200; ++t) {
        auto ops = data::draw_ssl_pair(rng, 32, 32, geom);
        CHECK(ops.corner_y >= 0);
        CHECK(ops.corner_y + geom.crop_h + geom.offset <= 32);
        CHECK(ops.corner_x >= 0);
        CHECK(ops.corner_x + geom.crop_w + geom.offset <= 32);
    }
}

TEST_CASE("dataset dump and load roundtrip") {
    auto p = small_params();
    auto samples = data::make_dataset(6, 77, p);
    const std::string prefix = "/tmp/complearn_test_ds";
    data::dataset_save(prefix, samples, p);
    data::DomainParams loaded_params;
    auto loaded = data::dataset_load(prefix, &loaded_params);
    REQUIRE(loaded.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].image == samples[i].image);
        CHECK(loaded[i].depth.values == samples[i].depth.values);
        CHECK(loaded[i].seg.labels == samples[i].seg.labels);
        CHECK(loaded[i].boundary.mask == samples[i].boundary.mask);
    }
    CHECK(loaded_params.h == p.h);
    CHECK(loaded_params.class_count == p.class_count);
    std::remove((prefix + ".bin").c_str());
    std::remove((prefix + ".json").c_str());
}
