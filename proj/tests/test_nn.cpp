#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "complearn/nn.hpp"
#include "complearn/rng.hpp"

using namespace complearn;
using ad::Tensor;

namespace {

Tensor rand4(Rng& rng, int n, int c, int h, int w, double lo = -1, double hi = 1) {
    std::vector<double> v(size_t(n) * c * h * w);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::constant({n, c, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("conv2d identity and hand examples") {
    // 1x1 kernel, weight 1, bias 0: output equals input
    Rng rng(1);
    Tensor x = rand4(rng, 1, 1, 3, 3);
    Tensor w1 = Tensor::constant({1, 1, 1, 1}, {1.0});
    Tensor b0 = Tensor::constant({1}, {0.0});
    CHECK(nn::conv2d(x, w1, b0, 1, 0).data() == x.data());

    // 2x2 all-ones kernel over [[1,2],[3,4]] -> [[10]]
    Tensor q = Tensor::constant({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor ones = Tensor::constant({1, 1, 2, 2}, {1, 1, 1, 1});
    Tensor out = nn::conv2d(q, ones, b0, 1, 0);
    CHECK(out.shape() == ad::Shape{1, 1, 1, 1});
    CHECK(out.data()[0] == 10.0);

    // zero input -> bias-valued constant output
    Tensor z = Tensor::zeros({1, 2, 4, 4});
    Tensor wr = rand4(rng, 3, 2, 3, 3);
    Tensor bias = Tensor::constant({3}, {0.5, -1.0, 2.0});
    Tensor bo = nn::conv2d(z, wr, bias, 1, 1);
    for (int oc = 0; oc < 3; ++oc)
        for (int i = 0; i < 16; ++i) CHECK(bo.data()[size_t(oc) * 16 + i] == bias.data()[size_t(oc)]);

    CHECK_THROWS_AS(nn::conv2d(rand4(rng, 1, 3, 4, 4), wr, bias, 1, 0), ad::TensorError);
    CHECK_THROWS_AS(nn::conv2d(rand4(rng, 1, 2, 2, 2), wr, bias, 1, 0), ad::TensorError);
}

TEST_CASE("conv2d stride and padding shapes") {
    Rng rng(2);
    Tensor x = rand4(rng, 2, 3, 32, 32);
    Tensor w = rand4(rng, 16, 3, 3, 3);
    Tensor b = Tensor::zeros({16});
    Tensor out = nn::conv2d(x, w, b, 2, 1);
    CHECK(out.shape() == ad::Shape{2, 16, 16, 16});
    Tensor out24 = nn::conv2d(rand4(rng, 1, 3, 24, 24), w, b, 2, 1);
    CHECK(out24.shape() == ad::Shape{1, 16, 12, 12});
}

TEST_CASE("group_norm hand example") {
    // one group, x=[1,2,3,4], mean 2.5, var 1.25
    Tensor x = Tensor::constant({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor gamma = Tensor::constant({1}, {1.0});
    Tensor beta = Tensor::constant({1}, {0.0});
    Tensor out = nn::group_norm(x, gamma, beta, 1, 0.0);
    const double expect[4] = {-1.3416407864998738, -0.4472135954999579, 0.4472135954999579,
                              1.3416407864998738};
    for (int i = 0; i < 4; ++i) CHECK(out.data()[size_t(i)] == doctest::Approx(expect[i]).epsilon(1e-9));

    // constant input with eps>0 -> zeros, then beta
    Tensor c = Tensor::constant({1, 2, 2, 2}, std::vector<double>(8, 3.0));
    Tensor g2 = Tensor::constant({2}, {1.0, 1.0});
    Tensor b2 = Tensor::constant({2}, {0.25, -0.5});
    Tensor oc = nn::group_norm(c, g2, b2, 2, 1e-5);
    for (int ch = 0; ch < 2; ++ch)
        for (int i = 0; i < 4; ++i)
            CHECK(oc.data()[size_t(ch) * 4 + i] == doctest::Approx(b2.data()[size_t(ch)]));

    // gamma = 0 -> beta everywhere
    Rng rng(3);
    Tensor r = rand4(rng, 2, 2, 3, 3);
    Tensor zg = Tensor::zeros({2});
    Tensor ob = nn::group_norm(r, zg, b2, 2, 1e-5);
    for (int n = 0; n < 2; ++n)
        for (int ch = 0; ch < 2; ++ch)
            for (int i = 0; i < 9; ++i)
                CHECK(ob.data()[(size_t(n) * 2 + ch) * 9 + i] == b2.data()[size_t(ch)]);

    CHECK_THROWS_AS(nn::group_norm(r, zg, b2, 3, 1e-5), ad::TensorError);  // 2 % 3 != 0
}

TEST_CASE("group_norm standardizes each (sample,group)") {
    Rng rng(4);
    const int n = 3, c = 8, h = 4, w = 4, groups = 4, cpg = c / groups;
    Tensor gamma = Tensor::constant({c}, std::vector<double>(c, 1.0));
    Tensor beta = Tensor::zeros({c});

    auto check_stats = [&](const Tensor& out, double mean_tol, double var_tol) {
        for (int in = 0; in < n; ++in) {
            for (int g = 0; g < groups; ++g) {
                double mean = 0, var = 0;
                const int64_t base = (int64_t(in) * c + int64_t(g) * cpg) * h * w;
                const int64_t cnt = int64_t(cpg) * h * w;
                for (int64_t i = 0; i < cnt; ++i) mean += out.data()[size_t(base + i)];
                mean /= double(cnt);
                for (int64_t i = 0; i < cnt; ++i) {
                    const double d = out.data()[size_t(base + i)] - mean;
                    var += d * d;
                }
                var /= double(cnt);
                CHECK(std::abs(mean) < mean_tol);
                CHECK(std::abs(var - 1.0) < var_tol);
            }
        }
    };

    // eps = 0: exact standardization up to rounding
    check_stats(nn::group_norm(rand4(rng, n, c, h, w), gamma, beta, groups, 0.0), 1e-10, 1e-8);
    // eps = 1e-5 with variance >> eps: the spec bounds still hold
    check_stats(nn::group_norm(rand4(rng, n, c, h, w, -200.0, 200.0), gamma, beta, groups, 1e-5),
                1e-10, 1e-8);
}

TEST_CASE("group_norm is batch independent") {
    Rng rng(5);
    const int c = 4, h = 3, w = 3;
    Tensor gamma = Tensor::constant({c}, {0.5, 1.0, 1.5, 2.0});
    Tensor beta = Tensor::constant({c}, {0.1, -0.2, 0.3, 0.0});
    Tensor a = rand4(rng, 1, c, h, w);
    Tensor b = rand4(rng, 1, c, h, w);
    std::vector<double> both = a.data();
    both.insert(both.end(), b.data().begin(), b.data().end());
    Tensor batch = Tensor::constant({2, c, h, w}, both);

    Tensor oa = nn::group_norm(a, gamma, beta, 2, 1e-5);
    Tensor ob = nn::group_norm(b, gamma, beta, 2, 1e-5);
    Tensor obatch = nn::group_norm(batch, gamma, beta, 2, 1e-5);
    for (size_t i = 0; i < oa.data().size(); ++i) {
        CHECK(obatch.data()[i] == oa.data()[i]);
        CHECK(obatch.data()[i + oa.data().size()] == ob.data()[i]);
    }
}

TEST_CASE("global_avg_pool") {
    Tensor c = Tensor::constant({1, 1, 3, 3}, std::vector<double>(9, 7.5));
    CHECK(nn::global_avg_pool(c).data()[0] == 7.5);

    Tensor m = Tensor::constant({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(nn::global_avg_pool(m).data()[0] == 2.5);

    Tensor one = Tensor::constant({1, 3, 1, 1}, {4, 5, 6});
    CHECK(nn::global_avg_pool(one).data() == std::vector<double>{4, 5, 6});
}

TEST_CASE("adaptive_avg_pool") {
    // S == H == W: identity
    Tensor x = Tensor::constant({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(nn::adaptive_avg_pool(x, 2).data() == x.data());

    // 4x4 of row-index values, S=2: block means
    std::vector<double> rows(16);
    for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 4; ++xx) rows[size_t(y) * 4 + xx] = double(y);
    Tensor r = Tensor::constant({1, 1, 4, 4}, rows);
    Tensor pooled = nn::adaptive_avg_pool(r, 2);
    CHECK(pooled.data() == std::vector<double>{0.5, 0.5, 2.5, 2.5});

    // constant input -> constant output
    Tensor c = Tensor::constant({1, 2, 5, 5}, std::vector<double>(50, -2.0));
    Tensor cp = nn::adaptive_avg_pool(c, 3);
    for (double v : cp.data()) CHECK(v == -2.0);

    CHECK_THROWS_AS(nn::adaptive_avg_pool(x, 3), ad::TensorError);
}

TEST_CASE("bilinear_upsample corner alignment") {
    // row [0,2] widened to 3 -> [0,1,2]
    Tensor row = Tensor::constant({1, 1, 1, 2}, {0, 2});
    CHECK(nn::bilinear_upsample(row, 1, 3).data() == std::vector<double>{0, 1, 2});

    // same size: identity
    Rng rng(6);
    Tensor x = rand4(rng, 1, 2, 3, 4);
    CHECK(nn::bilinear_upsample(x, 3, 4).data() == x.data());

    // constant input -> constant output
    Tensor c = Tensor::constant({1, 1, 2, 2}, std::vector<double>(4, 3.25));
    Tensor cu = nn::bilinear_upsample(c, 5, 7);
    for (double v : cu.data()) CHECK(v == doctest::Approx(3.25));

    // output corners equal input corners
    Tensor up = nn::bilinear_upsample(x, 9, 11);
    CHECK(up.data()[0] == x.data()[0]);
    CHECK(up.data()[10] == x.data()[3]);
}

TEST_CASE("linear") {
    Tensor id = Tensor::constant({2, 2}, {1, 0, 0, 1});
    Tensor b0 = Tensor::zeros({2});
    Tensor x = Tensor::constant({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK(nn::linear(x, id, b0).data() == x.data());

    Tensor w = Tensor::constant({1, 2}, {1, 1});
    Tensor b1 = Tensor::constant({1}, {1});
    Tensor q = Tensor::constant({1, 2}, {2, 3});
    CHECK(nn::linear(q, w, b1).data() == std::vector<double>{6});

    Tensor z = Tensor::zeros({2, 2});
    Tensor bb = Tensor::constant({2}, {0.5, -1.5});
    Tensor ob = nn::linear(z, id, bb);
    CHECK(ob.data() == std::vector<double>{0.5, -1.5, 0.5, -1.5});

    CHECK_THROWS_AS(nn::linear(q, w, bb), ad::TensorError);  // bias size off
}

TEST_CASE("init_params determinism and structure") {
    nn::ModelSpec spec;
    spec.heads.target_tasks = {nn::Task::depth, nn::Task::semseg};
    spec.heads.aux = nn::Aux::densecl;

    nn::ModelParams a = nn::init_params(spec, 17);
    nn::ModelParams b = nn::init_params(spec, 17);
    nn::ModelParams c = nn::init_params(spec, 18);
    CHECK(a == b);
    CHECK_FALSE(a == c);

    for (const auto& e : a.entries()) {
        if (e.name.ends_with(".b") || e.name.ends_with(".beta")) {
            for (double v : e.value) CHECK(v == 0.0);
        }
        if (e.name.ends_with(".gamma")) {
            for (double v : e.value) CHECK(v == 1.0);
        }
    }
    CHECK(a.contains("trunk.enc1.w"));
    CHECK(a.contains("trunk.dec3.w"));
    CHECK(a.contains("head.depth.w"));
    CHECK(a.contains("head.semseg.w"));
    CHECK(a.contains("aux.moco.fc2.w"));
    CHECK(a.contains("aux.dense.conv2.w"));
}

TEST_CASE("trunk restores input resolution") {
    nn::ModelSpec spec;
    nn::ModelParams p = nn::init_params(spec, 5);
    const nn::ParamView pv{&p, false};
    Rng rng(7);
    for (int size : {32, 24, 16}) {
        Tensor x = rand4(rng, 1, 3, size, size, 0.0, 1.0);
        Tensor f = nn::trunk_forward(spec, pv, x);
        CHECK(f.shape() == ad::Shape{1, spec.trunk.feature_dim, size, size});
    }
    // non-square input
    Tensor x = rand4(rng, 2, 3, 16, 24, 0.0, 1.0);
    Tensor f = nn::trunk_forward(spec, pv, x);
    CHECK(f.shape() == ad::Shape{2, spec.trunk.feature_dim, 16, 24});
}

TEST_CASE("target heads produce task channel counts") {
    nn::ModelSpec spec;
    spec.heads.target_tasks = {nn::Task::depth, nn::Task::semseg, nn::Task::boundary};
    spec.heads.seg_classes = 5;
    nn::ModelParams p = nn::init_params(spec, 9);
    const nn::ParamView pv{&p, false};
    Rng rng(8);
    Tensor feats = nn::trunk_forward(spec, pv, rand4(rng, 1, 3, 16, 16, 0.0, 1.0));
    CHECK(nn::target_head_forward(spec, pv, nn::Task::depth, feats).dim(1) == 1);
    CHECK(nn::target_head_forward(spec, pv, nn::Task::semseg, feats).dim(1) == 5);
    CHECK(nn::target_head_forward(spec, pv, nn::Task::boundary, feats).dim(1) == 1);
}

TEST_CASE("layer gradients against finite differences") {
    Rng rng(11);
    // conv2d wrt input
    {
        Tensor w = rand4(rng, 2, 2, 3, 3);
        Tensor b = Tensor::constant({2}, {0.1, -0.2});
        std::vector<double> coeff(2 * 2 * 3 * 3);
        for (auto& v : coeff) v = rng.uniform(-1, 1);
        Tensor cw = Tensor::constant({2, 2, 3, 3}, coeff);
        auto f = [&](const Tensor& t) {
            return ad::sum_all(ad::mul(ad::reshape(nn::conv2d(t, w, b, 1, 1), {2, 2, 3, 3}), cw));
        };
        CHECK(ad::grad_check(f, rand4(rng, 2, 2, 3, 3), 1e-5) < 1e-4);
    }
    // group_norm wrt input
    {
        Tensor gm = Tensor::constant({4}, {1.2, 0.8, 1.0, 0.9});
        Tensor bt = Tensor::constant({4}, {0.0, 0.1, -0.1, 0.2});
        std::vector<double> coeff(1 * 4 * 2 * 2);
        for (auto& v : coeff) v = rng.uniform(-1, 1);
        Tensor cw = Tensor::constant({1, 4, 2, 2}, coeff);
        auto f = [&](const Tensor& t) {
            return ad::sum_all(ad::mul(nn::group_norm(t, gm, bt, 2, 1e-5), cw));
        };
        CHECK(ad::grad_check(f, rand4(rng, 1, 4, 2, 2), 1e-5) < 1e-4);
    }
}

TEST_CASE("parameter serialization roundtrips bitwise") {
    nn::ModelSpec spec;
    spec.heads.aux = nn::Aux::moco;
    nn::ModelParams p = nn::init_params(spec, 23);
    std::stringstream ss;
    p.save(ss);
    nn::ModelParams q = nn::ModelParams::load(ss);
    CHECK(p == q);
}
