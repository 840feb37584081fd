#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "complearn/rng.hpp"
#include "complearn/tensor.hpp"

using namespace complearn;
using ad::Tensor;

TEST_CASE("tensor construction") {
    Tensor t = Tensor::constant({2, 2}, {1, 2, 3, 4});
    CHECK(t.shape() == ad::Shape{2, 2});
    CHECK(t.data() == std::vector<double>{1, 2, 3, 4});
    CHECK_FALSE(t.grad_enabled());

    Tensor empty = Tensor::constant({0}, {});
    CHECK(empty.numel() == 0);

    CHECK_THROWS_AS(Tensor::constant({2}, {1, 2, 3}), ad::TensorError);
    CHECK_THROWS_AS(Tensor::constant({1}, {std::nan("")}), ad::TensorError);
}

TEST_CASE("elementwise ops") {
    Tensor a = Tensor::constant({2}, {1, 2});
    Tensor b = Tensor::constant({2}, {3, 4});
    CHECK(ad::add(a, b).data() == std::vector<double>{4, 6});
    CHECK(ad::sub(a, b).data() == std::vector<double>{-2, -2});
    CHECK(ad::mul(a, b).data() == std::vector<double>{3, 8});
    CHECK(ad::neg(a).data() == std::vector<double>{-1, -2});
    CHECK(ad::relu(Tensor::constant({3}, {-1, 0, 2})).data() == std::vector<double>{0, 0, 2});
    CHECK(ad::exp(Tensor::constant({1}, {0})).data()[0] == doctest::Approx(1.0));
    CHECK(ad::scale(a, 2.5).data() == std::vector<double>{2.5, 5});

    CHECK_THROWS_AS(ad::add(a, Tensor::constant({3}, {1, 2, 3})), ad::TensorError);
    CHECK_THROWS_AS(ad::log(Tensor::constant({2}, {1, 0})), ad::TensorError);
    CHECK_THROWS_AS(ad::log(Tensor::constant({1}, {-2})), ad::TensorError);
}

TEST_CASE("matmul") {
    Tensor id2 = Tensor::constant({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::constant({2, 2}, {1, 2, 3, 4});
    CHECK(ad::matmul(id2, m).data() == std::vector<double>{1, 2, 3, 4});

    Tensor row = Tensor::constant({1, 2}, {1, 2});
    Tensor col = Tensor::constant({2, 1}, {3, 4});
    CHECK(ad::matmul(row, col).data() == std::vector<double>{11});

    Tensor z = Tensor::zeros({2, 2});
    CHECK(ad::matmul(z, m).data() == std::vector<double>{0, 0, 0, 0});

    CHECK_THROWS_AS(ad::matmul(row, row), ad::TensorError);
}

TEST_CASE("reductions") {
    CHECK(ad::sum_all(Tensor::constant({3}, {1, 2, 3})).value() == 6.0);
    CHECK(ad::mean_all(Tensor::constant({2, 2}, {1, 2, 3, 4})).value() == 2.5);

    Tensor a = Tensor::constant({2, 2}, {1, 2, 3, 4});
    Tensor same = ad::reduce_sum(a, {});
    CHECK(same.shape() == a.shape());
    CHECK(same.data() == a.data());

    Tensor rows = ad::reduce_sum(a, {1});
    CHECK(rows.shape() == ad::Shape{2});
    CHECK(rows.data() == std::vector<double>{3, 7});
    Tensor cols = ad::reduce_mean(a, {0});
    CHECK(cols.data() == std::vector<double>{2, 3});

    CHECK_THROWS_AS(ad::reduce_sum(a, {2}), ad::TensorError);
}

TEST_CASE("backward analytic examples") {
    // loss = sum(x*x): grad 2x
    {
        Tensor x = Tensor::param("x", {3}, {1, -2, 3});
        auto g = ad::backward(ad::sum_all(ad::mul(x, x)));
        CHECK(g.at("x").data() == std::vector<double>{2, -4, 6});
    }
    // loss = sum(relu(x)): grad is the positive mask
    {
        Tensor x = Tensor::param("x", {2}, {-1, 2});
        auto g = ad::backward(ad::sum_all(ad::relu(x)));
        CHECK(g.at("x").data() == std::vector<double>{0, 1});
    }
}

TEST_CASE("backward error contracts") {
    Tensor x = Tensor::param("x", {2}, {1, 2});
    Tensor nonscalar = ad::mul(x, x);
    CHECK_THROWS_AS(ad::backward(nonscalar), ad::TensorError);

    Tensor y = Tensor::param("y", {2}, {1, 2});
    Tensor loss = ad::sum_all(ad::mul(y, y));
    ad::backward(loss);
    CHECK_THROWS_AS(ad::backward(loss), ad::TensorError);  // tape consumed

    CHECK_THROWS_AS(ad::backward(Tensor::constant({}, {1.0})), ad::TensorError);
}

TEST_CASE("grad_check examples") {
    // f = sum(x^2)
    {
        Tensor x = Tensor::constant({4}, {0.5, -1.5, 2.0, 0.25});
        double err = ad::grad_check([](const Tensor& t) { return ad::sum_all(ad::mul(t, t)); }, x,
                                    1e-5);
        CHECK(err < 1e-8);
    }
    // constant function: both gradients zero
    {
        Tensor x = Tensor::constant({3}, {1, 2, 3});
        double err = ad::grad_check(
            [](const Tensor& t) { return ad::scale(ad::sum_all(t), 0.0); }, x, 1e-5);
        CHECK(err == 0.0);
    }
    // f = sum(exp(x))
    {
        Tensor x = Tensor::constant({2}, {0, 1});
        double err =
            ad::grad_check([](const Tensor& t) { return ad::sum_all(ad::exp(t)); }, x, 1e-5);
        CHECK(err < 1e-6);
    }
    // mean over a matmul against the finite-difference oracle
    {
        Rng rng(7);
        std::vector<double> wv(6), xv(6);
        for (auto& v : wv) v = rng.uniform(-1, 1);
        for (auto& v : xv) v = rng.uniform(-1, 1);
        Tensor w = Tensor::constant({2, 3}, wv);
        double err = ad::grad_check(
            [&](const Tensor& t) { return ad::mean_all(ad::matmul(w, ad::reshape(t, {3, 2}))); },
            Tensor::constant({3, 2}, xv), 1e-5);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("linearity of backward over loss sums") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> xv(6), yv(6);
        for (auto& v : xv) v = rng.uniform(-2, 2);
        for (auto& v : yv) v = rng.uniform(-2, 2);

        auto make_l1 = [&](const Tensor& x, const Tensor& y) {
            return ad::sum_all(ad::mul(x, y));
        };
        auto make_l2 = [&](const Tensor& x, const Tensor& y) {
            return ad::mean_all(ad::mul(ad::exp(ad::scale(x, 0.3)), y));
        };

        auto grads_of = [&](int which) {
            Tensor x = Tensor::param("x", {6}, xv);
            Tensor y = Tensor::param("y", {6}, yv);
            Tensor loss;
            if (which == 0) loss = make_l1(x, y);
            else if (which == 1) loss = make_l2(x, y);
            else loss = ad::add(make_l1(x, y), make_l2(x, y));
            return ad::backward(loss);
        };

        auto g1 = grads_of(0), g2 = grads_of(1), gsum = grads_of(2);
        for (const auto& name : {"x", "y"}) {
            const auto& a = g1.at(name).data();
            const auto& b = g2.at(name).data();
            const auto& s = gsum.at(name).data();
            for (size_t i = 0; i < a.size(); ++i) {
                CHECK(s[i] == a[i] + b[i]);  // exact in f64
            }
        }
    }
}

TEST_CASE("repeated backward is bitwise deterministic") {
    Rng rng(3);
    std::vector<double> xv(8);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    auto run = [&]() {
        Tensor x = Tensor::param("x", {2, 4}, xv);
        Tensor loss = ad::mean_all(ad::mul(ad::relu(x), ad::exp(ad::scale(x, 0.5))));
        return ad::backward(loss);
    };
    auto a = run(), b = run();
    CHECK(a.at("x").data() == b.at("x").data());
}

TEST_CASE("gradmap key set covers touched parameters only") {
    Tensor x = Tensor::param("x", {2}, {1, 2});
    Tensor y = Tensor::param("y", {2}, {3, 4});  // never used in the loss
    (void)y;
    auto g = ad::backward(ad::sum_all(ad::mul(x, x)));
    CHECK(g.size() == 1);
    CHECK(g.contains("x"));
    CHECK_FALSE(g.contains("y"));
}

TEST_CASE("detach cuts the tape") {
    Tensor x = Tensor::param("x", {2}, {1, 2});
    Tensor d = ad::mul(x, x).detach();
    CHECK_FALSE(d.grad_enabled());
    Tensor loss = ad::sum_all(ad::mul(d, x));
    auto g = ad::backward(loss);
    // Gradient flows only through the non-detached factor.
    CHECK(g.at("x").data() == std::vector<double>{1, 4});
}
