#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "complearn/rng.hpp"
#include "complearn/tasks.hpp"

using namespace complearn;
using ad::Tensor;

TEST_CASE("l1_loss") {
    Tensor a = Tensor::constant({2, 2}, {1, 2, 3, 4});
    CHECK(tasks::l1_loss(a, a).value() == 0.0);

    Tensor b = Tensor::constant({2, 2}, {1.5, 2.5, 3.5, 4.5});
    CHECK(tasks::l1_loss(b, a).value() == doctest::Approx(0.5).epsilon(1e-15));

    Tensor p = Tensor::constant({2}, {1, 4});
    Tensor g = Tensor::constant({2}, {3, 3});
    CHECK(tasks::l1_loss(p, g).value() == doctest::Approx(1.5).epsilon(1e-15));

    CHECK_THROWS_AS(tasks::l1_loss(p, a), ad::TensorError);
}

TEST_CASE("rmse") {
    tasks::DepthMap gt{1, 2, {3, 2}};
    CHECK(tasks::rmse({3, 2}, gt) == 0.0);
    CHECK(tasks::rmse({1, 2}, gt) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

    // constant offset c gives rmse c
    tasks::DepthMap g2{2, 2, {1, 2, 3, 4}};
    CHECK(tasks::rmse({1.7, 2.7, 3.7, 4.7}, g2) == doctest::Approx(0.7).epsilon(1e-12));

    // symmetry on random pairs
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> a(16), b(16);
        for (auto& v : a) v = rng.uniform(0.1, 5);
        for (auto& v : b) v = rng.uniform(0.1, 5);
        tasks::DepthMap ga{4, 4, a}, gb{4, 4, b};
        CHECK(tasks::rmse(a, gb) == tasks::rmse(b, ga));
    }

    // dataset aggregation is order independent
    tasks::RmseAccum acc1, acc2;
    std::vector<double> p1 = {1, 2, 3, 4}, p2 = {2, 2, 2, 2};
    tasks::DepthMap d1{2, 2, {1.5, 2, 3, 4.5}}, d2{2, 2, {2, 3, 2, 1}};
    acc1.add(p1, d1);
    acc1.add(p2, d2);
    acc2.add(p2, d2);
    acc2.add(p1, d1);
    CHECK(acc1.value() == acc2.value());
}

TEST_CASE("semseg cross entropy") {
    // uniform logits over 21 classes -> ln 21
    Tensor uni = Tensor::zeros({1, 21, 2, 2});
    tasks::SegMap gt{2, 2, {0, 5, 20, 7}};
    CHECK(tasks::ce_loss_semseg(uni, {gt}).value() ==
          doctest::Approx(std::log(21.0)).epsilon(1e-12));

    // saturated correct logits -> ~0
    std::vector<double> sat(2 * 2 * 1 * 1, 0.0);
    Tensor satl = Tensor::constant({1, 2, 1, 1}, {1000.0, 0.0});
    tasks::SegMap g1{1, 1, {0}};
    CHECK(tasks::ce_loss_semseg(satl, {g1}).value() == doctest::Approx(0.0).epsilon(1e-9));

    // one pixel, logits [1,0], label 0 -> -ln(e/(e+1))
    Tensor two = Tensor::constant({1, 2, 1, 1}, {1.0, 0.0});
    CHECK(tasks::ce_loss_semseg(two, {g1}).value() ==
          doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));

    tasks::SegMap bad{1, 1, {2}};
    CHECK_THROWS_AS(tasks::ce_loss_semseg(two, {bad}), ad::TensorError);
}

TEST_CASE("miou examples") {
    tasks::SegMap a{2, 2, {0, 1, 1, 0}};
    CHECK(tasks::miou(a, a, 2) == 1.0);

    tasks::SegMap all0{2, 2, {0, 0, 0, 0}};
    tasks::SegMap all1{2, 2, {1, 1, 1, 1}};
    CHECK(tasks::miou(all0, all1, 2) == 0.0);

    tasks::SegMap pred{1, 4, {0, 0, 1, 1}};
    tasks::SegMap gt{1, 4, {0, 1, 1, 1}};
    CHECK(tasks::miou(pred, gt, 2) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));

    // classes absent from both sides are excluded from the mean
    CHECK(tasks::miou(pred, gt, 5) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
}

namespace {

// Brute-force per-class set computation, independent of the confusion-matrix
// path.
double miou_bruteforce(const std::vector<tasks::SegMap>& preds,
                       const std::vector<tasks::SegMap>& gts, int classes) {
    double sum = 0.0;
    int present = 0;
    for (int k = 0; k < classes; ++k) {
        int64_t inter = 0, uni = 0;
        for (size_t img = 0; img < preds.size(); ++img) {
            for (size_t i = 0; i < preds[img].labels.size(); ++i) {
                const bool inp = preds[img].labels[i] == k;
                const bool ing = gts[img].labels[i] == k;
                inter += inp && ing;
                uni += inp || ing;
            }
        }
        if (uni == 0) continue;
        sum += double(inter) / double(uni);
        present += 1;
    }
    return present == 0 ? 0.0 : sum / present;
}

}  // namespace

TEST_CASE("miou matches brute-force oracle on random maps") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int classes = 2 + int(rng.uniform_int(3));  // C <= 4
        const int n_imgs = 1 + int(rng.uniform_int(3));
        std::vector<tasks::SegMap> preds, gts;
        tasks::ConfusionMatrix cm(classes);
        for (int img = 0; img < n_imgs; ++img) {
            tasks::SegMap p{8, 8, {}}, g{8, 8, {}};
            for (int i = 0; i < 64; ++i) {
                p.labels.push_back(int(rng.uniform_int(uint64_t(classes))));
                g.labels.push_back(int(rng.uniform_int(uint64_t(classes))));
            }
            cm.add(p, g);
            preds.push_back(std::move(p));
            gts.push_back(std::move(g));
        }
        CHECK(cm.miou() == doctest::Approx(miou_bruteforce(preds, gts, classes)).epsilon(1e-12));
    }
}

TEST_CASE("weighted boundary cross entropy") {
    // saturated correct predictions -> ~0
    tasks::BoundaryMap gt{1, 2, {1, 0}};
    Tensor sat = Tensor::constant({1, 2}, {100.0, -100.0});
    CHECK(tasks::weighted_bce_boundary(sat, {gt}).value() == doctest::Approx(0.0).epsilon(1e-9));

    // single positive pixel at logit 0: 0.95 ln 2
    tasks::BoundaryMap pos{1, 1, {1}};
    Tensor zero = Tensor::constant({1, 1}, {0.0});
    CHECK(tasks::weighted_bce_boundary(zero, {pos}).value() ==
          doctest::Approx(0.95 * std::log(2.0)).epsilon(1e-14));

    // single negative pixel at logit 0: 0.05 ln 2
    tasks::BoundaryMap neg{1, 1, {0}};
    CHECK(tasks::weighted_bce_boundary(zero, {neg}).value() ==
          doctest::Approx(0.05 * std::log(2.0)).epsilon(1e-14));

    CHECK_THROWS_AS(tasks::weighted_bce_boundary(zero, {gt}), ad::TensorError);
}

TEST_CASE("weighted bce with equal weights halves the standard loss") {
    Rng rng(3);
    std::vector<double> logits(12);
    tasks::BoundaryMap gt{3, 4, {}};
    for (int i = 0; i < 12; ++i) {
        logits[size_t(i)] = rng.uniform(-2, 2);
        gt.mask.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    Tensor l = Tensor::constant({3, 4}, logits);
    const double standard = tasks::weighted_bce_boundary(l, {gt}, 1.0, 1.0).value();
    const double halved = tasks::weighted_bce_boundary(l, {gt}, 0.5, 0.5).value();
    CHECK(halved == doctest::Approx(standard / 2.0).epsilon(1e-12));
}

TEST_CASE("ods_fscore edge cases") {
    const int h = 3, w = 3;
    tasks::BoundaryMap gt{h, w, {0, 0, 0, 0, 1, 0, 0, 0, 0}};

    // perfect prediction
    std::vector<double> perfect = {0, 0, 0, 0, 1, 0, 0, 0, 0};
    CHECK(tasks::ods_fscore({perfect}, {gt}, h, w) == 1.0);

    // no predicted positives at any threshold
    std::vector<double> nothing(9, 0.0);
    CHECK(tasks::ods_fscore({nothing}, {gt}, h, w) == 0.0);

    // prediction at a 4-neighbor with prob 0.8 matches within Chebyshev 1
    std::vector<double> nbr(9, 0.0);
    nbr[1] = 0.8;  // directly above the gt positive
    CHECK(tasks::ods_fscore({nbr}, {gt}, h, w) == 1.0);

    CHECK_THROWS_AS(tasks::ods_fscore({nbr, nothing}, {gt}, h, w), ad::TensorError);
}

TEST_CASE("ods_fscore removing a wrong positive never hurts") {
    const int h = 5, w = 5;
    tasks::BoundaryMap gt{h, w, std::vector<uint8_t>(25, 0)};
    gt.mask[12] = 1;  // center

    std::vector<double> with_fp(25, 0.0);
    with_fp[12] = 0.9;
    with_fp[0] = 0.7;  // far corner: unmatched at any threshold
    std::vector<double> without_fp = with_fp;
    without_fp[0] = 0.0;

    const double f_with = tasks::ods_fscore({with_fp}, {gt}, h, w);
    const double f_without = tasks::ods_fscore({without_fp}, {gt}, h, w);
    CHECK(f_without >= f_with);
    CHECK(f_without == 1.0);
}

TEST_CASE("ods_fscore is invariant to image order") {
    Rng rng(5);
    const int h = 6, w = 6;
    std::vector<std::vector<double>> preds;
    std::vector<tasks::BoundaryMap> gts;
    for (int img = 0; img < 4; ++img) {
        std::vector<double> p(36);
        tasks::BoundaryMap g{h, w, {}};
        for (int i = 0; i < 36; ++i) {
            p[size_t(i)] = rng.uniform(0, 1);
            g.mask.push_back(rng.bernoulli(0.2) ? 1 : 0);
        }
        preds.push_back(std::move(p));
        gts.push_back(std::move(g));
    }
    const double base = tasks::ods_fscore(preds, gts, h, w);
    std::reverse(preds.begin(), preds.end());
    std::reverse(gts.begin(), gts.end());
    CHECK(tasks::ods_fscore(preds, gts, h, w) == base);
}

TEST_CASE("losses pass grad_check") {
    Rng rng(11);
    // semseg CE over a small logit map
    {
        tasks::SegMap gt{2, 2, {0, 1, 2, 1}};
        std::vector<double> lv(1 * 3 * 2 * 2);
        for (auto& v : lv) v = rng.uniform(-1, 1);
        auto f = [&](const Tensor& t) { return tasks::ce_loss_semseg(t, {gt}); };
        CHECK(ad::grad_check(f, Tensor::constant({1, 3, 2, 2}, lv), 1e-5) < 1e-4);
    }
    // weighted bce
    {
        tasks::BoundaryMap gt{2, 3, {1, 0, 0, 1, 1, 0}};
        std::vector<double> lv(6);
        for (auto& v : lv) v = rng.uniform(-2, 2);
        auto f = [&](const Tensor& t) { return tasks::weighted_bce_boundary(t, {gt}); };
        CHECK(ad::grad_check(f, Tensor::constant({2, 3}, lv), 1e-5) < 1e-4);
    }
}
