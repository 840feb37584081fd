#include "complearn/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace complearn::tasks {

using ad::BackwardCtx;
using ad::NodePtr;
using ad::TensorError;
using ad::detail::make_op;

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw TensorError("l1_loss: shape mismatch");
    const auto& dp = pred.data();
    const auto& dt = target.data();
    const int64_t n = int64_t(dp.size());
    if (n == 0) throw TensorError("l1_loss: empty tensors");
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += std::abs(dp[i] - dt[i]);
    auto dpp = pred.data_ptr();
    auto dtp = target.data_ptr();
    NodePtr np = pred.node();
    return make_op({}, {s / double(n)}, "l1_loss", {&pred, &target},
                   [np, dpp, dtp, n](const std::vector<double>& g, BackwardCtx& ctx) {
                       if (!np) return;
                       auto& gp = ctx.grad_of(np);
                       const double gv = g[0] / double(n);
                       for (int64_t i = 0; i < n; ++i) {
                           const double d = (*dpp)[i] - (*dtp)[i];
                           gp[size_t(i)] += d > 0.0 ? gv : (d < 0.0 ? -gv : 0.0);
                       }
                   });
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw TensorError("softmax_cross_entropy: expects [N,C]");
    const int n = logits.dim(0), c = logits.dim(1);
    if (int(labels.size()) != n) throw TensorError("softmax_cross_entropy: label count mismatch");
    for (int l : labels) {
        if (l < 0 || l >= c) throw TensorError("softmax_cross_entropy: label out of range");
    }
    const auto& dl = logits.data();
    // Save the softmax for backward.
    auto probs = std::make_shared<std::vector<double>>(dl.size());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = dl.data() + size_t(i) * c;
        double m = row[0];
        for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(row[j] - m);
        const double lse = m + std::log(z);
        total += lse - row[labels[size_t(i)]];
        for (int j = 0; j < c; ++j) (*probs)[size_t(i) * c + j] = std::exp(row[j] - m) / z;
    }
    NodePtr nl = logits.node();
    auto lab = std::make_shared<std::vector<int>>(labels);
    return make_op({}, {total / double(n)}, "softmax_cross_entropy", {&logits},
                   [nl, probs, lab, n, c](const std::vector<double>& g, BackwardCtx& ctx) {
                       auto& gl = ctx.grad_of(nl);
                       const double gv = g[0] / double(n);
                       for (int i = 0; i < n; ++i) {
                           for (int j = 0; j < c; ++j)
                               gl[size_t(i) * c + j] += gv * (*probs)[size_t(i) * c + j];
                           gl[size_t(i) * c + (*lab)[size_t(i)]] -= gv;
                       }
                   });
}

Tensor ce_loss_semseg(const Tensor& logits, const std::vector<SegMap>& gts) {
    Tensor l4 = logits;
    if (l4.ndim() == 3) l4 = ad::reshape(l4, {1, l4.dim(0), l4.dim(1), l4.dim(2)});
    if (l4.ndim() != 4) throw TensorError("ce_loss_semseg: expects [N,C,H,W]");
    const int n = l4.dim(0), c = l4.dim(1), h = l4.dim(2), w = l4.dim(3);
    if (int(gts.size()) != n) throw TensorError("ce_loss_semseg: batch size mismatch");
    std::vector<int> labels;
    labels.reserve(size_t(n) * h * w);
    for (const auto& gt : gts) {
        if (gt.h != h || gt.w != w) throw TensorError("ce_loss_semseg: label map size mismatch");
        for (int lab : gt.labels) {
            if (lab < 0 || lab >= c) throw TensorError("ce_loss_semseg: label out of range");
            labels.push_back(lab);
        }
    }
    Tensor rows = ad::reshape(ad::nchw_to_cells(l4), {n * h * w, c});
    return softmax_cross_entropy(rows, labels);
}

Tensor weighted_bce_boundary(const Tensor& logits, const std::vector<BoundaryMap>& gts,
                             double w_pos, double w_neg) {
    Tensor l4 = logits;
    if (l4.ndim() == 2) l4 = ad::reshape(l4, {1, 1, l4.dim(0), l4.dim(1)});
    if (l4.ndim() != 4 || l4.dim(1) != 1) throw TensorError("weighted_bce_boundary: expects [N,1,H,W]");
    const int n = l4.dim(0), h = l4.dim(2), w = l4.dim(3);
    if (int(gts.size()) != n) throw TensorError("weighted_bce_boundary: batch size mismatch");
    const int64_t hw = int64_t(h) * w;

    auto mask = std::make_shared<std::vector<uint8_t>>();
    mask->reserve(size_t(n) * hw);
    for (const auto& gt : gts) {
        if (gt.h != h || gt.w != w) throw TensorError("weighted_bce_boundary: mask size mismatch");
        mask->insert(mask->end(), gt.mask.begin(), gt.mask.end());
    }

    const auto& dl = l4.data();
    const int64_t total_px = int64_t(n) * hw;
    auto softplus = [](double x) {
        // log(1 + e^x), stable for large |x|
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    };
    double total = 0.0;
    for (int64_t i = 0; i < total_px; ++i) {
        const double x = dl[size_t(i)];
        total += (*mask)[size_t(i)] ? w_pos * softplus(-x) : w_neg * softplus(x);
    }
    NodePtr nl = l4.node();
    auto dlp = l4.data_ptr();
    Tensor loss = make_op(
        {}, {total / double(total_px)}, "weighted_bce_boundary", {&l4},
        [nl, dlp, mask, total_px, w_pos, w_neg](const std::vector<double>& g, BackwardCtx& ctx) {
            auto& gl = ctx.grad_of(nl);
            const double gv = g[0] / double(total_px);
            for (int64_t i = 0; i < total_px; ++i) {
                const double x = (*dlp)[size_t(i)];
                const double sig = 1.0 / (1.0 + std::exp(-x));
                gl[size_t(i)] += gv * ((*mask)[size_t(i)] ? w_pos * (sig - 1.0) : w_neg * sig);
            }
        });
    return loss;
}

// ---- metrics ----

void RmseAccum::add(const std::vector<double>& pred, const DepthMap& gt) {
    if (int64_t(pred.size()) != int64_t(gt.values.size())) {
        throw TensorError("rmse: shape mismatch");
    }
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt.values[i];
        sq_sum_ += d * d;
    }
    pixels_ += int64_t(pred.size());
    images_ += 1;
}

double RmseAccum::value() const {
    if (pixels_ == 0) return 0.0;
    return std::sqrt(sq_sum_ / double(pixels_));
}

double rmse(const std::vector<double>& pred, const DepthMap& gt) {
    RmseAccum acc;
    acc.add(pred, gt);
    return acc.value();
}

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : c_(num_classes), m_(size_t(num_classes) * size_t(num_classes), 0) {}

void ConfusionMatrix::add(const SegMap& pred, const SegMap& gt) {
    if (pred.h != gt.h || pred.w != gt.w) throw TensorError("miou: map size mismatch");
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        const int p = pred.labels[i], g = gt.labels[i];
        if (p < 0 || p >= c_ || g < 0 || g >= c_) throw TensorError("miou: label out of range");
        m_[size_t(g) * c_ + p] += 1;
    }
    images_ += 1;
}

int64_t ConfusionMatrix::at(int gt_class, int pred_class) const {
    return m_[size_t(gt_class) * c_ + pred_class];
}

double ConfusionMatrix::miou() const {
    double sum = 0.0;
    int present = 0;
    for (int k = 0; k < c_; ++k) {
        int64_t inter = m_[size_t(k) * c_ + k];
        int64_t gt_total = 0, pred_total = 0;
        for (int j = 0; j < c_; ++j) {
            gt_total += m_[size_t(k) * c_ + j];
            pred_total += m_[size_t(j) * c_ + k];
        }
        const int64_t uni = gt_total + pred_total - inter;
        if (uni == 0) continue;  // class absent everywhere: excluded
        sum += double(inter) / double(uni);
        present += 1;
    }
    return present == 0 ? 0.0 : sum / double(present);
}

double miou(const SegMap& pred, const SegMap& gt, int num_classes) {
    ConfusionMatrix cm(num_classes);
    cm.add(pred, gt);
    return cm.miou();
}

double ods_fscore(const std::vector<std::vector<double>>& pred_probs,
                  const std::vector<BoundaryMap>& gts, int h, int w) {
    if (pred_probs.size() != gts.size()) throw TensorError("ods_fscore: sequence length mismatch");
    const size_t n_img = gts.size();
    for (size_t i = 0; i < n_img; ++i) {
        if (int64_t(pred_probs[i].size()) != int64_t(h) * w || gts[i].h != h || gts[i].w != w) {
            throw TensorError("ods_fscore: map size mismatch");
        }
    }

    // Match preference: exact position first, then the 8-neighborhood in
    // scan order.
    static const int offs[9][2] = {{0, 0},  {-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                   {0, 1},  {1, -1},  {1, 0},  {1, 1}};

    double best_f = 0.0;
    std::vector<uint8_t> gt_matched(size_t(h) * w);
    for (int ti = 1; ti <= 99; ++ti) {
        const double t = double(ti) / 100.0;
        int64_t tp = 0, fp = 0, fn = 0;
        for (size_t img = 0; img < n_img; ++img) {
            const auto& pp = pred_probs[img];
            const auto& gm = gts[img].mask;
            std::fill(gt_matched.begin(), gt_matched.end(), uint8_t(0));
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (pp[size_t(y) * w + x] < t) continue;
                    bool matched = false;
                    for (const auto& o : offs) {
                        const int yy = y + o[0], xx = x + o[1];
                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                        const size_t idx = size_t(yy) * w + xx;
                        if (gm[idx] && !gt_matched[idx]) {
                            gt_matched[idx] = 1;
                            matched = true;
                            break;
                        }
                    }
                    if (matched) ++tp;
                    else ++fp;
                }
            }
            for (size_t i = 0; i < gm.size(); ++i) {
                if (gm[i] && !gt_matched[i]) ++fn;
            }
        }
        const double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
        const double r = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
        const double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        best_f = std::max(best_f, f);
    }
    return best_f;
}

}  // namespace complearn::tasks
