#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "complearn/tensor.hpp"

namespace complearn::tasks {

using ad::Tensor;

// ---- dense label maps ----

struct DepthMap {
    int h = 0, w = 0;
    std::vector<double> values;  // strictly positive
};

struct SegMap {
    int h = 0, w = 0;
    std::vector<int> labels;  // 0..C-1
};

struct BoundaryMap {
    int h = 0, w = 0;
    std::vector<uint8_t> mask;  // 1 = boundary pixel
};

struct MetricValue {
    std::string name;  // rmse | miou | ods_f
    double value = 0.0;
    int64_t count = 0;  // samples aggregated
};

// ---- losses (tape ops) ----

// Mean absolute error; shapes must match.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

// Mean softmax cross-entropy over rows. logits: [N,C], labels in 0..C-1.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Per-pixel softmax cross-entropy, mean over all pixels. logits: [N,C,H,W].
Tensor ce_loss_semseg(const Tensor& logits, const std::vector<SegMap>& gts);

// Class-weighted sigmoid cross-entropy for sparse boundary targets.
// logits: [N,1,H,W] (or [H,W]); weights follow the 0.95/0.05 convention.
Tensor weighted_bce_boundary(const Tensor& logits, const std::vector<BoundaryMap>& gts,
                             double w_pos = 0.95, double w_neg = 0.05);

// ---- metrics (plain f64, dataset-level aggregation) ----

class RmseAccum {
public:
    void add(const std::vector<double>& pred, const DepthMap& gt);
    double value() const;
    int64_t count() const { return images_; }

private:
    double sq_sum_ = 0.0;
    int64_t pixels_ = 0;
    int64_t images_ = 0;
};

double rmse(const std::vector<double>& pred, const DepthMap& gt);

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);
    void add(const SegMap& pred, const SegMap& gt);
    // Mean IoU over classes present in prediction or ground truth.
    double miou() const;
    int64_t at(int gt_class, int pred_class) const;
    int64_t images() const { return images_; }

private:
    int c_;
    std::vector<int64_t> m_;  // gt-major
    int64_t images_ = 0;
};

double miou(const SegMap& pred, const SegMap& gt, int num_classes);

// Optimal-dataset-scale F-measure over a 99-point threshold grid; predicted
// positives match ground-truth positives within Chebyshev distance 1,
// greedily in scan order. F is 0 when precision+recall is 0.
double ods_fscore(const std::vector<std::vector<double>>& pred_probs,
                  const std::vector<BoundaryMap>& gts, int h, int w);

}  // namespace complearn::tasks
