#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "complearn/params.hpp"
#include "complearn/tensor.hpp"

namespace complearn::ssl {

using ad::Tensor;

// Rotation label k means counter-clockwise rotation by k*90 degrees.
// Exact index remap (r,c) -> (W-1-c, r) per application, no resampling.
Tensor rotate_image(const Tensor& img, int k);

// 4-way classification loss over rotation logits [N,4].
Tensor rotation_loss(const Tensor& logits, const std::vector<int>& labels);

// theta_k <- m * theta_k + (1-m) * theta_q for every named parameter.
// The key side never sees gradients; this is its only update path.
void momentum_update(nn::ModelParams& key_params, const nn::ModelParams& query_params,
                     const std::vector<std::string>& names, double m);

// FIFO ring of unit-norm embeddings used as contrastive negatives.
// Capacity equals the training-set size, one slot per image.
class MemoryQueue {
public:
    MemoryQueue() = default;
    MemoryQueue(int capacity, int dim = 128);

    // Rows are renormalized on insert; a zero row is an error.
    void push(const Tensor& keys);                      // [N,dim]
    void push_rows(const std::vector<double>& rows, int n);

    int capacity() const { return capacity_; }
    int dim() const { return dim_; }
    int filled() const { return filled_; }

    // All stored entries as a constant [filled,dim] tensor (storage order).
    Tensor negatives() const;

    // i-th oldest stored entry, i in [0, filled).
    std::vector<double> entry_by_age(int i) const;

    void save(std::ostream& os) const;
    static MemoryQueue load(std::istream& is);

    bool operator==(const MemoryQueue& other) const;

private:
    int capacity_ = 0, dim_ = 0, write_ = 0, filled_ = 0;
    std::vector<double> entries_;
};

// Mean over the batch of -log( exp(s+/tau) / (exp(s+/tau) + sum_k exp(s_k/tau)) ).
// The positive is part of the denominator. pos_sims: [N], neg_sims: [N,K]
// (K may be 0 while the queue warms up).
Tensor info_nce(const Tensor& pos_sims, const Tensor& neg_sims, double tau);

// For each query cell, the key cell with maximal cosine similarity; ties
// break to the lowest index. Rows must be unit-norm; no gradient flows
// through the assignment.
std::vector<int> dense_match(const std::vector<double>& q_cells,
                             const std::vector<double>& k_cells, int cells, int dim);

// (1 - w_local) * global + w_local * local.
Tensor densecl_loss(const Tensor& global_term, const Tensor& local_term, double w_local);

}  // namespace complearn::ssl
