#include "complearn/ssl.hpp"

#include <cmath>

#include "complearn/tasks.hpp"

namespace complearn::ssl {

using ad::BackwardCtx;
using ad::NodePtr;
using ad::TensorError;
using ad::detail::make_op;

namespace {

// One counter-clockwise quarter turn: out[c][W-1-x][y] = in[c][y][x].
Tensor rotate90_once(const Tensor& img) {
    if (img.ndim() != 3) throw TensorError("rotate_image: expects [C,H,W]");
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    const auto& d = img.data();
    std::vector<double> out(d.size());
    for (int ic = 0; ic < c; ++ic)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out[(size_t(ic) * w + size_t(w - 1 - x)) * h + y] =
                    d[(size_t(ic) * h + y) * w + x];
    NodePtr n = img.node();
    return make_op({c, w, h}, std::move(out), "rotate_image", {&img},
                   [n, c, h, w](const std::vector<double>& g, BackwardCtx& ctx) {
                       auto& gi = ctx.grad_of(n);
                       for (int ic = 0; ic < c; ++ic)
                           for (int y = 0; y < h; ++y)
                               for (int x = 0; x < w; ++x)
                                   gi[(size_t(ic) * h + y) * w + x] +=
                                       g[(size_t(ic) * w + size_t(w - 1 - x)) * h + y];
                   });
}

}  // namespace

Tensor rotate_image(const Tensor& img, int k) {
    if (k < 0 || k > 3) throw TensorError("rotate_image: k must be in {0,1,2,3}");
    Tensor out = img;
    for (int i = 0; i < k; ++i) out = rotate90_once(out);
    return out;
}

Tensor rotation_loss(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2 || logits.dim(1) != 4) throw TensorError("rotation_loss: expects [N,4]");
    return tasks::softmax_cross_entropy(logits, labels);
}

void momentum_update(nn::ModelParams& key_params, const nn::ModelParams& query_params,
                     const std::vector<std::string>& names, double m) {
    if (m < 0.0 || m >= 1.0) throw TensorError("momentum_update: m must be in [0,1)");
    for (const auto& name : names) {
        auto& ke = key_params.entry(name);
        const auto& qe = query_params.entry(name);
        if (ke.shape != qe.shape) throw TensorError("momentum_update: shape mismatch for " + name);
        for (size_t i = 0; i < ke.value.size(); ++i) {
            ke.value[i] = m * ke.value[i] + (1.0 - m) * qe.value[i];
        }
    }
}

MemoryQueue::MemoryQueue(int capacity, int dim) : capacity_(capacity), dim_(dim) {
    if (capacity < 1) throw TensorError("MemoryQueue: capacity must be positive");
    if (dim < 1) throw TensorError("MemoryQueue: dim must be positive");
    entries_.assign(size_t(capacity) * size_t(dim), 0.0);
}

void MemoryQueue::push_rows(const std::vector<double>& rows, int n) {
    if (int64_t(rows.size()) != int64_t(n) * dim_) throw TensorError("MemoryQueue: row dim mismatch");
    for (int r = 0; r < n; ++r) {
        const double* src = rows.data() + size_t(r) * dim_;
        double ss = 0.0;
        for (int j = 0; j < dim_; ++j) ss += src[j] * src[j];
        const double norm = std::sqrt(ss);
        if (norm < 1e-12) throw TensorError("MemoryQueue: zero vector");
        double* dst = entries_.data() + size_t(write_) * dim_;
        for (int j = 0; j < dim_; ++j) dst[j] = src[j] / norm;
        write_ = (write_ + 1) % capacity_;
        if (filled_ < capacity_) ++filled_;
    }
}

void MemoryQueue::push(const Tensor& keys) {
    if (keys.ndim() != 2 || keys.dim(1) != dim_) throw TensorError("MemoryQueue: dim mismatch");
    push_rows(keys.data(), keys.dim(0));
}

Tensor MemoryQueue::negatives() const {
    std::vector<double> out(entries_.begin(), entries_.begin() + size_t(filled_) * dim_);
    return Tensor::constant({filled_, dim_}, std::move(out));
}

std::vector<double> MemoryQueue::entry_by_age(int i) const {
    if (i < 0 || i >= filled_) throw TensorError("MemoryQueue: entry index out of range");
    // Oldest entry sits right at the write pointer once the ring is full.
    const int start = filled_ < capacity_ ? 0 : write_;
    const int slot = (start + i) % capacity_;
    return std::vector<double>(entries_.begin() + size_t(slot) * dim_,
                               entries_.begin() + size_t(slot + 1) * dim_);
}

void MemoryQueue::save(std::ostream& os) const {
    nn::io::write_u64(os, uint64_t(capacity_));
    nn::io::write_u64(os, uint64_t(dim_));
    nn::io::write_u64(os, uint64_t(write_));
    nn::io::write_u64(os, uint64_t(filled_));
    nn::io::write_f64_vec(os, entries_);
}

MemoryQueue MemoryQueue::load(std::istream& is) {
    MemoryQueue q;
    q.capacity_ = int(nn::io::read_u64(is));
    q.dim_ = int(nn::io::read_u64(is));
    q.write_ = int(nn::io::read_u64(is));
    q.filled_ = int(nn::io::read_u64(is));
    q.entries_ = nn::io::read_f64_vec(is);
    if (int64_t(q.entries_.size()) != int64_t(q.capacity_) * q.dim_) {
        throw TensorError("MemoryQueue: corrupt checkpoint");
    }
    return q;
}

bool MemoryQueue::operator==(const MemoryQueue& other) const {
    return capacity_ == other.capacity_ && dim_ == other.dim_ && write_ == other.write_ &&
           filled_ == other.filled_ && entries_ == other.entries_;
}

Tensor info_nce(const Tensor& pos_sims, const Tensor& neg_sims, double tau) {
    if (tau <= 0.0) throw TensorError("info_nce: tau must be > 0");
    if (pos_sims.ndim() != 1 || neg_sims.ndim() != 2) {
        throw TensorError("info_nce: expects pos [N], neg [N,K]");
    }
    const int n = pos_sims.dim(0), k = neg_sims.dim(1);
    if (neg_sims.dim(0) != n) throw TensorError("info_nce: batch size mismatch");
    if (n == 0) throw TensorError("info_nce: empty batch");

    const auto& dp = pos_sims.data();
    const auto& dn = neg_sims.data();

    // Per row: -s+/tau + logsumexp({s+, s_1..s_K}/tau); softmax saved.
    auto prob_pos = std::make_shared<std::vector<double>>(size_t(n));
    auto prob_neg = std::make_shared<std::vector<double>>(size_t(n) * size_t(k));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double m = dp[size_t(i)];
        const double* row = dn.data() + size_t(i) * k;
        for (int j = 0; j < k; ++j) m = std::max(m, row[j]);
        double z = std::exp((dp[size_t(i)] - m) / tau);
        const double zp = z;
        for (int j = 0; j < k; ++j) z += std::exp((row[j] - m) / tau);
        total += std::log(z) - (dp[size_t(i)] - m) / tau;
        (*prob_pos)[size_t(i)] = zp / z;
        for (int j = 0; j < k; ++j)
            (*prob_neg)[size_t(i) * k + j] = std::exp((row[j] - m) / tau) / z;
    }

    NodePtr np = pos_sims.node(), nn_ = neg_sims.node();
    return make_op({}, {total / double(n)}, "info_nce", {&pos_sims, &neg_sims},
                   [np, nn_, prob_pos, prob_neg, n, k, tau](const std::vector<double>& g,
                                                            BackwardCtx& ctx) {
                       const double gv = g[0] / (double(n) * tau);
                       if (np) {
                           auto& gp = ctx.grad_of(np);
                           for (int i = 0; i < n; ++i)
                               gp[size_t(i)] += gv * ((*prob_pos)[size_t(i)] - 1.0);
                       }
                       if (nn_) {
                           auto& gn = ctx.grad_of(nn_);
                           for (int i = 0; i < n; ++i)
                               for (int j = 0; j < k; ++j)
                                   gn[size_t(i) * k + j] += gv * (*prob_neg)[size_t(i) * k + j];
                       }
                   });
}

std::vector<int> dense_match(const std::vector<double>& q_cells,
                             const std::vector<double>& k_cells, int cells, int dim) {
    if (int64_t(q_cells.size()) != int64_t(cells) * dim ||
        int64_t(k_cells.size()) != int64_t(cells) * dim) {
        throw TensorError("dense_match: cell matrix size mismatch");
    }
    std::vector<int> match(size_t(cells), 0);
    for (int i = 0; i < cells; ++i) {
        const double* q = q_cells.data() + size_t(i) * dim;
        double best = -2.0;
        int best_j = 0;
        for (int j = 0; j < cells; ++j) {
            const double* kk = k_cells.data() + size_t(j) * dim;
            double s = 0.0;
            for (int d = 0; d < dim; ++d) s += q[d] * kk[d];
            if (s > best) {
                best = s;
                best_j = j;
            }
        }
        match[size_t(i)] = best_j;
    }
    return match;
}

Tensor densecl_loss(const Tensor& global_term, const Tensor& local_term, double w_local) {
    if (w_local < 0.0 || w_local > 1.0) throw TensorError("densecl_loss: w_local outside [0,1]");
    return ad::add(ad::scale(global_term, 1.0 - w_local), ad::scale(local_term, w_local));
}

}  // namespace complearn::ssl
