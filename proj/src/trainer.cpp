#include "complearn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace complearn::train {

using ad::GradMap;
using ad::Tensor;
using ad::TensorError;

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::baseline: return "baseline";
        case Mode::joint: return "joint";
        case Mode::pretrain_finetune: return "pretrain_finetune";
        case Mode::pretrain_joint: return "pretrain_joint";
        case Mode::multitask: return "multitask";
        case Mode::multitask_joint: return "multitask_joint";
    }
    return "?";
}

Mode mode_from_name(const std::string& s) {
    if (s == "baseline") return Mode::baseline;
    if (s == "joint") return Mode::joint;
    if (s == "pretrain_finetune") return Mode::pretrain_finetune;
    if (s == "pretrain_joint") return Mode::pretrain_joint;
    if (s == "multitask") return Mode::multitask;
    if (s == "multitask_joint") return Mode::multitask_joint;
    throw TensorError("unknown mode '" + s + "'");
}

void TrainConfig::validate() const {
    if (target_tasks.empty()) throw TensorError("config: target_tasks must be non-empty");
    if (lambda < 0.0) throw TensorError("config: lambda must be >= 0");
    if (base_lr <= 0.0) throw TensorError("config: base_lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw TensorError("config: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw TensorError("config: weight_decay must be >= 0");
    if (max_iters < 1) throw TensorError("config: max_iters must be >= 1");
    if (batch_target < 1 || batch_aux < 1) throw TensorError("config: batch sizes must be >= 1");
    if (batch_aux != batch_target) {
        throw TensorError("config: batch_aux must equal batch_target");
    }
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) {
        throw TensorError("config: labeled_fraction outside (0,1]");
    }
    if (tau <= 0.0) throw TensorError("config: tau must be > 0");
    if (ema_momentum < 0.0 || ema_momentum >= 1.0) {
        throw TensorError("config: ema_momentum must be in [0,1)");
    }
    if (w_local < 0.0 || w_local > 1.0) throw TensorError("config: w_local outside [0,1]");
    if (train_size < 1 || val_size < 1) throw TensorError("config: dataset sizes must be >= 1");
    if (!domain.valid()) throw TensorError("config: invalid domain params");
    if (seg_classes < 2) throw TensorError("config: seg_classes must be >= 2");
    if (aux == nn::Aux::rot && domain.h != domain.w) {
        throw TensorError("config: rot auxiliary requires square images");
    }
    if (crop.crop_h + crop.offset > domain.h || crop.crop_w + crop.offset > domain.w) {
        throw TensorError("config: crop geometry does not fit image");
    }
    const bool multi = mode == Mode::multitask || mode == Mode::multitask_joint;
    if (multi && target_tasks.size() < 2) {
        throw TensorError("config: multitask modes need at least two target tasks");
    }
    if (!multi && target_tasks.size() != 1) {
        throw TensorError("config: single-task modes take exactly one target task");
    }
    if ((mode == Mode::pretrain_finetune || mode == Mode::pretrain_joint) && aux == nn::Aux::none) {
        throw TensorError("config: pretrain modes require an auxiliary task");
    }
}

bool TrainConfig::aux_enabled_in(Mode m, int phase) const {
    if (aux == nn::Aux::none) return false;
    switch (m) {
        case Mode::baseline:
        case Mode::multitask: return false;
        case Mode::joint:
        case Mode::multitask_joint: return true;
        case Mode::pretrain_finetune: return phase == 1;
        case Mode::pretrain_joint: return true;
    }
    return false;
}

int TrainConfig::total_iters() const { return two_phase() ? 2 * max_iters : max_iters; }

double poly_lr(int iter, int max_iters, double base_lr, double power) {
    if (iter < 0 || iter > max_iters) throw TensorError("poly_lr: iter outside [0,max_iters]");
    return base_lr * std::pow(1.0 - double(iter) / double(max_iters), power);
}

void sgd_step(nn::ModelParams& params, const GradMap& grads, OptimizerState& state, double lr,
              double momentum, double weight_decay) {
    for (const auto& [name, grad] : grads.grads) {
        auto& e = params.entry(name);  // throws for unknown parameters
        const auto& g = grad.data();
        if (g.size() != e.value.size()) {
            throw TensorError("sgd_step: gradient shape mismatch for " + name);
        }
        auto it = state.velocity.find(name);
        if (it == state.velocity.end()) {
            it = state.velocity.emplace(name, std::vector<double>(e.value.size(), 0.0)).first;
        }
        auto& v = it->second;
        for (size_t i = 0; i < g.size(); ++i) {
            const double gp = g[i] + weight_decay * e.value[i];
            v[i] = momentum * v[i] + gp;
            e.value[i] -= lr * v[i];
        }
    }
}

JointBatchIndices build_joint_batch(Rng& target_stream, Rng& aux_stream,
                                    const std::vector<int>& labeled_indices, int pool_size,
                                    int batch_target, int batch_aux) {
    if (labeled_indices.empty() || pool_size < 1) throw TensorError("build_joint_batch: empty split");
    JointBatchIndices out;
    out.target.reserve(size_t(batch_target));
    for (int i = 0; i < batch_target; ++i) {
        out.target.push_back(labeled_indices[target_stream.uniform_int(labeled_indices.size())]);
    }
    out.aux.reserve(size_t(batch_aux));
    for (int i = 0; i < batch_aux; ++i) {
        out.aux.push_back(int(aux_stream.uniform_int(uint64_t(pool_size))));
    }
    return out;
}

Datasets build_datasets(const TrainConfig& cfg, bool with_shifted) {
    Datasets ds;
    ds.train = data::make_dataset(cfg.train_size, cfg.data_seed, cfg.domain);
    ds.val = data::make_dataset(cfg.val_size, Rng::derive(cfg.data_seed, 7777).next_u64(), cfg.domain);
    if (with_shifted) {
        ds.val_shifted = data::make_dataset(cfg.val_size, Rng::derive(cfg.data_seed, 8888).next_u64(),
                                            data::shifted_domain(cfg.domain));
    }
    return ds;
}

// ---- evaluation ----

namespace {

Tensor batch_image_tensor(const std::vector<data::SyntheticSample>& ds,
                          const std::vector<int>& indices) {
    const int h = ds[size_t(indices[0])].h, w = ds[size_t(indices[0])].w;
    std::vector<double> buf;
    buf.reserve(size_t(indices.size()) * 3 * h * w);
    for (int idx : indices) {
        const auto& img = ds[size_t(idx)].image;
        buf.insert(buf.end(), img.begin(), img.end());
    }
    return Tensor::constant({int(indices.size()), 3, h, w}, std::move(buf));
}

}  // namespace

tasks::MetricValue evaluate_model(const nn::ModelSpec& spec, const nn::ModelParams& params,
                                  nn::Task task, const std::vector<data::SyntheticSample>& ds) {
    if (ds.empty()) throw TensorError("evaluate: empty dataset");
    const nn::ParamView pv{&params, false};
    const int h = ds[0].h, w = ds[0].w;

    tasks::RmseAccum rmse_acc;
    tasks::ConfusionMatrix cm(spec.heads.seg_classes);
    std::vector<std::vector<double>> probs;
    std::vector<tasks::BoundaryMap> gts;

    const int chunk = 8;
    for (size_t start = 0; start < ds.size(); start += chunk) {
        std::vector<int> idx;
        for (size_t i = start; i < std::min(ds.size(), start + chunk); ++i) idx.push_back(int(i));
        Tensor feats = nn::trunk_forward(spec, pv, batch_image_tensor(ds, idx));
        Tensor pred = nn::target_head_forward(spec, pv, task, feats);
        const auto& dp = pred.data();
        const int64_t plane = int64_t(h) * w;
        for (size_t bi = 0; bi < idx.size(); ++bi) {
            const auto& sample = ds[size_t(idx[bi])];
            switch (task) {
                case nn::Task::depth: {
                    std::vector<double> vals(dp.begin() + int64_t(bi) * plane,
                                             dp.begin() + int64_t(bi + 1) * plane);
                    rmse_acc.add(vals, sample.depth);
                    break;
                }
                case nn::Task::semseg: {
                    const int c = spec.heads.seg_classes;
                    tasks::SegMap sm{h, w, std::vector<int>(size_t(plane), 0)};
                    for (int64_t p = 0; p < plane; ++p) {
                        int best = 0;
                        double bv = dp[size_t((int64_t(bi) * c) * plane + p)];
                        for (int k = 1; k < c; ++k) {
                            const double v = dp[size_t((int64_t(bi) * c + k) * plane + p)];
                            if (v > bv) {
                                bv = v;
                                best = k;
                            }
                        }
                        sm.labels[size_t(p)] = best;
                    }
                    cm.add(sm, sample.seg);
                    break;
                }
                case nn::Task::boundary: {
                    std::vector<double> pr(static_cast<size_t>(plane));
                    for (int64_t p = 0; p < plane; ++p) {
                        const double x = dp[size_t(int64_t(bi) * plane + p)];
                        pr[size_t(p)] = 1.0 / (1.0 + std::exp(-x));
                    }
                    probs.push_back(std::move(pr));
                    gts.push_back(sample.boundary);
                    break;
                }
            }
        }
    }

    tasks::MetricValue mv;
    mv.count = int64_t(ds.size());
    switch (task) {
        case nn::Task::depth:
            mv.name = "rmse";
            mv.value = rmse_acc.value();
            break;
        case nn::Task::semseg:
            mv.name = "miou";
            mv.value = cm.miou();
            break;
        case nn::Task::boundary:
            mv.name = "ods_f";
            mv.value = tasks::ods_fscore(probs, gts, h, w);
            break;
    }
    return mv;
}

// ---- trainer ----

Trainer::Trainer(TrainConfig cfg, Datasets ds) : cfg_(std::move(cfg)), ds_(std::move(ds)) {
    cfg_.validate();
    if (int(ds_.train.size()) != cfg_.train_size) {
        throw TensorError("trainer: dataset size does not match config");
    }
    spec_.trunk = nn::TrunkSpec{};
    spec_.heads.target_tasks = cfg_.target_tasks;
    spec_.heads.aux = cfg_.aux;
    spec_.heads.seg_classes = cfg_.seg_classes;
    spec_.heads.dense_grid = cfg_.dense_grid;

    params_ = nn::init_params(spec_, Rng::derive(cfg_.seed, 0).next_u64());
    if (cfg_.aux == nn::Aux::moco || cfg_.aux == nn::Aux::densecl) {
        key_names_ = nn::key_encoder_param_names(spec_, params_);
        for (const auto& name : key_names_) {
            const auto& e = params_.entry(name);
            key_params_.add(name, e.shape, e.value);
        }
        global_queue_ = ssl::MemoryQueue(cfg_.train_size, spec_.heads.embed_dim);
        if (cfg_.aux == nn::Aux::densecl) {
            local_queue_ = ssl::MemoryQueue(cfg_.train_size, spec_.heads.embed_dim);
        }
    }

    labeled_indices_ = data::make_splits(cfg_.train_size, cfg_.labeled_fraction, cfg_.seed);
    target_stream_ = Rng::derive(cfg_.seed, 1);
    aux_stream_ = Rng::derive(cfg_.seed, 2);
    target_aug_stream_ = Rng::derive(cfg_.seed, 3);
    aux_aug_stream_ = Rng::derive(cfg_.seed, 4);
}

Trainer::PhaseState Trainer::phase_state(int iter) const {
    PhaseState ps;
    if (cfg_.two_phase()) {
        ps.phase = iter < cfg_.max_iters ? 1 : 2;
        ps.iter_in_phase = iter - (ps.phase - 1) * cfg_.max_iters;
    } else {
        ps.phase = 1;
        ps.iter_in_phase = iter;
    }
    const bool pretrain_phase = cfg_.two_phase() && ps.phase == 1;
    ps.target_active = !pretrain_phase;
    ps.aux_active = cfg_.aux_enabled_in(cfg_.mode, ps.phase);
    ps.lambda_eff = pretrain_phase ? 1.0 : cfg_.lambda;
    return ps;
}

Tensor Trainer::target_loss(const std::vector<int>& indices) {
    const int h = cfg_.domain.h, w = cfg_.domain.w;
    std::vector<data::SyntheticSample> batch;
    batch.reserve(indices.size());
    for (int idx : indices) {
        auto ops = data::draw_target_augment(target_aug_stream_);
        batch.push_back(data::apply_target_augment(ds_.train[size_t(idx)], ops));
    }
    std::vector<double> buf;
    buf.reserve(batch.size() * 3 * size_t(h) * w);
    for (const auto& s : batch) buf.insert(buf.end(), s.image.begin(), s.image.end());
    Tensor images = Tensor::constant({int(batch.size()), 3, h, w}, std::move(buf));

    const nn::ParamView pv{&params_, true};
    Tensor feats = nn::trunk_forward(spec_, pv, images);

    Tensor loss;
    bool first = true;
    for (nn::Task task : cfg_.target_tasks) {
        Tensor pred = nn::target_head_forward(spec_, pv, task, feats);
        Tensor term;
        switch (task) {
            case nn::Task::depth: {
                std::vector<double> gt;
                gt.reserve(batch.size() * size_t(h) * w);
                for (const auto& s : batch)
                    gt.insert(gt.end(), s.depth.values.begin(), s.depth.values.end());
                term = tasks::l1_loss(pred, Tensor::constant(pred.shape(), std::move(gt)));
                break;
            }
            case nn::Task::semseg: {
                std::vector<tasks::SegMap> gts;
                for (const auto& s : batch) gts.push_back(s.seg);
                term = tasks::ce_loss_semseg(pred, gts);
                break;
            }
            case nn::Task::boundary: {
                std::vector<tasks::BoundaryMap> gts;
                for (const auto& s : batch) gts.push_back(s.boundary);
                term = tasks::weighted_bce_boundary(pred, gts);
                break;
            }
        }
        loss = first ? term : ad::add(loss, term);
        first = false;
    }
    return loss;
}

Tensor Trainer::aux_loss(const std::vector<int>& indices) {
    const int h = cfg_.domain.h, w = cfg_.domain.w;
    const nn::ParamView pv{&params_, true};
    const nn::ParamView kv{&key_params_, false};

    if (cfg_.aux == nn::Aux::rot) {
        std::vector<double> buf;
        std::vector<int> labels;
        buf.reserve(indices.size() * 3 * size_t(h) * w);
        for (int idx : indices) {
            data::ViewJitter jit;
            jit.brightness = aux_aug_stream_.uniform(-0.2, 0.2);
            jit.contrast = aux_aug_stream_.uniform(-0.2, 0.2);
            jit.blur = aux_aug_stream_.bernoulli(0.5);
            jit.blur_sigma = aux_aug_stream_.uniform(0.1, 1.0);
            const int k = int(aux_aug_stream_.uniform_int(4));
            auto img = data::jitter_image(ds_.train[size_t(idx)].image, h, w, jit);
            Tensor rot = ssl::rotate_image(Tensor::constant({3, h, w}, std::move(img)), k);
            const auto& rd = rot.data();
            buf.insert(buf.end(), rd.begin(), rd.end());
            labels.push_back(k);
        }
        Tensor images = Tensor::constant({int(indices.size()), 3, h, w}, std::move(buf));
        Tensor logits = nn::rot_head_forward(spec_, pv, nn::trunk_forward(spec_, pv, images));
        return ssl::rotation_loss(logits, labels);
    }

    // Contrastive branches: two shifted crops per image, query through the
    // live encoder, key through the EMA encoder.
    const int ch = cfg_.crop.crop_h, cw = cfg_.crop.crop_w;
    std::vector<double> qbuf, kbuf;
    qbuf.reserve(indices.size() * 3 * size_t(ch) * cw);
    kbuf.reserve(indices.size() * 3 * size_t(ch) * cw);
    for (int idx : indices) {
        auto ops = data::draw_ssl_pair(aux_aug_stream_, h, w, cfg_.crop);
        auto pair = data::apply_ssl_pair(ds_.train[size_t(idx)].image, h, w, cfg_.crop, ops);
        qbuf.insert(qbuf.end(), pair.view_q.begin(), pair.view_q.end());
        kbuf.insert(kbuf.end(), pair.view_k.begin(), pair.view_k.end());
    }
    const int n = int(indices.size());
    Tensor q_images = Tensor::constant({n, 3, ch, cw}, std::move(qbuf));
    Tensor k_images = Tensor::constant({n, 3, ch, cw}, std::move(kbuf));

    Tensor q_feats = nn::trunk_forward(spec_, pv, q_images);
    Tensor k_feats = nn::trunk_forward(spec_, kv, k_images);  // no tape: all constants

    Tensor zq = nn::project_global(spec_, pv, q_feats);
    Tensor zk = nn::project_global(spec_, kv, k_feats);

    Tensor pos = ad::rowwise_dot(zq, zk);
    Tensor negs = ad::matmul(zq, ad::transpose(global_queue_.negatives()));
    Tensor global_term = ssl::info_nce(pos, negs, cfg_.tau);

    pending_global_keys_ = zk.data();
    pending_key_count_ = n;

    if (cfg_.aux == nn::Aux::moco) {
        pending_local_keys_.clear();
        return global_term;
    }

    // DenseCL local term over matched grid cells.
    const int s2 = cfg_.dense_grid * cfg_.dense_grid;
    const int ed = spec_.heads.embed_dim;
    Tensor dq = nn::project_dense(spec_, pv, q_feats);  // [N,S*S,128]
    Tensor dk = nn::project_dense(spec_, kv, k_feats);

    const auto& dq_data = dq.data();
    const auto& dk_data = dk.data();
    std::vector<double> matched(size_t(n) * s2 * ed);
    pending_local_keys_.assign(size_t(n) * ed, 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> qc(dq_data.begin() + size_t(i) * s2 * ed,
                               dq_data.begin() + size_t(i + 1) * s2 * ed);
        std::vector<double> kc(dk_data.begin() + size_t(i) * s2 * ed,
                               dk_data.begin() + size_t(i + 1) * s2 * ed);
        auto match = ssl::dense_match(qc, kc, s2, ed);
        for (int cidx = 0; cidx < s2; ++cidx) {
            const double* src = kc.data() + size_t(match[size_t(cidx)]) * ed;
            std::copy(src, src + ed, matched.begin() + (size_t(i) * s2 + size_t(cidx)) * ed);
        }
        // One pooled key vector per image feeds the local negatives queue.
        for (int cidx = 0; cidx < s2; ++cidx)
            for (int d = 0; d < ed; ++d)
                pending_local_keys_[size_t(i) * ed + d] += kc[size_t(cidx) * ed + d] / double(s2);
    }

    Tensor dq_flat = ad::reshape(dq, {n * s2, ed});
    Tensor pos_local = ad::rowwise_dot(dq_flat, Tensor::constant({n * s2, ed}, std::move(matched)));
    Tensor negs_local = ad::matmul(dq_flat, ad::transpose(local_queue_.negatives()));
    Tensor local_term = ssl::info_nce(pos_local, negs_local, cfg_.tau);

    return ssl::densecl_loss(global_term, local_term, cfg_.w_local);
}

void Trainer::contrastive_post_step() {
    ssl::momentum_update(key_params_, params_, key_names_, cfg_.ema_momentum);
    if (pending_key_count_ > 0) {
        global_queue_.push_rows(pending_global_keys_, pending_key_count_);
        if (cfg_.aux == nn::Aux::densecl) {
            local_queue_.push_rows(pending_local_keys_, pending_key_count_);
        }
    }
    pending_global_keys_.clear();
    pending_local_keys_.clear();
    pending_key_count_ = 0;
}

void Trainer::maybe_eval(int completed) {
    int cadence = cfg_.eval_every > 0 ? cfg_.eval_every : std::max(1, cfg_.max_iters / 10);
    if (completed % cadence != 0 && completed != cfg_.total_iters()) return;
    for (nn::Task task : cfg_.target_tasks) {
        auto mv = evaluate(task, ds_.val);
        history_.evals.push_back({completed, nn::task_name(task), mv.name, mv.value});
    }
}

bool Trainer::step() {
    if (state_.iter >= cfg_.total_iters()) return false;
    const PhaseState ps = phase_state(state_.iter);
    const double lr = poly_lr(ps.iter_in_phase, cfg_.max_iters, cfg_.base_lr, cfg_.poly_power);

    std::vector<int> target_idx, aux_idx;
    if (ps.target_active) {
        JointBatchIndices jb = build_joint_batch(target_stream_, aux_stream_, labeled_indices_,
                                                 cfg_.train_size, cfg_.batch_target,
                                                 ps.aux_active ? cfg_.batch_aux : 0);
        target_idx = std::move(jb.target);
        aux_idx = std::move(jb.aux);
    } else if (ps.aux_active) {
        for (int i = 0; i < cfg_.batch_aux; ++i) {
            aux_idx.push_back(int(aux_stream_.uniform_int(uint64_t(cfg_.train_size))));
        }
    }

    Tensor lt, la, total;
    double lt_val = 0.0, la_val = 0.0;
    if (ps.target_active) {
        lt = target_loss(target_idx);
        lt_val = lt.value();
    }
    if (ps.aux_active) {
        la = aux_loss(aux_idx);
        la_val = la.value();
    }
    if (ps.target_active && ps.aux_active) {
        total = ad::add(lt, ad::scale(la, ps.lambda_eff));
    } else if (ps.target_active) {
        total = lt;
    } else {
        total = la;
    }
    const double total_val = total.value();
    if (!std::isfinite(total_val)) {
        throw TensorError("train_step: non-finite loss at iter " + std::to_string(state_.iter));
    }

    last_grads_ = ad::backward(total);
    sgd_step(params_, last_grads_, state_, lr, cfg_.momentum, cfg_.weight_decay);
    if (ps.aux_active && (cfg_.aux == nn::Aux::moco || cfg_.aux == nn::Aux::densecl)) {
        contrastive_post_step();
    }

    history_.rows.push_back({state_.iter, ps.phase, lr, lt_val, la_val, total_val});
    state_.iter += 1;
    maybe_eval(state_.iter);
    return state_.iter < cfg_.total_iters();
}

void Trainer::run() {
    while (step()) {
    }
}

tasks::MetricValue Trainer::evaluate(nn::Task task, const std::vector<data::SyntheticSample>& ds) const {
    return evaluate_model(spec_, params_, task, ds);
}

// ---- checkpointing ----

namespace {
constexpr uint64_t kCkptMagic = 0x434c434b50543031ULL;  // "CLCKPT01"
}

void Trainer::save_checkpoint(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw TensorError("checkpoint: cannot open " + path + " for writing");
    nn::io::write_u64(os, kCkptMagic);
    params_.save(os);
    nn::io::write_u64(os, key_names_.empty() ? 0 : 1);
    if (!key_names_.empty()) key_params_.save(os);
    nn::io::write_u64(os, state_.velocity.size());
    for (const auto& [name, v] : state_.velocity) {
        nn::io::write_string(os, name);
        nn::io::write_f64_vec(os, v);
    }
    nn::io::write_u64(os, uint64_t(state_.iter));
    nn::io::write_u64(os, global_queue_.capacity() > 0 ? 1 : 0);
    if (global_queue_.capacity() > 0) global_queue_.save(os);
    nn::io::write_u64(os, local_queue_.capacity() > 0 ? 1 : 0);
    if (local_queue_.capacity() > 0) local_queue_.save(os);
    for (const Rng* r : {&target_stream_, &aux_stream_, &target_aug_stream_, &aux_aug_stream_}) {
        for (uint64_t wdd : r->state()) nn::io::write_u64(os, wdd);
    }
    if (!os) throw TensorError("checkpoint: write failure");
}

void Trainer::load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TensorError("checkpoint: cannot open " + path);
    if (nn::io::read_u64(is) != kCkptMagic) throw TensorError("checkpoint: bad magic");
    nn::ModelParams loaded = nn::ModelParams::load(is);
    // Architecture must match what this trainer was built with.
    if (loaded.size() != params_.size()) throw TensorError("checkpoint: parameter set mismatch");
    for (const auto& e : loaded.entries()) {
        const auto& mine = params_.entry(e.name);
        if (mine.shape != e.shape) throw TensorError("checkpoint: shape mismatch for " + e.name);
    }
    params_ = std::move(loaded);

    const bool has_key = nn::io::read_u64(is) != 0;
    if (has_key != !key_names_.empty()) throw TensorError("checkpoint: key-encoder mismatch");
    if (has_key) {
        nn::ModelParams kp = nn::ModelParams::load(is);
        if (kp.size() != key_params_.size()) throw TensorError("checkpoint: key parameter mismatch");
        key_params_ = std::move(kp);
    }
    state_.velocity.clear();
    const uint64_t nv = nn::io::read_u64(is);
    for (uint64_t i = 0; i < nv; ++i) {
        std::string name = nn::io::read_string(is);
        state_.velocity[name] = nn::io::read_f64_vec(is);
    }
    state_.iter = int(nn::io::read_u64(is));
    if (nn::io::read_u64(is) != 0) global_queue_ = ssl::MemoryQueue::load(is);
    if (nn::io::read_u64(is) != 0) local_queue_ = ssl::MemoryQueue::load(is);
    for (Rng* r : {&target_stream_, &aux_stream_, &target_aug_stream_, &aux_aug_stream_}) {
        std::array<uint64_t, 4> st;
        for (auto& wdd : st) wdd = nn::io::read_u64(is);
        r->set_state(st);
    }
}

void history_csv(const TrainHistory& h, std::ostream& os) {
    os << "iter,phase,lr,loss_target,loss_aux,loss_total\n";
    std::ostringstream line;
    for (const auto& r : h.rows) {
        line.str("");
        line.precision(17);
        line << r.iter << "," << r.phase << "," << r.lr << "," << r.loss_target << ","
             << r.loss_aux << "," << r.loss_total << "\n";
        os << line.str();
    }
}

Trainer run_training(const TrainConfig& cfg, Datasets ds) {
    Trainer t(cfg, std::move(ds));
    t.run();
    return t;
}

}  // namespace complearn::train
