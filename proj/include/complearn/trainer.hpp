#pragma once
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "complearn/data.hpp"
#include "complearn/nn.hpp"
#include "complearn/rng.hpp"
#include "complearn/ssl.hpp"
#include "complearn/tasks.hpp"

namespace complearn::train {

enum class Mode { baseline, joint, pretrain_finetune, pretrain_joint, multitask, multitask_joint };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& s);

// Full experiment description. All randomness descends from `seed` through
// separate streams (target sampling, aux sampling, and one augmentation
// stream per side) so toggling the auxiliary task cannot perturb the
// target-side draws.
struct TrainConfig {
    Mode mode = Mode::baseline;
    std::vector<nn::Task> target_tasks{nn::Task::depth};
    nn::Aux aux = nn::Aux::none;
    double lambda = 0.2;
    double base_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double poly_power = 0.9;
    int max_iters = 500;
    int batch_target = 4;
    int batch_aux = 4;
    double labeled_fraction = 1.0;
    uint64_t seed = 1;

    // self-supervision
    double tau = 0.2;
    double ema_momentum = 0.999;
    double w_local = 0.7;
    int dense_grid = 4;
    data::CropGeometry crop{24, 24, 2};

    // data
    data::DomainParams domain;
    int train_size = 64;
    int val_size = 32;
    uint64_t data_seed = 9001;
    int seg_classes = 4;

    int eval_every = 0;  // 0 -> max_iters / 10

    void validate() const;  // throws TensorError naming the offending field
    bool aux_enabled_in(Mode m, int phase) const;
    int total_iters() const;
    bool two_phase() const { return mode == Mode::pretrain_finetune || mode == Mode::pretrain_joint; }
};

struct HistoryRow {
    int iter = 0;
    int phase = 1;
    double lr = 0.0;
    double loss_target = 0.0;
    double loss_aux = 0.0;
    double loss_total = 0.0;
};

struct EvalRecord {
    int iter = 0;
    std::string task;
    std::string metric;
    double value = 0.0;
};

struct TrainHistory {
    std::vector<HistoryRow> rows;
    std::vector<EvalRecord> evals;
};

void history_csv(const TrainHistory& h, std::ostream& os);

struct OptimizerState {
    std::map<std::string, std::vector<double>> velocity;
    int iter = 0;
};

// base_lr * (1 - iter/max_iters)^power
double poly_lr(int iter, int max_iters, double base_lr, double power);

// g' = g + wd*theta; v <- mu*v + g'; theta <- theta - lr*v.
// Applies to every parameter present in the GradMap.
void sgd_step(nn::ModelParams& params, const ad::GradMap& grads, OptimizerState& state, double lr,
              double momentum, double weight_decay);

// Independent draws: target batch from the labeled subset, auxiliary batch
// from the full image pool.
struct JointBatchIndices {
    std::vector<int> target;
    std::vector<int> aux;
};
JointBatchIndices build_joint_batch(Rng& target_stream, Rng& aux_stream,
                                    const std::vector<int>& labeled_indices, int pool_size,
                                    int batch_target, int batch_aux);

struct Datasets {
    std::vector<data::SyntheticSample> train;
    std::vector<data::SyntheticSample> val;
    std::vector<data::SyntheticSample> val_shifted;
};

Datasets build_datasets(const TrainConfig& cfg, bool with_shifted = false);

// Evaluation forward: trunk + target head only, no augmentation.
tasks::MetricValue evaluate_model(const nn::ModelSpec& spec, const nn::ModelParams& params,
                                  nn::Task task, const std::vector<data::SyntheticSample>& ds);

class Trainer {
public:
    Trainer(TrainConfig cfg, Datasets ds);

    // One optimizer step; returns false once all phases have finished.
    bool step();
    void run();

    const TrainConfig& config() const { return cfg_; }
    const nn::ModelSpec& spec() const { return spec_; }
    const nn::ModelParams& params() const { return params_; }
    nn::ModelParams& mutable_params() { return params_; }
    const nn::ModelParams& key_params() const { return key_params_; }
    const ssl::MemoryQueue& global_queue() const { return global_queue_; }
    const ssl::MemoryQueue& local_queue() const { return local_queue_; }
    const TrainHistory& history() const { return history_; }
    const Datasets& datasets() const { return ds_; }
    int iter() const { return state_.iter; }

    tasks::MetricValue evaluate(nn::Task task, const std::vector<data::SyntheticSample>& ds) const;

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    // Exposed for invariant tests: gradients of the most recent step.
    const ad::GradMap& last_grads() const { return last_grads_; }

private:
    struct PhaseState {
        int phase = 1;        // 1-based
        int iter_in_phase = 0;
        bool target_active = true;
        bool aux_active = false;
        double lambda_eff = 0.0;
    };
    PhaseState phase_state(int iter) const;

    ad::Tensor target_loss(const std::vector<int>& indices);
    ad::Tensor aux_loss(const std::vector<int>& indices);
    void contrastive_post_step();
    void maybe_eval(int iter);

    TrainConfig cfg_;
    Datasets ds_;
    nn::ModelSpec spec_;
    nn::ModelParams params_;
    nn::ModelParams key_params_;           // EMA copy of trunk + aux head
    std::vector<std::string> key_names_;
    ssl::MemoryQueue global_queue_;
    ssl::MemoryQueue local_queue_;
    OptimizerState state_;
    TrainHistory history_;
    std::vector<int> labeled_indices_;
    Rng target_stream_, aux_stream_, target_aug_stream_, aux_aug_stream_;
    ad::GradMap last_grads_;

    // Pending contrastive keys computed during the forward pass, pushed to
    // the queues after the optimizer step.
    std::vector<double> pending_global_keys_;
    std::vector<double> pending_local_keys_;
    int pending_key_count_ = 0;
};

// Convenience wrapper: constructs datasets, runs every phase, returns the
// trainer for inspection.
Trainer run_training(const TrainConfig& cfg, Datasets ds);

}  // namespace complearn::train
