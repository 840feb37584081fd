#pragma once
#include <string>
#include <vector>

#include "complearn/params.hpp"
#include "complearn/rng.hpp"
#include "complearn/tensor.hpp"

namespace complearn::nn {

using ad::Tensor;

// ---- layer primitives ----
// Parameters are held in a ModelParams tree; these functions take the
// parameter tensors directly so the same code serves the query and the
// momentum (key) encoder.

// Cross-correlation (no kernel flip) + bias. x: [N,C,H,W], w: [OC,C,KH,KW].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

// Per-(sample,group) standardization, then per-channel affine.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int num_groups,
                  double eps);

Tensor global_avg_pool(const Tensor& x);                      // [N,C,H,W] -> [N,C]
Tensor adaptive_avg_pool(const Tensor& x, int grid);          // [N,C,H,W] -> [N,C,S,S]
Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w);  // corner-aligned

// y = x W^T + b. x: [N,in], W: [out,in], b: [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- model specification ----

enum class Task { depth, semseg, boundary };
enum class Aux { none, rot, moco, densecl };

std::string task_name(Task t);
std::string aux_name(Aux a);
Task task_from_name(const std::string& s);
Aux aux_from_name(const std::string& s);

int task_out_channels(Task t, int seg_classes);

struct ConvSpec {
    std::string name;
    int in_ch = 0, out_ch = 0, kh = 0, kw = 0, stride = 1, pad = 0;
    bool has_norm = false;  // GN + ReLU follow the conv
};

// Mini encoder-decoder trunk: stride-2 conv stages down, bilinear + conv
// stages back up. The shared feature map keeps the input resolution.
struct TrunkSpec {
    int in_ch = 3;
    std::vector<int> enc_channels{16, 32, 64};
    int feature_dim = 16;
    int gn_groups = 8;
    double gn_eps = 1e-5;

    std::vector<ConvSpec> conv_specs() const;
};

struct HeadSpec {
    std::vector<Task> target_tasks{Task::depth};
    Aux aux = Aux::none;
    int seg_classes = 4;
    int embed_dim = 128;
    int dense_grid = 4;  // S: local cells are an S x S pooling of the feature map
};

struct ModelSpec {
    TrunkSpec trunk;
    HeadSpec heads;
};

// He fan-in normal weights, zero biases, gamma=1, beta=0.
ModelParams init_params(const ModelSpec& spec, uint64_t seed);

// Parameter subset the momentum encoder mirrors: trunk + auxiliary head.
std::vector<std::string> key_encoder_param_names(const ModelSpec& spec, const ModelParams& p);

// ---- forward passes ----

struct ParamView {
    const ModelParams* params;
    bool grad;
    Tensor operator()(const std::string& name) const { return params->leaf(name, grad); }
};

// Shared representation; output spatial size equals input spatial size.
Tensor trunk_forward(const ModelSpec& spec, const ParamView& pv, const Tensor& images);

// Target head: 1x1 conv over the shared features -> [N,task_ch,H,W].
Tensor target_head_forward(const ModelSpec& spec, const ParamView& pv, Task task,
                           const Tensor& features);

// GAP -> linear -> 4 rotation logits.
Tensor rot_head_forward(const ModelSpec& spec, const ParamView& pv, const Tensor& features);

// GAP -> 2-layer MLP -> L2-normalized 128-d rows [N,128].
Tensor project_global(const ModelSpec& spec, const ParamView& pv, const Tensor& features);

// Adaptive pool to S x S -> two 1x1 convs -> per-cell L2 norm -> [N,S*S,128].
Tensor project_dense(const ModelSpec& spec, const ParamView& pv, const Tensor& features);

}  // namespace complearn::nn
