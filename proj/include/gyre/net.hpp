#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gyre/errors.hpp"
#include "gyre/render.hpp"
#include "gyre/tensor.hpp"

namespace gyre {

// ---------------------------------------------------------------------------
// Policy/value network:
//   input [2,42,42]
//   conv 5x5 -> ReLU -> maxpool 2x2
//   conv 4x4 -> ReLU -> maxpool 2x2
//   conv 3x3 -> ReLU
//   dense 512 -> ReLU
//   policy head (softmax over 3) + scalar value head
// All convolutions are stride 1 and zero-padded to keep spatial size
// (pad_before = (k-1)/2, pad_after = k-1-pad_before). Maxpools are 2x2
// stride 2 in ceil mode (odd sizes are end-padded), so 42 -> 21 -> 11.
// Shapes are parameterized so tests can run shrunken variants; standard()
// is the configuration used everywhere else.
// ---------------------------------------------------------------------------

struct NetArch {
    int in_ch = 2, in_h = 42, in_w = 42;
    int c1 = 32, k1 = 5;
    int c2 = 64, k2 = 4;
    int c3 = 64, k3 = 3;
    int dense = 512;
    int actions = 3;

    static NetArch standard() { return NetArch{}; }

    int p1_h() const { return (in_h + 1) / 2; }
    int p1_w() const { return (in_w + 1) / 2; }
    int p2_h() const { return (p1_h() + 1) / 2; }
    int p2_w() const { return (p1_w() + 1) / 2; }
    int flatten() const { return c3 * p2_h() * p2_w(); }

    int64_t param_count() const;
    bool operator==(const NetArch&) const = default;
};

// Parameter count of the standard architecture:
//   conv1 32*(2*5*5)+32, conv2 64*(32*4*4)+64, conv3 64*(64*3*3)+64,
//   dense 7744*512+512, policy 3*512+3, value 512+1  ->  4,038,884
inline constexpr int64_t kStandardParamCount = 4038884;

// One set of tensors shaped for an architecture; used for parameters,
// gradients and Adam moments alike. The dense kernel is stored input-major
// ([flatten, dense]) so every dense pass streams it exactly once.
struct ParamSet {
    NetArch arch;
    Tensor conv1_w, conv1_b;  // [c1, in_ch*k1*k1], [c1]
    Tensor conv2_w, conv2_b;  // [c2, c1*k2*k2],   [c2]
    Tensor conv3_w, conv3_b;  // [c3, c2*k3*k3],   [c3]
    Tensor dense_wt, dense_b; // [flatten, dense], [dense]
    Tensor policy_w, policy_b;// [actions, dense], [actions]
    Tensor value_w, value_b;  // [dense], [1]

    static ParamSet make(const NetArch& arch);

    std::vector<std::pair<const char*, Tensor*>> tensors();
    std::vector<std::pair<const char*, const Tensor*>> tensors() const;

    int64_t param_count() const;
    void zero();
};

using NetworkParams = ParamSet;
using Gradients = ParamSet;

struct AdamState {
    double lr = 1e-3;  // constant for a run
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    ParamSet m, v;

    static AdamState make(const NetArch& arch);
};

// Per-batch activations kept for backward, plus reusable scratch. One cache
// object per training/eval context; buffers are resized on demand. Batches
// are processed in four fixed sample groups (fewer for tiny batches), so
// every group owns its own column scratch.
struct ForwardCache {
    int batch = 0;
    Tensor input;             // [B, in_ch, H, W]
    Tensor a1, p1, a2, p2, a3;
    std::vector<int32_t> idx1, idx2;  // argmax offsets into a1/a2 planes
    Tensor dense_act;         // [B, dense]
    Tensor logits, policy;    // [B, K]
    Tensor value;             // [B]
    // scratch
    static constexpr int kGroups = 4;
    Tensor col[kGroups];      // forward: [CKK, HW]; backward: [HW, CKK]
    Tensor dcol[kGroups];     // backward: [HW, CKK]
    Tensor dense_w_row;       // [dense, flatten] transposed copy for input grads
};

struct ForwardOut {
    Tensor policy;  // [B, K]
    Tensor value;   // [B]
    Tensor logits;  // [B, K]
};

// input shape must be [B, in_ch, in_h, in_w]. Deterministic; parallel row
// splitting only (results independent of the worker count).
ForwardOut forward(const ParamSet& params, const Tensor& input, ForwardCache& cache);

// Accumulates parameter gradients into *grads (caller zeroes) given upstream
// gradients on the policy logits and the value. Either output may be skipped
// by passing nullptr (input_grad is used by the saliency path).
void backward(const ParamSet& params, const ForwardCache& cache, const Tensor& grad_logits,
              const Tensor& grad_value, ParamSet* grads, Tensor* input_grad = nullptr);

// Standard Adam with bias correction; increments state.step once per call.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

// Uniform fan-average init: w ~ U(-L, L), L = sqrt(6 / (fan_in + fan_out));
// biases zero. Deterministic under the seed.
ParamSet init_params(const NetArch& arch, uint64_t seed);

// Single-observation helper for action selection and evaluation.
struct PolicyEval {
    std::array<double, 8> policy{};  // first arch.actions entries are valid
    double value = 0.0;
    int argmax = 0;
};
PolicyEval evaluate_policy(const ParamSet& params, const Observation& obs, ForwardCache& cache);

}  // namespace gyre
