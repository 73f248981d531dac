#include "gyre/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gyre/parallel.hpp"
#include "gyre/rng.hpp"

namespace gyre {

namespace {

// ---------------------------------------------------------------------------
// Kernels. Every loop accumulates per output element in ascending index
// order and splits work by disjoint output ranges only, so results are
// bit-identical for any worker count. Reductions are never split. Fused
// multiply-add is explicit; the build otherwise disables contraction.
//
// Batched passes run the convolutional stack sample-parallel over four fixed
// groups (kernels then execute inline on the group's worker); single-sample
// passes keep the row-level parallelism inside the kernels. Group boundaries
// depend only on the batch size, never on the worker count.
// ---------------------------------------------------------------------------

// C[M,N] += A[M,K] * B[K,N]; axpy form, vectorizes without reassociation
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C) {
    parallel_for(M, [=](int64_t r0, int64_t r1) {
        int64_t i = r0;
        for (; i + 4 <= r1; i += 4) {
            const double* a0 = A + i * K;
            const double* a1 = a0 + K;
            const double* a2 = a1 + K;
            const double* a3 = a2 + K;
            double* c0 = C + i * N;
            double* c1 = c0 + N;
            double* c2 = c1 + N;
            double* c3 = c2 + N;
            for (int k = 0; k < K; ++k) {
                const double* b = B + static_cast<int64_t>(k) * N;
                const double v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
                for (int j = 0; j < N; ++j) {
                    const double bj = b[j];
                    c0[j] = std::fma(v0, bj, c0[j]);
                    c1[j] = std::fma(v1, bj, c1[j]);
                    c2[j] = std::fma(v2, bj, c2[j]);
                    c3[j] = std::fma(v3, bj, c3[j]);
                }
            }
        }
        for (; i < r1; ++i) {
            const double* a = A + i * K;
            double* c = C + i * N;
            for (int k = 0; k < K; ++k) {
                const double* b = B + static_cast<int64_t>(k) * N;
                const double v = a[k];
                if (v == 0.0) continue;
                for (int j = 0; j < N; ++j) c[j] = std::fma(v, b[j], c[j]);
            }
        }
    });
}

// C[M,N] += A[K,M]^T * B[K,N]; k-outer in 8-row blocks so B rows stay hot
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C) {
    parallel_for(M, [=](int64_t r0, int64_t r1) {
        int64_t i = r0;
        for (; i < r1; i += 8) {
            const int rows = static_cast<int>(std::min<int64_t>(8, r1 - i));
            for (int k = 0; k < K; ++k) {
                const double* arow = A + static_cast<int64_t>(k) * M;
                const double* b = B + static_cast<int64_t>(k) * N;
                for (int r = 0; r < rows; ++r) {
                    const double v = arow[i + r];
                    if (v == 0.0) continue;
                    double* c = C + (i + r) * N;
                    for (int j = 0; j < N; ++j) c[j] = std::fma(v, b[j], c[j]);
                }
            }
        }
    });
}

// --- dense layer (input-major weights WT[IN, OUT]) --------------------------
// Every pass streams WT exactly once; zero entries of the activation are
// skipped (post-ReLU inputs are sparse).

void dense_forward(int B, int IN, int OUT, const double* X, const double* WT,
                   const double* bias, double* Y) {
    for (int b = 0; b < B; ++b)
        std::memcpy(Y + static_cast<int64_t>(b) * OUT, bias, sizeof(double) * OUT);
    parallel_for(OUT, [=](int64_t j0, int64_t j1) {
        const int n = static_cast<int>(j1 - j0);
        for (int k = 0; k < IN; ++k) {
            const double* w = WT + static_cast<int64_t>(k) * OUT + j0;
            for (int b = 0; b < B; ++b) {
                const double x = X[static_cast<int64_t>(b) * IN + k];
                if (x == 0.0) continue;
                double* y = Y + static_cast<int64_t>(b) * OUT + j0;
                for (int j = 0; j < n; ++j) y[j] = std::fma(x, w[j], y[j]);
            }
        }
    });
}

void dense_grad_weights(int B, int IN, int OUT, const double* X, const double* dY,
                        double* dWT, double* db) {
    parallel_for(IN, [=](int64_t k0, int64_t k1) {
        for (int64_t k = k0; k < k1; ++k) {
            double* dw = dWT + k * OUT;
            for (int b = 0; b < B; ++b) {
                const double x = X[static_cast<int64_t>(b) * IN + k];
                if (x == 0.0) continue;
                const double* g = dY + static_cast<int64_t>(b) * OUT;
                for (int j = 0; j < OUT; ++j) dw[j] = std::fma(x, g[j], dw[j]);
            }
        }
    });
    for (int b = 0; b < B; ++b) {
        const double* g = dY + static_cast<int64_t>(b) * OUT;
        for (int j = 0; j < OUT; ++j) db[j] += g[j];
    }
}

// dX[B, IN] = dY[B, OUT] * W_row[OUT, IN]; needs the row-major weight copy
void dense_grad_input(int B, int IN, int OUT, const double* dY, const double* W_row,
                      double* dX) {
    std::memset(dX, 0, sizeof(double) * static_cast<size_t>(B) * IN);
    gemm_nn(B, IN, OUT, dY, W_row, dX);
}

// --- im2col family ------------------------------------------------------------
// forward layout:  col[(c*k+ky)*k+kx, y*W+x]
// backward layout: colT[y*W+x, (c*k+ky)*k+kx]
// Both read in[c, y+ky-pb, x+kx-pb] with zero padding, pb = (k-1)/2.

void im2col(const double* in, int C, int H, int W, int k, double* col) {
    const int pb = (k - 1) / 2;
    const int rows = C * k * k;
    parallel_for(rows, [=](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
            const int c = static_cast<int>(r) / (k * k);
            const int ky = (static_cast<int>(r) / k) % k;
            const int kx = static_cast<int>(r) % k;
            const int dy = ky - pb;
            const int dx = kx - pb;
            double* dst = col + r * (static_cast<int64_t>(H) * W);
            const double* plane = in + static_cast<int64_t>(c) * H * W;
            for (int y = 0; y < H; ++y) {
                double* drow = dst + static_cast<int64_t>(y) * W;
                const int sy = y + dy;
                if (sy < 0 || sy >= H) {
                    std::memset(drow, 0, sizeof(double) * W);
                    continue;
                }
                const double* srow = plane + static_cast<int64_t>(sy) * W;
                int x0 = std::max(0, -dx);
                int x1 = std::min(W, W - dx);
                if (x0 > 0) std::memset(drow, 0, sizeof(double) * x0);
                if (x1 > x0) std::memcpy(drow + x0, srow + x0 + dx, sizeof(double) * (x1 - x0));
                if (x1 < W) std::memset(drow + x1, 0, sizeof(double) * (W - x1));
            }
        }
    });
}

void im2col_t(const double* in, int C, int H, int W, int k, double* colT) {
    const int pb = (k - 1) / 2;
    const int ckk = C * k * k;
    parallel_for(static_cast<int64_t>(H) * W, [=](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
            const int y = static_cast<int>(p) / W;
            const int x = static_cast<int>(p) % W;
            double* row = colT + p * ckk;
            int64_t r = 0;
            for (int c = 0; c < C; ++c) {
                const double* plane = in + static_cast<int64_t>(c) * H * W;
                for (int ky = 0; ky < k; ++ky) {
                    const int sy = y + ky - pb;
                    if (sy < 0 || sy >= H) {
                        for (int kx = 0; kx < k; ++kx) row[r++] = 0.0;
                        continue;
                    }
                    const double* srow = plane + static_cast<int64_t>(sy) * W;
                    for (int kx = 0; kx < k; ++kx) {
                        const int sx = x + kx - pb;
                        row[r++] = (sx < 0 || sx >= W) ? 0.0 : srow[sx];
                    }
                }
            }
        }
    });
}

// Scatter-accumulate of the transposed column gradient onto the input plane.
// Channel-parallel: each channel consumes its own slice of every row.
void col2im_t_add(const double* dcolT, int C, int H, int W, int k, double* din) {
    const int pb = (k - 1) / 2;
    const int ckk = C * k * k;
    parallel_for(C, [=](int64_t c0, int64_t c1) {
        for (int64_t c = c0; c < c1; ++c) {
            double* plane = din + c * H * W;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    const double* seg =
                        dcolT + (static_cast<int64_t>(y) * W + x) * ckk + c * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const int sy = y + ky - pb;
                        if (sy < 0 || sy >= H) continue;
                        double* drow = plane + static_cast<int64_t>(sy) * W;
                        for (int kx = 0; kx < k; ++kx) {
                            const int sx = x + kx - pb;
                            if (sx < 0 || sx >= W) continue;
                            drow[sx] += seg[ky * k + kx];
                        }
                    }
                }
            }
        }
    });
}

void add_bias_relu(double* z, const double* bias, int C, int HW) {
    for (int c = 0; c < C; ++c) {
        const double b = bias[c];
        double* row = z + static_cast<int64_t>(c) * HW;
        for (int i = 0; i < HW; ++i) {
            const double v = row[i] + b;
            row[i] = v > 0.0 ? v : 0.0;
        }
    }
}

// 2x2 stride-2 ceil-mode maxpool; ties and the padded edge resolve to the
// first in-bounds cell in scan order.
void maxpool_forward(const double* a, int C, int H, int W, double* out, int32_t* idx,
                     int64_t plane_base) {
    const int OH = (H + 1) / 2;
    const int OW = (W + 1) / 2;
    for (int c = 0; c < C; ++c) {
        const double* plane = a + static_cast<int64_t>(c) * H * W;
        double* oplane = out + static_cast<int64_t>(c) * OH * OW;
        int32_t* iplane = idx + static_cast<int64_t>(c) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                const int y0 = oy * 2, x0 = ox * 2;
                double best = plane[static_cast<int64_t>(y0) * W + x0];
                int bi = y0 * W + x0;
                if (x0 + 1 < W) {
                    const double v = plane[static_cast<int64_t>(y0) * W + x0 + 1];
                    if (v > best) { best = v; bi = y0 * W + x0 + 1; }
                }
                if (y0 + 1 < H) {
                    const double v = plane[static_cast<int64_t>(y0 + 1) * W + x0];
                    if (v > best) { best = v; bi = (y0 + 1) * W + x0; }
                    if (x0 + 1 < W) {
                        const double v2 = plane[static_cast<int64_t>(y0 + 1) * W + x0 + 1];
                        if (v2 > best) { best = v2; bi = (y0 + 1) * W + x0 + 1; }
                    }
                }
                oplane[static_cast<int64_t>(oy) * OW + ox] = best;
                iplane[static_cast<int64_t>(oy) * OW + ox] =
                    static_cast<int32_t>(plane_base + static_cast<int64_t>(c) * H * W + bi);
            }
        }
    }
}

void resize(Tensor& t, std::vector<int> shape) {
    if (t.shape != shape) {
        t.shape = std::move(shape);
        t.data.assign(static_cast<size_t>(t.count()), 0.0);
    }
}

int sample_groups(int batch) { return batch == 1 ? 1 : ForwardCache::kGroups; }

// Per-group conv-layer gradients, merged into the shared accumulator in a
// fixed order afterwards so the result is independent of scheduling.
struct ConvGrads {
    Tensor c1w, c1b, c2w, c2b, c3w, c3b;
    static ConvGrads make(const NetArch& a) {
        ConvGrads g;
        g.c1w = Tensor({a.c1, a.in_ch * a.k1 * a.k1});
        g.c1b = Tensor({a.c1});
        g.c2w = Tensor({a.c2, a.c1 * a.k2 * a.k2});
        g.c2b = Tensor({a.c2});
        g.c3w = Tensor({a.c3, a.c2 * a.k3 * a.k3});
        g.c3b = Tensor({a.c3});
        return g;
    }
};

void add_into(Tensor& dst, const Tensor& src) {
    double* d = dst.ptr();
    const double* s = src.ptr();
    for (int64_t i = 0; i < dst.count(); ++i) d[i] += s[i];
}

}  // namespace

// --- ParamSet ----------------------------------------------------------------

int64_t NetArch::param_count() const {
    int64_t n = 0;
    n += static_cast<int64_t>(c1) * in_ch * k1 * k1 + c1;
    n += static_cast<int64_t>(c2) * c1 * k2 * k2 + c2;
    n += static_cast<int64_t>(c3) * c2 * k3 * k3 + c3;
    n += static_cast<int64_t>(flatten()) * dense + dense;
    n += static_cast<int64_t>(actions) * dense + actions;
    n += static_cast<int64_t>(dense) + 1;
    return n;
}

ParamSet ParamSet::make(const NetArch& a) {
    ParamSet p;
    p.arch = a;
    p.conv1_w = Tensor({a.c1, a.in_ch * a.k1 * a.k1});
    p.conv1_b = Tensor({a.c1});
    p.conv2_w = Tensor({a.c2, a.c1 * a.k2 * a.k2});
    p.conv2_b = Tensor({a.c2});
    p.conv3_w = Tensor({a.c3, a.c2 * a.k3 * a.k3});
    p.conv3_b = Tensor({a.c3});
    p.dense_wt = Tensor({a.flatten(), a.dense});
    p.dense_b = Tensor({a.dense});
    p.policy_w = Tensor({a.actions, a.dense});
    p.policy_b = Tensor({a.actions});
    p.value_w = Tensor({a.dense});
    p.value_b = Tensor({1});
    return p;
}

std::vector<std::pair<const char*, Tensor*>> ParamSet::tensors() {
    return {
        {"conv1.w", &conv1_w},   {"conv1.b", &conv1_b}, {"conv2.w", &conv2_w},
        {"conv2.b", &conv2_b},   {"conv3.w", &conv3_w}, {"conv3.b", &conv3_b},
        {"dense.wt", &dense_wt}, {"dense.b", &dense_b}, {"policy.w", &policy_w},
        {"policy.b", &policy_b}, {"value.w", &value_w}, {"value.b", &value_b},
    };
}

std::vector<std::pair<const char*, const Tensor*>> ParamSet::tensors() const {
    std::vector<std::pair<const char*, const Tensor*>> out;
    for (auto& [name, t] : const_cast<ParamSet*>(this)->tensors()) out.emplace_back(name, t);
    return out;
}

int64_t ParamSet::param_count() const {
    int64_t n = 0;
    for (auto& [name, t] : tensors()) n += t->count();
    return n;
}

void ParamSet::zero() {
    for (auto& [name, t] : tensors()) t->zero();
}

AdamState AdamState::make(const NetArch& arch) {
    AdamState s;
    s.m = ParamSet::make(arch);
    s.v = ParamSet::make(arch);
    return s;
}

ParamSet init_params(const NetArch& arch, uint64_t seed) {
    ParamSet p = ParamSet::make(arch);
    Rng rng(derive_seed(seed, "init"));
    auto fill = [&](Tensor& t, int64_t fan_in, int64_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : t.data) v = rng.uniform(-limit, limit);
    };
    fill(p.conv1_w, static_cast<int64_t>(arch.in_ch) * arch.k1 * arch.k1,
         static_cast<int64_t>(arch.c1) * arch.k1 * arch.k1);
    fill(p.conv2_w, static_cast<int64_t>(arch.c1) * arch.k2 * arch.k2,
         static_cast<int64_t>(arch.c2) * arch.k2 * arch.k2);
    fill(p.conv3_w, static_cast<int64_t>(arch.c2) * arch.k3 * arch.k3,
         static_cast<int64_t>(arch.c3) * arch.k3 * arch.k3);
    fill(p.dense_wt, arch.flatten(), arch.dense);
    fill(p.policy_w, arch.dense, arch.actions);
    fill(p.value_w, arch.dense, 1);
    return p;
}

// --- forward ------------------------------------------------------------------

ForwardOut forward(const ParamSet& params, const Tensor& input, ForwardCache& cache) {
    const NetArch& a = params.arch;
    if (input.shape.size() != 4 || input.shape[1] != a.in_ch || input.shape[2] != a.in_h ||
        input.shape[3] != a.in_w)
        throw ContractViolation("forward: input shape mismatch");
    const int B = input.shape[0];
    cache.batch = B;

    const int H = a.in_h, W = a.in_w;
    const int H1 = a.p1_h(), W1 = a.p1_w();
    const int H2 = a.p2_h(), W2 = a.p2_w();

    resize(cache.input, {B, a.in_ch, H, W});
    std::memcpy(cache.input.ptr(), input.ptr(), sizeof(double) * input.count());
    resize(cache.a1, {B, a.c1, H, W});
    resize(cache.p1, {B, a.c1, H1, W1});
    resize(cache.a2, {B, a.c2, H1, W1});
    resize(cache.p2, {B, a.c2, H2, W2});
    resize(cache.a3, {B, a.c3, H2, W2});
    cache.idx1.resize(static_cast<size_t>(B) * a.c1 * H1 * W1);
    cache.idx2.resize(static_cast<size_t>(B) * a.c2 * H2 * W2);
    resize(cache.dense_act, {B, a.dense});
    resize(cache.logits, {B, a.actions});
    resize(cache.policy, {B, a.actions});
    resize(cache.value, {B});

    const int ckk1 = a.in_ch * a.k1 * a.k1;
    const int ckk2 = a.c1 * a.k2 * a.k2;
    const int ckk3 = a.c2 * a.k3 * a.k3;
    const int64_t col_needed = std::max<int64_t>(
        {static_cast<int64_t>(ckk1) * H * W, static_cast<int64_t>(ckk2) * H1 * W1,
         static_cast<int64_t>(ckk3) * H2 * W2});

    const int groups = sample_groups(B);
    for (int g = 0; g < groups; ++g)
        resize(cache.col[g], {1, static_cast<int>(col_needed)});

    parallel_for(groups, [&](int64_t g0, int64_t g1) {
        for (int64_t g = g0; g < g1; ++g) {
            const int b0 = static_cast<int>(g * B / groups);
            const int b1 = static_cast<int>((g + 1) * B / groups);
            double* col = cache.col[g].ptr();
            for (int b = b0; b < b1; ++b) {
                const double* in_s = cache.input.ptr() + static_cast<int64_t>(b) * a.in_ch * H * W;
                double* a1_s = cache.a1.ptr() + static_cast<int64_t>(b) * a.c1 * H * W;
                double* p1_s = cache.p1.ptr() + static_cast<int64_t>(b) * a.c1 * H1 * W1;
                double* a2_s = cache.a2.ptr() + static_cast<int64_t>(b) * a.c2 * H1 * W1;
                double* p2_s = cache.p2.ptr() + static_cast<int64_t>(b) * a.c2 * H2 * W2;
                double* a3_s = cache.a3.ptr() + static_cast<int64_t>(b) * a.c3 * H2 * W2;

                im2col(in_s, a.in_ch, H, W, a.k1, col);
                std::memset(a1_s, 0, sizeof(double) * static_cast<size_t>(a.c1) * H * W);
                gemm_nn(a.c1, H * W, ckk1, params.conv1_w.ptr(), col, a1_s);
                add_bias_relu(a1_s, params.conv1_b.ptr(), a.c1, H * W);
                maxpool_forward(a1_s, a.c1, H, W, p1_s,
                                cache.idx1.data() + static_cast<int64_t>(b) * a.c1 * H1 * W1,
                                static_cast<int64_t>(b) * a.c1 * H * W);

                im2col(p1_s, a.c1, H1, W1, a.k2, col);
                std::memset(a2_s, 0, sizeof(double) * static_cast<size_t>(a.c2) * H1 * W1);
                gemm_nn(a.c2, H1 * W1, ckk2, params.conv2_w.ptr(), col, a2_s);
                add_bias_relu(a2_s, params.conv2_b.ptr(), a.c2, H1 * W1);
                maxpool_forward(a2_s, a.c2, H1, W1, p2_s,
                                cache.idx2.data() + static_cast<int64_t>(b) * a.c2 * H2 * W2,
                                static_cast<int64_t>(b) * a.c2 * H1 * W1);

                im2col(p2_s, a.c2, H2, W2, a.k3, col);
                std::memset(a3_s, 0, sizeof(double) * static_cast<size_t>(a.c3) * H2 * W2);
                gemm_nn(a.c3, H2 * W2, ckk3, params.conv3_w.ptr(), col, a3_s);
                add_bias_relu(a3_s, params.conv3_b.ptr(), a.c3, H2 * W2);
            }
        }
    });

    dense_forward(B, a.flatten(), a.dense, cache.a3.ptr(), params.dense_wt.ptr(),
                  params.dense_b.ptr(), cache.dense_act.ptr());
    double* act = cache.dense_act.ptr();
    for (int64_t i = 0; i < cache.dense_act.count(); ++i)
        if (act[i] < 0.0) act[i] = 0.0;

    for (int b = 0; b < B; ++b) {
        const double* ad = act + static_cast<int64_t>(b) * a.dense;
        double* lg = cache.logits.ptr() + static_cast<int64_t>(b) * a.actions;
        for (int k = 0; k < a.actions; ++k) {
            const double* w = params.policy_w.ptr() + static_cast<int64_t>(k) * a.dense;
            double s = params.policy_b[k];
            for (int j = 0; j < a.dense; ++j) s += w[j] * ad[j];
            lg[k] = s;
        }
        double v = params.value_b[0];
        const double* vw = params.value_w.ptr();
        for (int j = 0; j < a.dense; ++j) v += vw[j] * ad[j];
        cache.value[b] = v;

        // stable softmax
        double mx = lg[0];
        for (int k = 1; k < a.actions; ++k) mx = std::max(mx, lg[k]);
        double sum = 0.0;
        double* pol = cache.policy.ptr() + static_cast<int64_t>(b) * a.actions;
        for (int k = 0; k < a.actions; ++k) {
            pol[k] = std::exp(lg[k] - mx);
            sum += pol[k];
        }
        for (int k = 0; k < a.actions; ++k) pol[k] /= sum;
    }

    ForwardOut out;
    out.policy = cache.policy;
    out.value = cache.value;
    out.logits = cache.logits;
    return out;
}

// --- backward -------------------------------------------------------------------

void backward(const ParamSet& params, const ForwardCache& cache, const Tensor& grad_logits,
              const Tensor& grad_value, ParamSet* grads, Tensor* input_grad) {
    const NetArch& a = params.arch;
    const int B = cache.batch;
    if (B <= 0) throw ContractViolation("backward: no cached forward pass");
    if (grad_logits.count() != static_cast<int64_t>(B) * a.actions ||
        grad_value.count() != B)
        throw ContractViolation("backward: upstream gradient shape mismatch");
    if (grads && grads->arch != a)
        throw ContractViolation("backward: gradient arch mismatch");

    const int H = a.in_h, W = a.in_w;
    const int H1 = a.p1_h(), W1 = a.p1_w();
    const int H2 = a.p2_h(), W2 = a.p2_w();
    const int ckk1 = a.in_ch * a.k1 * a.k1;
    const int ckk2 = a.c1 * a.k2 * a.k2;
    const int ckk3 = a.c2 * a.k3 * a.k3;

    auto& c = const_cast<ForwardCache&>(cache);  // scratch buffers only

    // heads
    Tensor dad({B, a.dense});
    for (int b = 0; b < B; ++b) {
        const double* ad = cache.dense_act.ptr() + static_cast<int64_t>(b) * a.dense;
        double* dy = dad.ptr() + static_cast<int64_t>(b) * a.dense;
        for (int k = 0; k < a.actions; ++k) {
            const double g = grad_logits[static_cast<int64_t>(b) * a.actions + k];
            if (g == 0.0) continue;
            const double* w = params.policy_w.ptr() + static_cast<int64_t>(k) * a.dense;
            for (int j = 0; j < a.dense; ++j) dy[j] = std::fma(g, w[j], dy[j]);
            if (grads) {
                double* dw = grads->policy_w.ptr() + static_cast<int64_t>(k) * a.dense;
                for (int j = 0; j < a.dense; ++j) dw[j] = std::fma(g, ad[j], dw[j]);
                grads->policy_b[k] += g;
            }
        }
        const double gv = grad_value[b];
        if (gv != 0.0) {
            const double* vw = params.value_w.ptr();
            for (int j = 0; j < a.dense; ++j) dy[j] = std::fma(gv, vw[j], dy[j]);
            if (grads) {
                double* dvw = grads->value_w.ptr();
                for (int j = 0; j < a.dense; ++j) dvw[j] = std::fma(gv, ad[j], dvw[j]);
                grads->value_b[0] += gv;
            }
        }
    }

    // dense ReLU mask
    {
        const double* act = cache.dense_act.ptr();
        double* dy = dad.ptr();
        for (int64_t i = 0; i < dad.count(); ++i)
            if (act[i] <= 0.0) dy[i] = 0.0;
    }

    if (grads)
        dense_grad_weights(B, a.flatten(), a.dense, cache.a3.ptr(), dad.ptr(),
                           grads->dense_wt.ptr(), grads->dense_b.ptr());

    // row-major copy of the dense kernel for the input-gradient pass
    resize(c.dense_w_row, {a.dense, a.flatten()});
    {
        const double* wt = params.dense_wt.ptr();
        double* wr = c.dense_w_row.ptr();
        parallel_for(a.dense, [=](int64_t j0, int64_t j1) {
            const int IN = a.flatten();
            const int OUT = a.dense;
            for (int64_t j = j0; j < j1; ++j)
                for (int k = 0; k < IN; ++k)
                    wr[j * IN + k] = wt[static_cast<int64_t>(k) * OUT + j];
        });
    }
    Tensor dflat({B, a.flatten()});
    dense_grad_input(B, a.flatten(), a.dense, dad.ptr(), c.dense_w_row.ptr(), dflat.ptr());

    // conv3 input (= a3) ReLU mask
    {
        const double* act = cache.a3.ptr();
        double* g = dflat.ptr();
        for (int64_t i = 0; i < dflat.count(); ++i)
            if (act[i] <= 0.0) g[i] = 0.0;
    }

    const int64_t colT_needed =
        std::max<int64_t>({static_cast<int64_t>(ckk1) * H * W,
                           static_cast<int64_t>(ckk2) * H1 * W1,
                           static_cast<int64_t>(ckk3) * H2 * W2});
    const int groups = sample_groups(B);
    for (int g = 0; g < groups; ++g) {
        resize(c.col[g], {1, static_cast<int>(colT_needed)});
        resize(c.dcol[g], {1, static_cast<int>(colT_needed)});
    }

    if (input_grad) {
        resize(*input_grad, {B, a.in_ch, H, W});
        input_grad->zero();
    }

    std::vector<ConvGrads> group_grads;
    if (grads)
        for (int g = 0; g < groups; ++g) group_grads.push_back(ConvGrads::make(a));

    parallel_for(groups, [&](int64_t g0, int64_t g1) {
        for (int64_t g = g0; g < g1; ++g) {
            const int b0 = static_cast<int>(g * B / groups);
            const int b1 = static_cast<int>((g + 1) * B / groups);
            double* colT = c.col[static_cast<size_t>(g)].ptr();
            double* dcolT = c.dcol[static_cast<size_t>(g)].ptr();
            ConvGrads* cg = grads ? &group_grads[static_cast<size_t>(g)] : nullptr;
            Tensor dp2({a.c2, H2, W2});
            Tensor da2({a.c2, H1, W1});
            Tensor dp1({a.c1, H1, W1});
            Tensor da1({a.c1, H, W});

            for (int b = b0; b < b1; ++b) {
                const double* dz3 = dflat.ptr() + static_cast<int64_t>(b) * a.flatten();
                const double* p2_s = cache.p2.ptr() + static_cast<int64_t>(b) * a.c2 * H2 * W2;
                const double* p1_s = cache.p1.ptr() + static_cast<int64_t>(b) * a.c1 * H1 * W1;
                const double* in_s =
                    cache.input.ptr() + static_cast<int64_t>(b) * a.in_ch * H * W;

                // conv3
                if (cg) {
                    im2col_t(p2_s, a.c2, H2, W2, a.k3, colT);
                    gemm_nn(a.c3, ckk3, H2 * W2, dz3, colT, cg->c3w.ptr());
                    for (int oc = 0; oc < a.c3; ++oc) {
                        const double* row = dz3 + static_cast<int64_t>(oc) * H2 * W2;
                        double s = 0.0;
                        for (int i = 0; i < H2 * W2; ++i) s += row[i];
                        cg->c3b[oc] += s;
                    }
                }
                std::memset(dcolT, 0, sizeof(double) * static_cast<size_t>(H2 * W2) * ckk3);
                gemm_tn(H2 * W2, ckk3, a.c3, dz3, params.conv3_w.ptr(), dcolT);
                dp2.zero();
                col2im_t_add(dcolT, a.c2, H2, W2, a.k3, dp2.ptr());

                // pool2 + ReLU(a2)
                da2.zero();
                {
                    const int32_t* idx =
                        cache.idx2.data() + static_cast<int64_t>(b) * a.c2 * H2 * W2;
                    const int64_t plane_base = static_cast<int64_t>(b) * a.c2 * H1 * W1;
                    const double* a2_s = cache.a2.ptr() + plane_base;
                    for (int64_t i = 0; i < dp2.count(); ++i) {
                        const int64_t t = idx[i] - plane_base;
                        if (a2_s[t] > 0.0) da2.ptr()[t] += dp2[i];
                    }
                }

                // conv2
                if (cg) {
                    im2col_t(p1_s, a.c1, H1, W1, a.k2, colT);
                    gemm_nn(a.c2, ckk2, H1 * W1, da2.ptr(), colT, cg->c2w.ptr());
                    for (int oc = 0; oc < a.c2; ++oc) {
                        const double* row = da2.ptr() + static_cast<int64_t>(oc) * H1 * W1;
                        double s = 0.0;
                        for (int i = 0; i < H1 * W1; ++i) s += row[i];
                        cg->c2b[oc] += s;
                    }
                }
                std::memset(dcolT, 0, sizeof(double) * static_cast<size_t>(H1 * W1) * ckk2);
                gemm_tn(H1 * W1, ckk2, a.c2, da2.ptr(), params.conv2_w.ptr(), dcolT);
                dp1.zero();
                col2im_t_add(dcolT, a.c1, H1, W1, a.k2, dp1.ptr());

                // pool1 + ReLU(a1)
                da1.zero();
                {
                    const int32_t* idx =
                        cache.idx1.data() + static_cast<int64_t>(b) * a.c1 * H1 * W1;
                    const int64_t plane_base = static_cast<int64_t>(b) * a.c1 * H * W;
                    const double* a1_s = cache.a1.ptr() + plane_base;
                    for (int64_t i = 0; i < dp1.count(); ++i) {
                        const int64_t t = idx[i] - plane_base;
                        if (a1_s[t] > 0.0) da1.ptr()[t] += dp1[i];
                    }
                }

                // conv1
                if (cg) {
                    im2col_t(in_s, a.in_ch, H, W, a.k1, colT);
                    gemm_nn(a.c1, ckk1, H * W, da1.ptr(), colT, cg->c1w.ptr());
                    for (int oc = 0; oc < a.c1; ++oc) {
                        const double* row = da1.ptr() + static_cast<int64_t>(oc) * H * W;
                        double s = 0.0;
                        for (int i = 0; i < H * W; ++i) s += row[i];
                        cg->c1b[oc] += s;
                    }
                }
                if (input_grad) {
                    std::memset(dcolT, 0, sizeof(double) * static_cast<size_t>(H * W) * ckk1);
                    gemm_tn(H * W, ckk1, a.c1, da1.ptr(), params.conv1_w.ptr(), dcolT);
                    col2im_t_add(dcolT, a.in_ch, H, W, a.k1,
                                 input_grad->ptr() + static_cast<int64_t>(b) * a.in_ch * H * W);
                }
            }
        }
    });

    if (grads) {
        for (int g = 0; g < groups; ++g) {
            add_into(grads->conv1_w, group_grads[static_cast<size_t>(g)].c1w);
            add_into(grads->conv1_b, group_grads[static_cast<size_t>(g)].c1b);
            add_into(grads->conv2_w, group_grads[static_cast<size_t>(g)].c2w);
            add_into(grads->conv2_b, group_grads[static_cast<size_t>(g)].c2b);
            add_into(grads->conv3_w, group_grads[static_cast<size_t>(g)].c3w);
            add_into(grads->conv3_b, group_grads[static_cast<size_t>(g)].c3b);
        }
    }
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
    if (params.arch != grads.arch || params.arch != state.m.arch)
        throw ContractViolation("adam_step: arch mismatch");
    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const double lr = state.lr, eps = state.eps;

    auto ps = params.tensors();
    auto gs = const_cast<ParamSet&>(grads).tensors();
    auto ms = state.m.tensors();
    auto vs = state.v.tensors();
    for (size_t t = 0; t < ps.size(); ++t) {
        double* __restrict__ p = ps[t].second->ptr();
        const double* __restrict__ g = gs[t].second->ptr();
        double* __restrict__ m = ms[t].second->ptr();
        double* __restrict__ v = vs[t].second->ptr();
        const int64_t n = ps[t].second->count();
        parallel_for(n, [=](int64_t i0, int64_t i1) {
            for (int64_t i = i0; i < i1; ++i) {
                const double gi = g[i];
                const double mi = b1 * m[i] + (1.0 - b1) * gi;
                const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
                m[i] = mi;
                v[i] = vi;
                p[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
            }
        });
    }
}

PolicyEval evaluate_policy(const ParamSet& params, const Observation& obs, ForwardCache& cache) {
    const NetArch& a = params.arch;
    Tensor input = observation_to_tensor(obs);
    input.shape = {1, 2, Frame::kSide, Frame::kSide};
    ForwardOut out = forward(params, input, cache);
    PolicyEval pe;
    pe.value = out.value[0];
    double best = out.policy[0];
    pe.argmax = 0;
    for (int k = 0; k < a.actions; ++k) {
        pe.policy[static_cast<size_t>(k)] = out.policy[k];
        if (out.policy[k] > best) {
            best = out.policy[k];
            pe.argmax = k;
        }
    }
    return pe;
}

}  // namespace gyre
