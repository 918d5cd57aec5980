#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "datta/tensor.hpp"

namespace datta {

// A named trainable tensor with gradient and Adam moment buffers.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.shape);
        adam_m = Tensor(value.shape);
        adam_v = Tensor(value.shape);
    }
    void zero_grad() { grad.fill(0.0f); }
};

using VarId = int32_t;

// Dynamic reverse-mode tape. A tape is built per forward pass and discarded.
// Values live in the nodes; parameter leaves remember their Param so that
// backward() can flush gradients into Param::grad.
class Tape {
public:
    VarId leaf(Tensor value);              // constant input, no gradient tracking
    VarId param(Param &p);                 // trainable leaf, gradient flushed on backward

    VarId add(VarId a, VarId b);           // same shape
    VarId sub(VarId a, VarId b);           // same shape
    VarId affine(VarId x, float scale, float offset);
    VarId add_const(VarId x, Tensor c);    // x + c, same shape, c untracked
    VarId relu(VarId x);
    VarId log(VarId x);
    VarId square(VarId x);
    VarId clamp(VarId x, float lo, float hi);

    // (..., K) x (K, M) -> (..., M), leading dims folded; optional bias (M)
    VarId linear(VarId x, VarId w, VarId b = -1);
    // (B,M,K) x (B,K,N) with transpose flags applying to the stored layout
    VarId bmm(VarId a, VarId b, bool ta, bool tb);
    // conv over time: x (B,Cin,T), w (Cout,Cin,K), b (Cout) -> (B,Tout,Cout)
    VarId conv1d(VarId x, VarId w, VarId b, int64_t stride);
    // x (B,T,E) + Gaussian positional bumps from centers/widths (E)
    VarId gaussian_pos_encoding(VarId x, VarId centers, VarId widths);
    // prepend a learnable token row: (B,T,E) -> (B,T+1,E)
    VarId prepend_token(VarId x, VarId token);
    VarId row(VarId x, int64_t r);                       // (B,T,E) -> (B,E)
    VarId slice_axis1(VarId x, int64_t off, int64_t len); // (B,T,E) -> (B,len,E)
    VarId slice_lastdim(VarId x, int64_t off, int64_t len);
    VarId concat_lastdim(const std::vector<VarId> &xs);
    VarId layernorm(VarId x, VarId gain, VarId bias, float eps = 1e-5f);
    VarId softmax_lastdim(VarId x);

    // gradient reversal: identity forward, -lambda * g backward
    VarId grl(VarId x, float lambda);

    VarId reduce_mean_axis1(VarId x);                    // (B,T,E) -> (B,E)
    VarId sub_broadcast_rows(VarId x, VarId m);          // (B,T,E) - (B,E)
    VarId wsum(VarId x, Tensor weights);                 // sum(w*x) -> scalar
    VarId l2norm(VarId x);                               // sqrt(sum x^2) -> scalar
    VarId l1norm(VarId x);                               // sum |x| -> scalar

    const Tensor &value(VarId id) const { return nodes_[static_cast<size_t>(id)].value; }
    float scalar(VarId id) const { return nodes_[static_cast<size_t>(id)].value.data[0]; }

    // Reverse sweep from a scalar node; flushes leaf gradients into Params.
    void backward(VarId loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;              // allocated lazily in backward
        std::function<void(Tape &, Node &)> backfn;
        Param *bound = nullptr;   // set for param leaves
        // caches for layernorm
        std::vector<float> aux0, aux1;
    };

    std::vector<Node> nodes_;

    Node &node(VarId id) { return nodes_[static_cast<size_t>(id)]; }
    Tensor &grad_of(VarId id);
    VarId push(Tensor value, std::function<void(Tape &, Node &)> backfn);

    friend struct TapeOpsAccess;
};

// Optimizers over parameter sets.
void sgd_step(const std::vector<Param *> &params, float lr);
void adam_step(const std::vector<Param *> &params, float lr, int64_t t, float beta1 = 0.9f,
               float beta2 = 0.999f, float eps = 1e-8f);
void zero_grads(const std::vector<Param *> &params);

} // namespace datta
