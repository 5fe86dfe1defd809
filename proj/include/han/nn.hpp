#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "han/rng.hpp"
#include "han/tape.hpp"
#include "han/tensor.hpp"

namespace han::nn {

// Glorot/Xavier uniform fan-in/fan-out initialization.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

// Gated recurrent unit parameters. Matrices are hidden x input (w_*) and
// hidden x hidden (u_*); biases are hidden-sized. Gate equations:
//   update z = sigmoid(w_update x + u_update h + b_update)
//   reset  r = sigmoid(w_reset  x + u_reset  h + b_reset)
//   cand   c = tanh(w_cand x + u_cand (r*h) + b_cand)
//   h'       = (1-z)*h + z*c
struct GruParams {
    Tensor w_update, w_reset, w_cand;
    Tensor u_update, u_reset, u_cand;
    Tensor b_update, b_reset, b_cand;

    static GruParams init(std::size_t hidden, std::size_t input, Rng& rng);
    static GruParams zeros(std::size_t hidden, std::size_t input);

    std::size_t hidden() const { return b_update.size(); }
    std::size_t input() const { return w_update.cols(); }
    void validate() const;
};

// Additive attention scorer: score(h) = score_vec . tanh(proj h + proj_bias).
// proj is attn_dim x in_dim; in_dim must match the vectors being scored
// (hidden width, or hidden+context width when conditioning).
struct AttnParams {
    Tensor proj;
    Tensor proj_bias;
    Tensor score_vec;

    static AttnParams init(std::size_t attn_dim, std::size_t in_dim, Rng& rng);
    static AttnParams zeros(std::size_t attn_dim, std::size_t in_dim);

    std::size_t attn_dim() const { return proj_bias.size(); }
    std::size_t in_dim() const { return proj.cols(); }
    void validate() const;
};

struct DenseParams {
    Tensor w;  // out x in
    Tensor b;  // out

    static DenseParams init(std::size_t out, std::size_t in, Rng& rng);
    static DenseParams zeros(std::size_t out, std::size_t in);
    void validate() const;
};

// Named view of one trainable tensor and its gradient accumulator.
// grad may be null for frozen tensors.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

std::vector<ParamRef> gru_param_refs(const std::string& prefix, GruParams& value,
                                     GruParams& grad);
std::vector<ParamRef> attn_param_refs(const std::string& prefix, AttnParams& value,
                                      AttnParams& grad);
std::vector<ParamRef> dense_param_refs(const std::string& prefix, DenseParams& value,
                                       DenseParams& grad);

inline void zero_grads(const std::vector<ParamRef>& params) {
    for (const ParamRef& p : params)
        if (p.grad) p.grad->fill(0.0);
}

// --- tape-level graph builders -------------------------------------------

struct GruVars {
    Var w_update, w_reset, w_cand;
    Var u_update, u_reset, u_cand;
    Var b_update, b_reset, b_cand;
};

// Register parameters on the tape; grad may be null (frozen).
GruVars register_gru(Tape& tape, const GruParams& value, GruParams* grad);

Var gru_cell(Tape& tape, const GruVars& p, Var x, Var h_prev);

// T input vectors -> T states of width 2*hidden: [forward ; backward],
// both directions starting from zero states.
std::vector<Var> bigru_encode(Tape& tape, const GruVars& fwd, const GruVars& bwd,
                              const std::vector<Var>& xs, std::size_t hidden);

struct AttnVars {
    Var proj, proj_bias, score_vec;
};

AttnVars register_attn(Tape& tape, const AttnParams& value, AttnParams* grad);

Var attention_score(Tape& tape, const AttnVars& p, Var h);

struct AttnPoolVars {
    Var weights;  // (T)
    Var pooled;
};

AttnPoolVars attention_pool(Tape& tape, const AttnVars& p, const std::vector<Var>& rows,
                            const std::vector<unsigned char>* mask = nullptr);

// Scores and pools the concatenations rows[i] ; contexts[i].
AttnPoolVars conditioned_attention_pool(Tape& tape, const AttnVars& p,
                                        const std::vector<Var>& rows,
                                        const std::vector<Var>& contexts,
                                        const std::vector<unsigned char>* mask = nullptr);

struct DenseVars {
    Var w, b;
};

DenseVars register_dense(Tape& tape, const DenseParams& value, DenseParams* grad);

Var dense(Tape& tape, const DenseVars& p, Var x);

// --- eager wrappers (scratch tape per call) --------------------------------

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& p);

// X is T x D; result is T x 2*hidden.
Tensor bigru_encode(const Tensor& x_seq, const GruParams& fwd, const GruParams& bwd);

struct AttnResult {
    Tensor weights;  // (T)
    Tensor pooled;
};

AttnResult attention_pool(const Tensor& states, const AttnParams& p,
                          const std::vector<unsigned char>* mask = nullptr);

AttnResult conditioned_attention_pool(const Tensor& states, const Tensor& contexts,
                                      const AttnParams& p,
                                      const std::vector<unsigned char>* mask = nullptr);

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor softmax(const Tensor& z);
double cross_entropy(const Tensor& probs, std::size_t label);
// Inverted dropout; identity when train_mode is false.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool train_mode);

// --- optimization -----------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamSlot {
    Tensor m, v;
};

// One bias-corrected Adam update of a single tensor; t is the 1-based step
// count. Throws on non-finite gradient.
void adam_step(Tensor& param, const Tensor& grad, AdamSlot& slot, std::uint64_t t,
               const AdamConfig& cfg = {});

// Optimizer over a fixed parameter list; slot i follows params[i], so the
// list must keep its order across steps.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<ParamRef>& params);
    std::uint64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<AdamSlot> slots_;
};

// Central-difference verification of analytic gradients. loss_and_grad must
// recompute the loss deterministically and accumulate gradients into the
// params' sinks (which are zeroed here before each call). Checks `samples`
// randomly chosen coordinates (all of them when samples covers the total)
// and returns the worst relative error |a-n| / max(1e-8, |a|+|n|).
double grad_check(const std::function<double()>& loss_and_grad,
                  const std::vector<ParamRef>& params, std::size_t samples, Rng& rng,
                  double h = 1e-5);

}  // namespace han::nn
