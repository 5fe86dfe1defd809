#include "han/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace han::nn {

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

GruParams GruParams::init(std::size_t hidden, std::size_t input, Rng& rng) {
    GruParams p;
    p.w_update = glorot_uniform(hidden, input, rng);
    p.w_reset = glorot_uniform(hidden, input, rng);
    p.w_cand = glorot_uniform(hidden, input, rng);
    p.u_update = glorot_uniform(hidden, hidden, rng);
    p.u_reset = glorot_uniform(hidden, hidden, rng);
    p.u_cand = glorot_uniform(hidden, hidden, rng);
    p.b_update = Tensor({hidden});
    p.b_reset = Tensor({hidden});
    p.b_cand = Tensor({hidden});
    return p;
}

GruParams GruParams::zeros(std::size_t hidden, std::size_t input) {
    GruParams p;
    p.w_update = Tensor({hidden, input});
    p.w_reset = Tensor({hidden, input});
    p.w_cand = Tensor({hidden, input});
    p.u_update = Tensor({hidden, hidden});
    p.u_reset = Tensor({hidden, hidden});
    p.u_cand = Tensor({hidden, hidden});
    p.b_update = Tensor({hidden});
    p.b_reset = Tensor({hidden});
    p.b_cand = Tensor({hidden});
    return p;
}

void GruParams::validate() const {
    std::size_t h = hidden(), d = input();
    auto want = [](const Tensor& t, std::size_t r, std::size_t c, const char* name) {
        if (t.rank() != 2 || t.rows() != r || t.cols() != c)
            throw std::invalid_argument(std::string("gru params: bad shape for ") + name);
    };
    want(w_update, h, d, "w_update");
    want(w_reset, h, d, "w_reset");
    want(w_cand, h, d, "w_cand");
    want(u_update, h, h, "u_update");
    want(u_reset, h, h, "u_reset");
    want(u_cand, h, h, "u_cand");
    if (b_reset.size() != h || b_cand.size() != h)
        throw std::invalid_argument("gru params: bias size mismatch");
}

AttnParams AttnParams::init(std::size_t attn_dim, std::size_t in_dim, Rng& rng) {
    AttnParams p;
    p.proj = glorot_uniform(attn_dim, in_dim, rng);
    p.proj_bias = Tensor({attn_dim});
    Tensor v = glorot_uniform(attn_dim, 1, rng);
    p.score_vec = Tensor({attn_dim}, std::vector<double>(v.data(), v.data() + attn_dim));
    return p;
}

AttnParams AttnParams::zeros(std::size_t attn_dim, std::size_t in_dim) {
    AttnParams p;
    p.proj = Tensor({attn_dim, in_dim});
    p.proj_bias = Tensor({attn_dim});
    p.score_vec = Tensor({attn_dim});
    return p;
}

void AttnParams::validate() const {
    if (proj.rank() != 2 || proj_bias.size() != proj.rows() ||
        score_vec.size() != proj.rows())
        throw std::invalid_argument("attention params: inconsistent shapes");
}

DenseParams DenseParams::init(std::size_t out, std::size_t in, Rng& rng) {
    DenseParams p;
    p.w = glorot_uniform(out, in, rng);
    p.b = Tensor({out});
    return p;
}

DenseParams DenseParams::zeros(std::size_t out, std::size_t in) {
    DenseParams p;
    p.w = Tensor({out, in});
    p.b = Tensor({out});
    return p;
}

void DenseParams::validate() const {
    if (w.rank() != 2 || b.size() != w.rows())
        throw std::invalid_argument("dense params: inconsistent shapes");
}

std::vector<ParamRef> gru_param_refs(const std::string& prefix, GruParams& value,
                                     GruParams& grad) {
    return {
        {prefix + ".w_update", &value.w_update, &grad.w_update},
        {prefix + ".w_reset", &value.w_reset, &grad.w_reset},
        {prefix + ".w_cand", &value.w_cand, &grad.w_cand},
        {prefix + ".u_update", &value.u_update, &grad.u_update},
        {prefix + ".u_reset", &value.u_reset, &grad.u_reset},
        {prefix + ".u_cand", &value.u_cand, &grad.u_cand},
        {prefix + ".b_update", &value.b_update, &grad.b_update},
        {prefix + ".b_reset", &value.b_reset, &grad.b_reset},
        {prefix + ".b_cand", &value.b_cand, &grad.b_cand},
    };
}

std::vector<ParamRef> attn_param_refs(const std::string& prefix, AttnParams& value,
                                      AttnParams& grad) {
    return {
        {prefix + ".proj", &value.proj, &grad.proj},
        {prefix + ".proj_bias", &value.proj_bias, &grad.proj_bias},
        {prefix + ".score_vec", &value.score_vec, &grad.score_vec},
    };
}

std::vector<ParamRef> dense_param_refs(const std::string& prefix, DenseParams& value,
                                       DenseParams& grad) {
    return {
        {prefix + ".w", &value.w, &grad.w},
        {prefix + ".b", &value.b, &grad.b},
    };
}

// --- tape-level graph builders -------------------------------------------

GruVars register_gru(Tape& tape, const GruParams& value, GruParams* grad) {
    GruVars v;
    v.w_update = tape.param(&value.w_update, grad ? &grad->w_update : nullptr);
    v.w_reset = tape.param(&value.w_reset, grad ? &grad->w_reset : nullptr);
    v.w_cand = tape.param(&value.w_cand, grad ? &grad->w_cand : nullptr);
    v.u_update = tape.param(&value.u_update, grad ? &grad->u_update : nullptr);
    v.u_reset = tape.param(&value.u_reset, grad ? &grad->u_reset : nullptr);
    v.u_cand = tape.param(&value.u_cand, grad ? &grad->u_cand : nullptr);
    v.b_update = tape.param(&value.b_update, grad ? &grad->b_update : nullptr);
    v.b_reset = tape.param(&value.b_reset, grad ? &grad->b_reset : nullptr);
    v.b_cand = tape.param(&value.b_cand, grad ? &grad->b_cand : nullptr);
    return v;
}

Var gru_cell(Tape& tape, const GruVars& p, Var x, Var h_prev) {
    Var z = tape.sigmoid(tape.add(tape.add(tape.matvec(p.w_update, x),
                                           tape.matvec(p.u_update, h_prev)),
                                  p.b_update));
    Var r = tape.sigmoid(tape.add(tape.add(tape.matvec(p.w_reset, x),
                                           tape.matvec(p.u_reset, h_prev)),
                                  p.b_reset));
    Var cand = tape.tanh(tape.add(tape.add(tape.matvec(p.w_cand, x),
                                           tape.matvec(p.u_cand, tape.mul(r, h_prev))),
                                  p.b_cand));
    // (1-z)*h + z*cand
    Var keep = tape.affine(z, -1.0, 1.0);
    return tape.add(tape.mul(keep, h_prev), tape.mul(z, cand));
}

std::vector<Var> bigru_encode(Tape& tape, const GruVars& fwd, const GruVars& bwd,
                              const std::vector<Var>& xs, std::size_t hidden) {
    if (xs.empty()) throw std::invalid_argument("bigru_encode: empty sequence");
    std::size_t t_len = xs.size();

    std::vector<Var> fwd_states(t_len), bwd_states(t_len);
    Var h = tape.constant(Tensor({hidden}));
    for (std::size_t t = 0; t < t_len; ++t) {
        h = gru_cell(tape, fwd, xs[t], h);
        fwd_states[t] = h;
    }
    h = tape.constant(Tensor({hidden}));
    for (std::size_t t = t_len; t-- > 0;) {
        h = gru_cell(tape, bwd, xs[t], h);
        bwd_states[t] = h;
    }

    std::vector<Var> out(t_len);
    for (std::size_t t = 0; t < t_len; ++t)
        out[t] = tape.concat(fwd_states[t], bwd_states[t]);
    return out;
}

AttnVars register_attn(Tape& tape, const AttnParams& value, AttnParams* grad) {
    AttnVars v;
    v.proj = tape.param(&value.proj, grad ? &grad->proj : nullptr);
    v.proj_bias = tape.param(&value.proj_bias, grad ? &grad->proj_bias : nullptr);
    v.score_vec = tape.param(&value.score_vec, grad ? &grad->score_vec : nullptr);
    return v;
}

Var attention_score(Tape& tape, const AttnVars& p, Var h) {
    return tape.dot(p.score_vec,
                    tape.tanh(tape.add(tape.matvec(p.proj, h), p.proj_bias)));
}

AttnPoolVars attention_pool(Tape& tape, const AttnVars& p, const std::vector<Var>& rows,
                            const std::vector<unsigned char>* mask) {
    if (rows.empty()) throw std::invalid_argument("attention_pool: no rows");
    std::vector<Var> scores(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        scores[i] = attention_score(tape, p, rows[i]);
    AttnPoolVars out;
    out.weights = tape.softmax(tape.stack(scores), mask);
    out.pooled = tape.weighted_sum(out.weights, rows);
    return out;
}

AttnPoolVars conditioned_attention_pool(Tape& tape, const AttnVars& p,
                                        const std::vector<Var>& rows,
                                        const std::vector<Var>& contexts,
                                        const std::vector<unsigned char>* mask) {
    if (rows.size() != contexts.size())
        throw std::invalid_argument("conditioned_attention_pool: row/context count mismatch");
    std::vector<Var> joined(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        joined[i] = tape.concat(rows[i], contexts[i]);
    return attention_pool(tape, p, joined, mask);
}

DenseVars register_dense(Tape& tape, const DenseParams& value, DenseParams* grad) {
    DenseVars v;
    v.w = tape.param(&value.w, grad ? &grad->w : nullptr);
    v.b = tape.param(&value.b, grad ? &grad->b : nullptr);
    return v;
}

Var dense(Tape& tape, const DenseVars& p, Var x) {
    return tape.add(tape.matvec(p.w, x), p.b);
}

// --- eager wrappers ---------------------------------------------------------

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& p) {
    Tape tape;
    GruVars vars = register_gru(tape, p, nullptr);
    Var h = gru_cell(tape, vars, tape.constant(x), tape.constant(h_prev));
    return tape.value(h);
}

Tensor bigru_encode(const Tensor& x_seq, const GruParams& fwd, const GruParams& bwd) {
    if (x_seq.rank() != 2 || x_seq.rows() == 0)
        throw std::invalid_argument("bigru_encode: need a nonempty T x D input");
    std::size_t t_len = x_seq.rows(), d = x_seq.cols();
    std::size_t h = fwd.hidden();

    Tape tape;
    GruVars fv = register_gru(tape, fwd, nullptr);
    GruVars bv = register_gru(tape, bwd, nullptr);
    std::vector<Var> xs(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        Tensor row({d});
        for (std::size_t j = 0; j < d; ++j) row[j] = x_seq.at(t, j);
        xs[t] = tape.constant(std::move(row));
    }
    std::vector<Var> states = bigru_encode(tape, fv, bv, xs, h);

    Tensor out({t_len, 2 * h});
    for (std::size_t t = 0; t < t_len; ++t) {
        const Tensor& s = tape.value(states[t]);
        for (std::size_t j = 0; j < 2 * h; ++j) out.at(t, j) = s[j];
    }
    return out;
}

namespace {

std::vector<Var> tensor_rows(Tape& tape, const Tensor& m) {
    std::vector<Var> rows(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Tensor r({m.cols()});
        for (std::size_t j = 0; j < m.cols(); ++j) r[j] = m.at(i, j);
        rows[i] = tape.constant(std::move(r));
    }
    return rows;
}

}  // namespace

AttnResult attention_pool(const Tensor& states, const AttnParams& p,
                          const std::vector<unsigned char>* mask) {
    if (states.rank() != 2 || states.rows() == 0)
        throw std::invalid_argument("attention_pool: need a nonempty T x M input");
    Tape tape;
    AttnVars vars = register_attn(tape, p, nullptr);
    AttnPoolVars pooled = attention_pool(tape, vars, tensor_rows(tape, states), mask);
    return {tape.value(pooled.weights), tape.value(pooled.pooled)};
}

AttnResult conditioned_attention_pool(const Tensor& states, const Tensor& contexts,
                                      const AttnParams& p,
                                      const std::vector<unsigned char>* mask) {
    if (states.rank() != 2 || contexts.rank() != 2 || states.rows() != contexts.rows())
        throw std::invalid_argument("conditioned_attention_pool: row-count mismatch");
    if (states.rows() == 0)
        throw std::invalid_argument("conditioned_attention_pool: no rows");
    Tape tape;
    AttnVars vars = register_attn(tape, p, nullptr);
    AttnPoolVars pooled = conditioned_attention_pool(
        tape, vars, tensor_rows(tape, states), tensor_rows(tape, contexts), mask);
    return {tape.value(pooled.weights), tape.value(pooled.pooled)};
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tape tape;
    DenseParams p;
    p.w = w;
    p.b = b;
    DenseVars vars = register_dense(tape, p, nullptr);
    return tape.value(dense(tape, vars, tape.constant(x)));
}

Tensor softmax(const Tensor& z) {
    Tape tape;
    return tape.value(tape.softmax(tape.constant(z)));
}

double cross_entropy(const Tensor& probs, std::size_t label) {
    Tape tape;
    return tape.value(tape.cross_entropy(tape.constant(probs), label))[0];
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool train_mode) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (!train_mode) return x;
    Tape tape;
    return tape.value(tape.dropout(tape.constant(x), rate, rng));
}

// --- optimization -----------------------------------------------------------

void adam_step(Tensor& param, const Tensor& grad, AdamSlot& slot, std::uint64_t t,
               const AdamConfig& cfg) {
    if (!grad.same_shape(param))
        throw std::invalid_argument("adam_step: grad/param shape mismatch");
    if (!grad.all_finite())
        throw std::runtime_error("adam_step: non-finite gradient");
    if (slot.m.empty()) {
        slot.m = Tensor(param.shape());
        slot.v = Tensor(param.shape());
    }
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad[i];
        slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
        slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
        double m_hat = slot.m[i] / bc1;
        double v_hat = slot.v[i] / bc2;
        param[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

void Adam::step(const std::vector<ParamRef>& params) {
    if (slots_.empty()) slots_.resize(params.size());
    if (slots_.size() != params.size())
        throw std::invalid_argument("adam: parameter count changed between steps");
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].grad) continue;
        adam_step(*params[i].value, *params[i].grad, slots_[i], t_, cfg_);
    }
}

double grad_check(const std::function<double()>& loss_and_grad,
                  const std::vector<ParamRef>& params, std::size_t samples, Rng& rng,
                  double h) {
    zero_grads(params);
    loss_and_grad();

    struct Coord {
        std::size_t param, elem;
    };
    std::vector<Coord> coords;
    std::vector<double> analytic;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].grad) continue;
        for (std::size_t e = 0; e < params[p].value->size(); ++e) {
            coords.push_back({p, e});
            analytic.push_back((*params[p].grad)[e]);
        }
    }
    if (coords.empty()) return 0.0;

    std::vector<std::size_t> picks;
    if (samples >= coords.size()) {
        picks.resize(coords.size());
        for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    } else {
        picks.resize(samples);
        for (std::size_t i = 0; i < samples; ++i) picks[i] = rng.index(coords.size());
    }

    double worst = 0.0;
    for (std::size_t pick : picks) {
        Tensor& value = *params[coords[pick].param].value;
        std::size_t e = coords[pick].elem;
        double saved = value[e];

        value[e] = saved + h;
        zero_grads(params);
        double up = loss_and_grad();

        value[e] = saved - h;
        zero_grads(params);
        double down = loss_and_grad();

        value[e] = saved;

        double numeric = (up - down) / (2.0 * h);
        double a = analytic[pick];
        double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace han::nn
