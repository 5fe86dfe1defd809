#include "han/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace han::nn {

namespace {

constexpr double kProbFloor = 1e-12;

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
    throw std::invalid_argument(std::string(op) + ": bad shape " + a.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                a.shape_str() + " and " + b.shape_str());
}

}  // namespace

Var Tape::push(Node n) {
    if (!n.ext_value) check_finite(n.owned, "tape op");
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
    Node n{};
    n.op = Op::Constant;
    n.owned = std::move(value);
    return push(std::move(n));
}

Var Tape::param(const Tensor* value, Tensor* grad_sink) {
    if (grad_sink && !grad_sink->same_shape(*value))
        throw std::invalid_argument("param: grad sink shape mismatch");
    Node n{};
    n.op = Op::Param;
    n.ext_value = value;
    n.ext_grad = grad_sink;
    return push(std::move(n));
}

Var Tape::matrix_row(const Tensor* table, Tensor* grad_table, std::size_t row) {
    if (table->rank() != 2 || row >= table->rows())
        throw std::invalid_argument("matrix_row: row out of range");
    std::size_t m = table->cols();
    Tensor out({m});
    for (std::size_t j = 0; j < m; ++j) out[j] = table->at(row, j);
    Node n{};
    n.op = Op::MatrixRow;
    n.owned = std::move(out);
    n.ext_grad = grad_table;
    n.ext_row = row;
    return push(std::move(n));
}

Var Tape::matvec(Var w, Var x) {
    const Tensor& wm = val(w.idx);
    const Tensor& xv = val(x.idx);
    if (wm.rank() != 2 || xv.rank() != 1 || wm.cols() != xv.size())
        shape_error("matvec", wm, xv);
    std::size_t rows = wm.rows(), cols = wm.cols();
    Tensor out({rows});
    const double* wd = wm.data();
    const double* xd = xv.data();
    for (std::size_t i = 0; i < rows; ++i) {
        const double* wr = wd + i * cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * xd[j];
        out[i] = acc;
    }
    Node n{};
    n.op = Op::MatVec;
    n.owned = std::move(out);
    n.p0 = w.idx;
    n.p1 = x.idx;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = val(a.idx);
    const Tensor& bv = val(b.idx);
    if (!av.same_shape(bv)) shape_error("add", av, bv);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    Node n{};
    n.op = Op::Add;
    n.owned = std::move(out);
    n.p0 = a.idx;
    n.p1 = b.idx;
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    const Tensor& av = val(a.idx);
    const Tensor& bv = val(b.idx);
    if (!av.same_shape(bv)) shape_error("sub", av, bv);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    Node n{};
    n.op = Op::Sub;
    n.owned = std::move(out);
    n.p0 = a.idx;
    n.p1 = b.idx;
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = val(a.idx);
    const Tensor& bv = val(b.idx);
    if (!av.same_shape(bv)) shape_error("mul", av, bv);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    Node n{};
    n.op = Op::Mul;
    n.owned = std::move(out);
    n.p0 = a.idx;
    n.p1 = b.idx;
    return push(std::move(n));
}

Var Tape::affine(Var a, double scale, double shift) {
    const Tensor& av = val(a.idx);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = scale * av[i] + shift;
    Node n{};
    n.op = Op::Affine;
    n.owned = std::move(out);
    n.p0 = a.idx;
    n.c0 = scale;
    n.c1 = shift;
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    const Tensor& av = val(a.idx);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-av[i]));
    Node n{};
    n.op = Op::Sigmoid;
    n.owned = std::move(out);
    n.p0 = a.idx;
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    const Tensor& av = val(a.idx);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::tanh(av[i]);
    Node n{};
    n.op = Op::Tanh;
    n.owned = std::move(out);
    n.p0 = a.idx;
    return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
    const Tensor& av = val(a.idx);
    const Tensor& bv = val(b.idx);
    if (av.rank() != 1 || bv.rank() != 1) shape_error("concat", av, bv);
    Tensor out({av.size() + bv.size()});
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i];
    for (std::size_t i = 0; i < bv.size(); ++i) out[av.size() + i] = bv[i];
    Node n{};
    n.op = Op::Concat;
    n.owned = std::move(out);
    n.p0 = a.idx;
    n.p1 = b.idx;
    return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
    const Tensor& av = val(a.idx);
    const Tensor& bv = val(b.idx);
    if (av.rank() != 1 || !av.same_shape(bv)) shape_error("dot", av, bv);
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    Node n{};
    n.op = Op::Dot;
    n.owned = Tensor::scalar(acc);
    n.p0 = a.idx;
    n.p1 = b.idx;
    return push(std::move(n));
}

Var Tape::stack(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw std::invalid_argument("stack: empty input");
    Tensor out({scalars.size()});
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        const Tensor& s = val(scalars[i].idx);
        if (s.size() != 1) shape_error("stack", s);
        out[i] = s[0];
    }
    Node n{};
    n.op = Op::Stack;
    n.owned = std::move(out);
    n.list_off = static_cast<std::uint32_t>(parent_pool_.size());
    n.list_len = static_cast<std::uint32_t>(scalars.size());
    for (Var v : scalars) parent_pool_.push_back(v.idx);
    return push(std::move(n));
}

Var Tape::softmax(Var scores, const std::vector<unsigned char>* mask) {
    const Tensor& sv = val(scores.idx);
    if (sv.rank() != 1) shape_error("softmax", sv);
    std::size_t t = sv.size();
    if (mask && mask->size() != t)
        throw std::invalid_argument("softmax: mask length mismatch");

    Tensor mask_t({t});
    std::size_t active = 0;
    for (std::size_t i = 0; i < t; ++i) {
        bool keep = !mask || (*mask)[i];
        mask_t[i] = keep ? 1.0 : 0.0;
        active += keep ? 1 : 0;
    }
    if (active == 0) throw std::invalid_argument("softmax: all positions masked");

    // masked scores get a -1e9 penalty, then their weights are zeroed exactly
    Tensor shifted({t});
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t; ++i) {
        shifted[i] = sv[i] + (mask_t[i] != 0.0 ? 0.0 : -1e9);
        max_score = std::max(max_score, shifted[i]);
    }

    Tensor out({t});
    double denom = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        if (mask_t[i] != 0.0) {
            out[i] = std::exp(shifted[i] - max_score);
            denom += out[i];
        } else {
            out[i] = 0.0;
        }
    }
    for (std::size_t i = 0; i < t; ++i) out[i] /= denom;

    Node n{};
    n.op = Op::Softmax;
    n.owned = std::move(out);
    n.p0 = scores.idx;
    n.aux = static_cast<std::uint32_t>(aux_.size());
    aux_.push_back(std::move(mask_t));
    return push(std::move(n));
}

Var Tape::weighted_sum(Var weights, const std::vector<Var>& rows) {
    const Tensor& wv = val(weights.idx);
    if (wv.rank() != 1 || wv.size() != rows.size())
        throw std::invalid_argument("weighted_sum: weight/row count mismatch");
    if (rows.empty()) throw std::invalid_argument("weighted_sum: no rows");
    std::size_t m = val(rows[0].idx).size();
    Tensor out({m});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& r = val(rows[i].idx);
        if (r.rank() != 1 || r.size() != m) shape_error("weighted_sum", r);
        double w = wv[i];
        for (std::size_t j = 0; j < m; ++j) out[j] += w * r[j];
    }
    Node n{};
    n.op = Op::WeightedSum;
    n.owned = std::move(out);
    n.p0 = weights.idx;
    n.list_off = static_cast<std::uint32_t>(parent_pool_.size());
    n.list_len = static_cast<std::uint32_t>(rows.size());
    for (Var v : rows) parent_pool_.push_back(v.idx);
    return push(std::move(n));
}

Var Tape::cross_entropy(Var probs, std::size_t label, double weight) {
    const Tensor& pv = val(probs.idx);
    if (pv.rank() != 1 || label >= pv.size())
        throw std::invalid_argument("cross_entropy: label out of range");
    double p = std::max(pv[label], kProbFloor);
    Node n{};
    n.op = Op::CrossEntropy;
    n.owned = Tensor::scalar(-weight * std::log(p));
    n.p0 = probs.idx;
    n.label = label;
    n.c0 = weight;
    return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1)");
    const Tensor& av = val(a.idx);
    Tensor mask(av.shape());
    double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
    Node n{};
    n.op = Op::Dropout;
    n.owned = std::move(out);
    n.p0 = a.idx;
    n.aux = static_cast<std::uint32_t>(aux_.size());
    aux_.push_back(std::move(mask));
    return push(std::move(n));
}

Tensor& Tape::grad_buf(std::uint32_t idx) {
    Tensor& g = grads_[idx];
    if (g.empty()) g = Tensor(val(idx).shape());
    return g;
}

const Tensor& Tape::grad(Var v) const {
    if (grads_.size() <= v.idx || grads_[v.idx].empty())
        throw std::logic_error("grad: no gradient recorded for this var");
    return grads_[v.idx];
}

void Tape::backward(Var root) {
    const Tensor& rv = val(root.idx);
    if (rv.size() != 1) throw std::invalid_argument("backward: root must be scalar");

    grads_.clear();
    grads_.resize(nodes_.size());
    grad_buf(root.idx)[0] = 1.0;

    for (std::uint32_t idx = root.idx + 1; idx-- > 0;) {
        const Node& n = nodes_[idx];
        const Tensor& g = grads_[idx];
        if (g.empty()) continue;

        switch (n.op) {
            case Op::Constant:
                break;
            case Op::Param:
                break;  // flushed below
            case Op::MatrixRow:
                break;
            case Op::MatVec: {
                const Tensor& w = val(n.p0);
                const Tensor& x = val(n.p1);
                std::size_t rows = w.rows(), cols = w.cols();
                Tensor& gw = grad_buf(n.p0);
                Tensor& gx = grad_buf(n.p1);
                for (std::size_t i = 0; i < rows; ++i) {
                    double gi = g[i];
                    if (gi == 0.0) continue;
                    double* gwr = gw.data() + i * cols;
                    const double* wr = w.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j) {
                        gwr[j] += gi * x[j];
                        gx[j] += gi * wr[j];
                    }
                }
                break;
            }
            case Op::Add: {
                Tensor& ga = grad_buf(n.p0);
                Tensor& gb = grad_buf(n.p1);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
                break;
            }
            case Op::Sub: {
                Tensor& ga = grad_buf(n.p0);
                Tensor& gb = grad_buf(n.p1);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i];
                    gb[i] -= g[i];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& a = val(n.p0);
                const Tensor& b = val(n.p1);
                Tensor& ga = grad_buf(n.p0);
                Tensor& gb = grad_buf(n.p1);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] * b[i];
                    gb[i] += g[i] * a[i];
                }
                break;
            }
            case Op::Affine: {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c0 * g[i];
                break;
            }
            case Op::Sigmoid: {
                const Tensor& y = n.owned;
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * y[i] * (1.0 - y[i]);
                break;
            }
            case Op::Tanh: {
                const Tensor& y = n.owned;
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (1.0 - y[i] * y[i]);
                break;
            }
            case Op::Concat: {
                std::size_t na = val(n.p0).size();
                Tensor& ga = grad_buf(n.p0);
                Tensor& gb = grad_buf(n.p1);
                for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
                break;
            }
            case Op::Dot: {
                const Tensor& a = val(n.p0);
                const Tensor& b = val(n.p1);
                Tensor& ga = grad_buf(n.p0);
                Tensor& gb = grad_buf(n.p1);
                double g0 = g[0];
                for (std::size_t i = 0; i < a.size(); ++i) {
                    ga[i] += g0 * b[i];
                    gb[i] += g0 * a[i];
                }
                break;
            }
            case Op::Stack: {
                for (std::uint32_t i = 0; i < n.list_len; ++i) {
                    std::uint32_t p = parent_pool_[n.list_off + i];
                    grad_buf(p)[0] += g[i];
                }
                break;
            }
            case Op::Softmax: {
                const Tensor& y = n.owned;
                const Tensor& mask = aux_[n.aux];
                Tensor& gs = grad_buf(n.p0);
                double inner = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) inner += y[i] * g[i];
                for (std::size_t i = 0; i < y.size(); ++i)
                    if (mask[i] != 0.0) gs[i] += y[i] * (g[i] - inner);
                break;
            }
            case Op::WeightedSum: {
                const Tensor& w = val(n.p0);
                Tensor& gw = grad_buf(n.p0);
                for (std::uint32_t i = 0; i < n.list_len; ++i) {
                    std::uint32_t p = parent_pool_[n.list_off + i];
                    const Tensor& r = val(p);
                    Tensor& gr = grad_buf(p);
                    double acc = 0.0;
                    double wi = w[i];
                    for (std::size_t j = 0; j < g.size(); ++j) {
                        acc += g[j] * r[j];
                        gr[j] += wi * g[j];
                    }
                    gw[i] += acc;
                }
                break;
            }
            case Op::CrossEntropy: {
                const Tensor& p = val(n.p0);
                Tensor& gp = grad_buf(n.p0);
                // below the clamp the loss is constant in p
                if (p[n.label] > kProbFloor)
                    gp[n.label] += g[0] * (-n.c0 / p[n.label]);
                break;
            }
            case Op::Dropout: {
                const Tensor& mask = aux_[n.aux];
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                break;
            }
        }
    }

    // flush parameter gradients
    for (std::uint32_t idx = 0; idx <= root.idx; ++idx) {
        const Node& n = nodes_[idx];
        if (!n.ext_grad || grads_[idx].empty()) continue;
        const Tensor& g = grads_[idx];
        if (n.op == Op::Param) {
            for (std::size_t i = 0; i < g.size(); ++i) (*n.ext_grad)[i] += g[i];
        } else if (n.op == Op::MatrixRow) {
            std::size_t cols = n.ext_grad->cols();
            double* row = n.ext_grad->data() + n.ext_row * cols;
            for (std::size_t j = 0; j < cols; ++j) row[j] += g[j];
        }
    }
}

}  // namespace han::nn
