#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "han/rng.hpp"
#include "han/tensor.hpp"

namespace han::nn {

// Handle to a value on a Tape.
struct Var {
    std::uint32_t idx = std::numeric_limits<std::uint32_t>::max();
    bool valid() const { return idx != std::numeric_limits<std::uint32_t>::max(); }
};

// Dynamic computation graph for reverse-mode differentiation. Nodes are
// appended in topological order (an op may only reference existing vars),
// so a reverse index sweep is a valid backward schedule.
//
// Parameter leaves reference external tensors and accumulate their gradient
// into an external sink, which lets one Tape per sample share long-lived
// model parameters without copies. Every op validates shapes and traps
// non-finite outputs.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // --- leaves ---------------------------------------------------------
    Var constant(Tensor value);
    // External parameter; grad_sink may be null (frozen parameter).
    Var param(const Tensor* value, Tensor* grad_sink);
    // Single row of an external matrix (embedding lookup). Gradient flows
    // into the matching row of grad_table when non-null.
    Var matrix_row(const Tensor* table, Tensor* grad_table, std::size_t row);

    // --- ops -------------------------------------------------------------
    Var matvec(Var w, Var x);                        // (N x M) * (M) -> (N)
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                           // elementwise
    Var affine(Var a, double scale, double shift);   // scale*a + shift
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var concat(Var a, Var b);
    Var dot(Var a, Var b);                           // -> (1)
    Var stack(const std::vector<Var>& scalars);      // T scalars -> (T)
    // Numerically stable softmax; masked entries get weight exactly 0 and
    // receive no gradient. mask may be null (all positions active).
    Var softmax(Var scores, const std::vector<unsigned char>* mask = nullptr);
    Var weighted_sum(Var weights, const std::vector<Var>& rows);
    // -weight * log(max(probs[label], 1e-12)) -> (1)
    Var cross_entropy(Var probs, std::size_t label, double weight = 1.0);
    // Inverted dropout: kept entries scaled by 1/(1-rate). Training only;
    // evaluation paths simply do not create the node.
    Var dropout(Var a, double rate, Rng& rng);

    // --- access ----------------------------------------------------------
    const Tensor& value(Var v) const { return val(v.idx); }
    std::size_t size() const { return nodes_.size(); }

    // Backpropagate from a scalar root; fills node gradients and flushes
    // parameter gradients into their external sinks.
    void backward(Var root);
    // Gradient of the last backward() root with respect to v.
    const Tensor& grad(Var v) const;

private:
    enum class Op : std::uint8_t {
        Constant, Param, MatrixRow,
        MatVec, Add, Sub, Mul, Affine, Sigmoid, Tanh, Concat, Dot,
        Stack, Softmax, WeightedSum, CrossEntropy, Dropout,
    };

    struct Node {
        Op op;
        Tensor owned;                         // output value unless external
        const Tensor* ext_value = nullptr;    // Param leaves
        Tensor* ext_grad = nullptr;           // Param / MatrixRow sinks
        std::size_t ext_row = 0;              // MatrixRow
        std::uint32_t p0 = 0, p1 = 0;
        std::uint32_t list_off = 0, list_len = 0;  // Stack / WeightedSum parents
        std::uint32_t aux = 0;                // index into aux_ (mask tensors)
        double c0 = 0.0, c1 = 0.0;            // Affine coefficients, CE weight
        std::size_t label = 0;                // CrossEntropy
    };

    const Tensor& val(std::uint32_t idx) const {
        const Node& n = nodes_[idx];
        return n.ext_value ? *n.ext_value : n.owned;
    }

    Var push(Node n);
    Tensor& grad_buf(std::uint32_t idx);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> parent_pool_;
    std::vector<Tensor> aux_;
    std::vector<Tensor> grads_;
};

}  // namespace han::nn
