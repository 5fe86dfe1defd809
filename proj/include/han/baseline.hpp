#pragma once

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "han/corpus.hpp"

namespace han::baseline {

// Sparse feature vector: sorted unique indices with values.
struct SparseVec {
    std::vector<std::size_t> idx;
    std::vector<double> val;

    double dot_dense(const std::vector<double>& w) const;
    double norm() const;
};

// Tf-Idf over session tokens; idf(t) = ln((1+N)/(1+df(t))) + 1, tf raw,
// output L2-normalized. Fit on the training fold only.
class TfIdfModel {
public:
    static TfIdfModel fit(const std::vector<corpus::Session>& sessions);

    SparseVec transform(const corpus::Session& session) const;
    std::size_t feature_count() const { return idf_.size(); }
    double idf(const std::string& token) const;

private:
    std::unordered_map<std::string, std::size_t> feature_index_;
    std::vector<double> idf_;
};

// Linear SVM trained by per-sample subgradient descent on the regularized
// hinge objective (1/2)|w|^2 + C * sum hinge; step size 1/(lambda*t) with
// lambda = 1/(C*N). The bias is unregularized. Labels map Depressed -> +1.
class LinearSvm {
public:
    static LinearSvm train(const std::vector<SparseVec>& features,
                           const std::vector<corpus::Label>& labels, double c = 1.0,
                           std::size_t epochs = 20, std::uint64_t seed = 1);

    corpus::Label predict(const SparseVec& x) const;
    double decision(const SparseVec& x) const;  // w.x + b; tie class at <= 0
    double objective(const std::vector<SparseVec>& features,
                     const std::vector<corpus::Label>& labels) const;

    const std::vector<double>& weights() const { return w_; }
    double bias() const { return b_; }

private:
    std::vector<double> w_;
    double b_ = 0.0;
    double c_ = 1.0;
};

}  // namespace han::baseline
