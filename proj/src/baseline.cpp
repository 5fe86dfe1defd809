#include "han/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "han/rng.hpp"

namespace han::baseline {

using corpus::Label;
using corpus::Session;
using corpus::Turn;

double SparseVec::dot_dense(const std::vector<double>& w) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (idx[i] < w.size()) acc += w[idx[i]] * val[i];
    return acc;
}

double SparseVec::norm() const {
    double acc = 0.0;
    for (double v : val) acc += v * v;
    return std::sqrt(acc);
}

TfIdfModel TfIdfModel::fit(const std::vector<Session>& sessions) {
    if (sessions.empty()) throw std::invalid_argument("tfidf: empty corpus");

    // document frequency; map keeps feature ids deterministic (sorted tokens)
    std::map<std::string, std::size_t> df;
    for (const Session& s : sessions) {
        std::map<std::string, bool> seen;
        for (const Turn& t : s.turns)
            for (const std::string& tok : t.tokens) seen.emplace(tok, true);
        for (const auto& [tok, _] : seen) ++df[tok];
    }

    TfIdfModel m;
    double n = static_cast<double>(sessions.size());
    for (const auto& [tok, count] : df) {
        m.feature_index_.emplace(tok, m.idf_.size());
        m.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return m;
}

double TfIdfModel::idf(const std::string& token) const {
    auto it = feature_index_.find(token);
    if (it == feature_index_.end())
        throw std::invalid_argument("tfidf: token '" + token + "' unseen at fit time");
    return idf_[it->second];
}

SparseVec TfIdfModel::transform(const Session& session) const {
    std::map<std::size_t, double> tf;
    for (const Turn& t : session.turns) {
        for (const std::string& tok : t.tokens) {
            auto it = feature_index_.find(tok);
            if (it != feature_index_.end()) tf[it->second] += 1.0;
        }
    }
    SparseVec out;
    double norm_sq = 0.0;
    for (const auto& [fid, count] : tf) {
        double v = count * idf_[fid];
        out.idx.push_back(fid);
        out.val.push_back(v);
        norm_sq += v * v;
    }
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : out.val) v *= inv;
    }
    return out;
}

LinearSvm LinearSvm::train(const std::vector<SparseVec>& features,
                           const std::vector<Label>& labels, double c,
                           std::size_t epochs, std::uint64_t seed) {
    if (features.size() != labels.size() || features.empty())
        throw std::invalid_argument("svm: feature/label size mismatch");
    if (c <= 0.0) throw std::invalid_argument("svm: C must be positive");

    bool has_pos = false, has_neg = false;
    for (Label l : labels) (l == Label::Depressed ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw std::invalid_argument("svm: training set contains a single class");

    std::size_t dim = 0;
    for (const SparseVec& f : features)
        for (std::size_t i : f.idx) dim = std::max(dim, i + 1);

    LinearSvm m;
    m.c_ = c;
    m.w_.assign(dim, 0.0);

    double n = static_cast<double>(features.size());
    double lambda = 1.0 / (c * n);

    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Rng rng(seed);
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            ++t;
            double eta = 1.0 / (lambda * static_cast<double>(t));
            double y = labels[i] == Label::Depressed ? 1.0 : -1.0;
            double margin = y * (features[i].dot_dense(m.w_) + m.b_);

            // regularizer shrinks w every step; hinge term fires on violation
            double shrink = 1.0 - eta * lambda;
            if (shrink < 0.0) shrink = 0.0;
            for (double& w : m.w_) w *= shrink;
            if (margin < 1.0) {
                double step = eta * y;
                for (std::size_t k = 0; k < features[i].idx.size(); ++k)
                    m.w_[features[i].idx[k]] += step * features[i].val[k];
                m.b_ += step;
            }
        }
    }
    return m;
}

double LinearSvm::decision(const SparseVec& x) const {
    return x.dot_dense(w_) + b_;
}

Label LinearSvm::predict(const SparseVec& x) const {
    return decision(x) > 0.0 ? Label::Depressed : Label::NotDepressed;
}

double LinearSvm::objective(const std::vector<SparseVec>& features,
                            const std::vector<Label>& labels) const {
    double reg = 0.0;
    for (double w : w_) reg += w * w;
    double hinge = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        double y = labels[i] == Label::Depressed ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - y * (features[i].dot_dense(w_) + b_));
    }
    return 0.5 * reg + c_ * hinge;
}

}  // namespace han::baseline
