#include "han/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "han/baseline.hpp"
#include "han/nn.hpp"
#include "han/tape.hpp"

namespace han::training {

using corpus::IndexedSession;
using corpus::Label;
using corpus::Session;
using nlohmann::json;

Metrics evaluate(const std::vector<Label>& preds, const std::vector<Label>& labels) {
    if (preds.size() != labels.size())
        throw std::runtime_error("evaluate: prediction/label count mismatch");
    if (labels.empty()) throw std::runtime_error("evaluate: empty label set");

    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto a = static_cast<std::size_t>(labels[i]);
        auto p = static_cast<std::size_t>(preds[i]);
        ++m.confusion[a][p];
    }
    for (std::size_t c = 0; c < 2; ++c) {
        double tp = static_cast<double>(m.confusion[c][c]);
        double fn = static_cast<double>(m.confusion[c][1 - c]);
        double fp = static_cast<double>(m.confusion[1 - c][c]);
        m.precision[c] = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
        m.recall[c] = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
        double pr = m.precision[c] + m.recall[c];
        m.f1[c] = pr > 0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
    }
    m.macro_f1 = (m.f1[0] + m.f1[1]) / 2.0;
    m.uar = (m.recall[0] + m.recall[1]) / 2.0;
    return m;
}

FoldPlan kfold_split(const std::vector<Session>& sessions, std::size_t k,
                     std::uint64_t seed) {
    if (k < 2) throw std::runtime_error("kfold: need at least 2 folds");
    if (sessions.empty()) throw std::runtime_error("kfold: empty corpus");

    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (!sessions[i].label)
            throw std::runtime_error("kfold: session '" + sessions[i].id +
                                     "' has no label");
        by_class[static_cast<std::size_t>(*sessions[i].label)].push_back(i);
    }
    for (std::size_t c = 0; c < 2; ++c) {
        if (by_class[c].size() < k)
            throw std::runtime_error("kfold: class '" +
                                     std::string(corpus::label_name(static_cast<Label>(c))) +
                                     "' has " + std::to_string(by_class[c].size()) +
                                     " sessions, need at least " + std::to_string(k));
    }

    Rng rng(seed);
    FoldPlan plan;
    plan.folds.resize(k);
    for (std::size_t c = 0; c < 2; ++c) {
        rng.shuffle(by_class[c]);
        for (std::size_t i = 0; i < by_class[c].size(); ++i)
            plan.folds[i % k].val.push_back(by_class[c][i]);
    }
    for (std::size_t f = 0; f < k; ++f) {
        auto& fold = plan.folds[f];
        std::sort(fold.val.begin(), fold.val.end());
        for (std::size_t i = 0; i < sessions.size(); ++i)
            if (!std::binary_search(fold.val.begin(), fold.val.end(), i))
                fold.train.push_back(i);
    }
    return plan;
}

void TrainConfig::validate() const {
    static const char* known[] = {"svm", "han", "han_l", "han_s", "han_ls"};
    if (std::find(std::begin(known), std::end(known), model) == std::end(known))
        throw std::runtime_error("config: unknown model '" + model + "'");
    if (folds < 2) throw std::runtime_error("config: folds must be >= 2");
    if (max_epochs == 0) throw std::runtime_error("config: max_epochs must be >= 1");
    if (!(lr > 0)) throw std::runtime_error("config: lr must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw std::runtime_error("config: dropout must be in [0, 1)");
    if (patience == 0) throw std::runtime_error("config: patience must be >= 1");
    if (!is_svm()) {
        if (hidden == 0 || attn_dim == 0 || embed_dim == 0)
            throw std::runtime_error("config: model sizes must be positive");
    }
    if (min_count == 0) throw std::runtime_error("config: min_count must be >= 1");
    if (!(svm_c > 0)) throw std::runtime_error("config: svm_c must be positive");
    if (svm_epochs == 0) throw std::runtime_error("config: svm_epochs must be >= 1");
}

json train_config_json(const TrainConfig& cfg) {
    json j;
    j["model"] = cfg.model;
    j["view"] = corpus::view_name(cfg.view);
    j["folds"] = cfg.folds;
    j["max_epochs"] = cfg.max_epochs;
    j["lr"] = cfg.lr;
    j["dropout"] = cfg.dropout;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    j["hidden"] = cfg.hidden;
    j["attn_dim"] = cfg.attn_dim;
    j["embed_dim"] = cfg.embed_dim;
    j["min_count"] = cfg.min_count;
    j["class_weights"] = cfg.class_weights;
    j["train_embeddings"] = cfg.train_embeddings;
    j["max_turn_tokens"] = cfg.limits.max_turn_tokens;
    j["max_session_turns"] = cfg.limits.max_session_turns;
    j["svm_c"] = cfg.svm_c;
    j["svm_epochs"] = cfg.svm_epochs;
    return j;
}

model::HanConfig han_config(const TrainConfig& cfg, const lex::LexiconStack* stack) {
    model::HanConfig mcfg;
    mcfg.conditioning = cfg.wants_conditioning();
    mcfg.summary = cfg.wants_summary();
    mcfg.hidden = cfg.hidden;
    mcfg.attn_dim = cfg.attn_dim;
    mcfg.embed_dim = cfg.embed_dim;
    mcfg.dropout = cfg.dropout;
    if (mcfg.conditioning) {
        if (!stack)
            throw std::runtime_error("config: model '" + cfg.model +
                                     "' needs at least one lexicon");
        mcfg.context_dim = stack->total_dim();
    }
    mcfg.validate();
    return mcfg;
}

namespace {

std::size_t label_index(const IndexedSession& s) {
    if (!s.label)
        throw std::runtime_error("training: session '" + s.id + "' has no label");
    return static_cast<std::size_t>(*s.label);
}

double sample_weight(const IndexedSession& s, const std::vector<double>* wts) {
    if (!wts) return 1.0;
    return (*wts)[label_index(s)];
}

}  // namespace

double mean_loss(const std::vector<IndexedSession>& set, const model::HanParams& params,
                 const model::HanConfig& mcfg, const lex::LexiconStack* stack,
                 const std::vector<double>* class_wts) {
    if (set.empty()) throw std::runtime_error("mean_loss: empty set");
    double total = 0.0;
    for (const auto& s : set) {
        auto trace = model::forward(s, params, mcfg, stack);
        total += model::loss(trace, static_cast<Label>(label_index(s)), class_wts);
    }
    return total / static_cast<double>(set.size());
}

std::vector<Label> predict_all(const std::vector<IndexedSession>& set,
                               const model::HanParams& params,
                               const model::HanConfig& mcfg,
                               const lex::LexiconStack* stack) {
    std::vector<Label> out;
    out.reserve(set.size());
    for (const auto& s : set)
        out.push_back(model::predict(model::forward(s, params, mcfg, stack)));
    return out;
}

TrainResult train_one(const std::vector<IndexedSession>& train_set,
                      const std::vector<IndexedSession>& val_set,
                      model::HanParams params, const model::HanConfig& mcfg,
                      const lex::LexiconStack* stack, const TrainConfig& cfg,
                      const std::vector<double>* class_wts, Rng& rng) {
    if (train_set.empty()) throw std::runtime_error("train: empty training set");
    if (val_set.empty()) throw std::runtime_error("train: empty validation set");

    auto grads = model::HanGrads::zeros(mcfg, params.embeddings.matrix.rows());
    auto refs = model::enumerate_params(params, grads);
    nn::AdamConfig acfg;
    acfg.lr = cfg.lr;
    nn::Adam opt(acfg);

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t bad_epochs = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double train_total = 0.0;
        for (std::size_t idx : order) {
            const auto& s = train_set[idx];
            nn::zero_grads(refs);
            nn::Tape tape;
            auto graph =
                model::build_forward(tape, s, params, &grads, mcfg, stack, true, &rng);
            auto probs = tape.softmax(graph.logits);
            auto loss = tape.cross_entropy(probs, label_index(s),
                                           sample_weight(s, class_wts));
            double lv = tape.value(loss)[0];
            if (!std::isfinite(lv))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", session '" + s.id +
                                         "'");
            tape.backward(loss);
            opt.step(refs);
            train_total += lv;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_total / static_cast<double>(train_set.size());
        rec.val_loss = mean_loss(val_set, params, mcfg, stack, class_wts);
        result.history.push_back(rec);

        if (rec.val_loss < result.best_val_loss) {
            result.best_val_loss = rec.val_loss;
            result.best_epoch = epoch;
            result.best_params = params;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.patience) {
                result.stopped_early = true;
                break;
            }
        }
    }
    if (result.best_epoch == 0) throw std::runtime_error("train: no epoch completed");
    return result;
}

json metrics_json(const Metrics& m) {
    json j;
    j["confusion"] = {{m.confusion[0][0], m.confusion[0][1]},
                      {m.confusion[1][0], m.confusion[1][1]}};
    j["precision"] = {m.precision[0], m.precision[1]};
    j["recall"] = {m.recall[0], m.recall[1]};
    j["f1"] = {m.f1[0], m.f1[1]};
    j["macro_f1"] = m.macro_f1;
    j["uar"] = m.uar;
    return j;
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    double n = static_cast<double>(xs.size());
    mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / n);
}

std::vector<double> inverse_freq_weights(const std::vector<IndexedSession>& train_set) {
    double counts[2] = {0, 0};
    for (const auto& s : train_set) counts[label_index(s)] += 1.0;
    double total = counts[0] + counts[1];
    std::vector<double> w(2, 1.0);
    for (std::size_t c = 0; c < 2; ++c)
        if (counts[c] > 0) w[c] = total / (2.0 * counts[c]);
    return w;
}

std::vector<Session> gather(const std::vector<Session>& all,
                            const std::vector<std::size_t>& idx) {
    std::vector<Session> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(all[i]);
    return out;
}

}  // namespace

CvResult run_cv(const std::vector<Session>& sessions, const TrainConfig& cfg,
                const lex::LexiconStack* stack,
                const std::optional<std::string>& embeddings_path,
                const json& config_extras) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();

    auto viewed = corpus::select_view(sessions, cfg.view);
    if (cfg.wants_summary())
        for (const auto& s : viewed)
            if (!s.summary)
                throw std::runtime_error("config: model '" + cfg.model +
                                         "' needs summaries, session '" + s.id +
                                         "' has none");
    if (cfg.wants_conditioning() && !stack)
        throw std::runtime_error("config: model '" + cfg.model +
                                 "' needs at least one lexicon");

    Rng master(cfg.seed);
    std::uint64_t plan_seed = master.next();
    std::vector<std::uint64_t> fold_seeds(cfg.folds);
    for (auto& s : fold_seeds) s = master.next();

    auto plan = kfold_split(viewed, cfg.folds, plan_seed);

    CvResult result;
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        auto train_sessions = gather(viewed, plan.folds[f].train);
        auto val_sessions = gather(viewed, plan.folds[f].val);

        FoldOutcome out;
        out.fold = f + 1;
        out.train_size = train_sessions.size();
        out.val_size = val_sessions.size();

        if (cfg.is_svm()) {
            auto tfidf = baseline::TfIdfModel::fit(train_sessions);
            std::vector<baseline::SparseVec> feats;
            std::vector<Label> labels;
            for (const auto& s : train_sessions) {
                feats.push_back(tfidf.transform(s));
                labels.push_back(*s.label);
            }
            auto svm = baseline::LinearSvm::train(feats, labels, cfg.svm_c,
                                                  cfg.svm_epochs, fold_seeds[f]);
            std::vector<Label> preds, truth;
            for (const auto& s : val_sessions) {
                preds.push_back(svm.predict(tfidf.transform(s)));
                truth.push_back(*s.label);
            }
            out.metrics = evaluate(preds, truth);
        } else {
            Rng frng(fold_seeds[f]);
            auto vocab = corpus::Vocabulary::build(train_sessions, cfg.min_count);
            corpus::EmbeddingTable emb =
                embeddings_path
                    ? corpus::load_embeddings(*embeddings_path, vocab, cfg.embed_dim,
                                              frng)
                    : corpus::random_embeddings(vocab, cfg.embed_dim, frng);
            emb.trainable = cfg.train_embeddings;

            auto mcfg = han_config(cfg, stack);
            auto params = model::HanParams::init(mcfg, emb, frng);

            std::vector<IndexedSession> train_idx, val_idx;
            for (const auto& s : train_sessions)
                train_idx.push_back(corpus::index_session(s, vocab, cfg.limits));
            for (const auto& s : val_sessions)
                val_idx.push_back(corpus::index_session(s, vocab, cfg.limits));

            std::vector<double> wts;
            if (cfg.class_weights) wts = inverse_freq_weights(train_idx);
            const std::vector<double>* wptr = cfg.class_weights ? &wts : nullptr;

            auto tr = train_one(train_idx, val_idx, std::move(params), mcfg, stack,
                                cfg, wptr, frng);
            out.best_epoch = tr.best_epoch;
            out.best_val_loss = tr.best_val_loss;

            auto preds = predict_all(val_idx, tr.best_params, mcfg, stack);
            std::vector<Label> truth;
            for (const auto& s : val_idx)
                truth.push_back(static_cast<Label>(label_index(s)));
            out.metrics = evaluate(preds, truth);
        }
        result.folds.push_back(std::move(out));
    }

    std::vector<double> f1s, uars;
    for (const auto& fo : result.folds) {
        f1s.push_back(fo.metrics.macro_f1);
        uars.push_back(fo.metrics.uar);
    }
    mean_std(f1s, result.macro_f1_mean, result.macro_f1_std);
    mean_std(uars, result.uar_mean, result.uar_std);

    auto t1 = std::chrono::steady_clock::now();
    result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    json config_echo = train_config_json(cfg);
    for (auto it = config_extras.begin(); it != config_extras.end(); ++it)
        config_echo[it.key()] = it.value();
    std::string hash = hex64(fnv1a64(config_echo.dump()));

    json report;
    report["command"] = "cv";
    report["config"] = config_echo;
    report["config_hash"] = hash;
    report["seed"] = cfg.seed;
    json jfolds = json::array();
    for (const auto& fo : result.folds) {
        json jf;
        jf["fold"] = fo.fold;
        jf["train_size"] = fo.train_size;
        jf["val_size"] = fo.val_size;
        if (!cfg.is_svm()) {
            jf["best_epoch"] = fo.best_epoch;
            jf["best_val_loss"] = fo.best_val_loss;
        }
        jf["metrics"] = metrics_json(fo.metrics);
        jfolds.push_back(jf);
    }
    report["folds"] = jfolds;
    report["aggregate"] = {{"macro_f1_mean", result.macro_f1_mean},
                           {"macro_f1_std", result.macro_f1_std},
                           {"uar_mean", result.uar_mean},
                           {"uar_std", result.uar_std}};
    result.report_json = report.dump();

    // Wall-clock stays out of the JSON so identical runs serialize
    // identically; it is reported here instead.
    char buf[256];
    std::ostringstream text;
    std::snprintf(buf, sizeof buf, "model=%s view=%s folds=%zu seed=%llu config=%s\n",
                  cfg.model.c_str(), corpus::view_name(cfg.view), cfg.folds,
                  static_cast<unsigned long long>(cfg.seed), hash.c_str());
    text << buf;
    text << "fold  macro_f1  uar     best_epoch\n";
    for (const auto& fo : result.folds) {
        if (cfg.is_svm())
            std::snprintf(buf, sizeof buf, "%-5zu %-9.4f %-7.4f -\n", fo.fold,
                          fo.metrics.macro_f1, fo.metrics.uar);
        else
            std::snprintf(buf, sizeof buf, "%-5zu %-9.4f %-7.4f %zu\n", fo.fold,
                          fo.metrics.macro_f1, fo.metrics.uar, fo.best_epoch);
        text << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "mean  macro_f1 %.4f +/- %.4f   uar %.4f +/- %.4f\n",
                  result.macro_f1_mean, result.macro_f1_std, result.uar_mean,
                  result.uar_std);
    text << buf;
    std::snprintf(buf, sizeof buf, "wall  %.1f s\n", result.wall_seconds);
    text << buf;
    result.report_text = text.str();
    return result;
}

double gradcheck_full(const std::vector<Session>& sessions, const TrainConfig& cfg,
                      const lex::LexiconStack* stack, std::size_t samples, double h) {
    cfg.validate();
    if (cfg.is_svm()) throw std::runtime_error("gradcheck: svm has no gradients");
    auto viewed = corpus::select_view(sessions, cfg.view);

    Rng rng(cfg.seed);
    auto vocab = corpus::Vocabulary::build(viewed, cfg.min_count);
    auto emb = corpus::random_embeddings(vocab, cfg.embed_dim, rng);
    emb.trainable = cfg.train_embeddings;
    auto mcfg = han_config(cfg, stack);
    auto params = model::HanParams::init(mcfg, emb, rng);
    auto grads = model::HanGrads::zeros(mcfg, params.embeddings.matrix.rows());
    auto refs = model::enumerate_params(params, grads);

    std::vector<IndexedSession> indexed;
    for (const auto& s : viewed)
        indexed.push_back(corpus::index_session(s, vocab, cfg.limits));

    auto loss_and_grad = [&]() {
        double total = 0.0;
        for (const auto& s : indexed) {
            nn::Tape tape;
            auto graph = model::build_forward(tape, s, params, &grads, mcfg, stack,
                                              false, nullptr);
            auto probs = tape.softmax(graph.logits);
            auto loss = tape.cross_entropy(probs, label_index(s), 1.0);
            tape.backward(loss);
            total += tape.value(loss)[0];
        }
        return total;
    };
    Rng pick = rng.fork(1);
    return nn::grad_check(loss_and_grad, refs, samples, pick, h);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace han::training
