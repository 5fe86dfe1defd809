#include "han/model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace han::model {

using corpus::IndexedSession;
using corpus::IndexedTurn;
using corpus::Label;
using nlohmann::json;
using nn::AttnPoolVars;
using nn::AttnVars;
using nn::DenseVars;
using nn::GruVars;
using nn::Tape;
using nn::Tensor;
using nn::Var;

void HanConfig::validate() const {
    if (hidden < 1 || attn_dim < 1 || embed_dim < 1)
        throw std::invalid_argument("model config: sizes must be positive");
    if (classes < 2) throw std::invalid_argument("model config: need at least 2 classes");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("model config: dropout must be in [0,1)");
    if (conditioning != (context_dim > 0))
        throw std::invalid_argument(
            "model config: conditioning requires context_dim > 0 and vice versa");
}

HanParams HanParams::init(const HanConfig& cfg, corpus::EmbeddingTable embeddings,
                          Rng& rng) {
    cfg.validate();
    if (embeddings.dim() != cfg.embed_dim)
        throw std::invalid_argument("model params: embedding width does not match config");
    HanParams p;
    p.embeddings = std::move(embeddings);
    p.word_fwd = nn::GruParams::init(cfg.hidden, cfg.embed_dim, rng);
    p.word_bwd = nn::GruParams::init(cfg.hidden, cfg.embed_dim, rng);
    p.word_attn = nn::AttnParams::init(cfg.attn_dim, cfg.turn_vector_dim(), rng);
    p.turn_fwd = nn::GruParams::init(cfg.hidden, cfg.turn_vector_dim(), rng);
    p.turn_bwd = nn::GruParams::init(cfg.hidden, cfg.turn_vector_dim(), rng);
    p.turn_attn = nn::AttnParams::init(cfg.attn_dim, cfg.turn_state_dim(), rng);
    p.classifier = nn::DenseParams::init(cfg.classes, cfg.classifier_input_dim(), rng);
    return p;
}

HanGrads HanGrads::zeros(const HanConfig& cfg, std::size_t vocab_size) {
    HanGrads g;
    g.embeddings = Tensor({vocab_size, cfg.embed_dim});
    g.word_fwd = nn::GruParams::zeros(cfg.hidden, cfg.embed_dim);
    g.word_bwd = nn::GruParams::zeros(cfg.hidden, cfg.embed_dim);
    g.word_attn = nn::AttnParams::zeros(cfg.attn_dim, cfg.turn_vector_dim());
    g.turn_fwd = nn::GruParams::zeros(cfg.hidden, cfg.turn_vector_dim());
    g.turn_bwd = nn::GruParams::zeros(cfg.hidden, cfg.turn_vector_dim());
    g.turn_attn = nn::AttnParams::zeros(cfg.attn_dim, cfg.turn_state_dim());
    g.classifier = nn::DenseParams::zeros(cfg.classes, cfg.classifier_input_dim());
    return g;
}

std::vector<nn::ParamRef> enumerate_params(HanParams& params, HanGrads& grads) {
    std::vector<nn::ParamRef> out;
    if (params.embeddings.trainable)
        out.push_back({"embeddings", &params.embeddings.matrix, &grads.embeddings});
    auto append = [&out](std::vector<nn::ParamRef> refs) {
        for (auto& r : refs) out.push_back(std::move(r));
    };
    append(nn::gru_param_refs("word_fwd", params.word_fwd, grads.word_fwd));
    append(nn::gru_param_refs("word_bwd", params.word_bwd, grads.word_bwd));
    append(nn::attn_param_refs("word_attn", params.word_attn, grads.word_attn));
    append(nn::gru_param_refs("turn_fwd", params.turn_fwd, grads.turn_fwd));
    append(nn::gru_param_refs("turn_bwd", params.turn_bwd, grads.turn_bwd));
    append(nn::attn_param_refs("turn_attn", params.turn_attn, grads.turn_attn));
    append(nn::dense_param_refs("classifier", params.classifier, grads.classifier));
    return out;
}

ForwardGraph build_forward(Tape& tape, const IndexedSession& session,
                           const HanParams& params, HanGrads* grads,
                           const HanConfig& cfg, const lex::LexiconStack* stack,
                           bool train_mode, Rng* rng) {
    cfg.validate();
    if (session.turns.empty())
        throw std::invalid_argument("forward: session '" + session.id + "' has no turns");
    if (cfg.summary && !session.has_summary)
        throw std::runtime_error("forward: session '" + session.id + "' has no summary");
    if (cfg.conditioning) {
        if (!stack)
            throw std::invalid_argument("forward: conditioning requires a lexicon stack");
        if (stack->total_dim() != cfg.context_dim)
            throw std::invalid_argument("forward: lexicon stack width " +
                                        std::to_string(stack->total_dim()) +
                                        " does not match context_dim " +
                                        std::to_string(cfg.context_dim));
    }
    bool use_dropout = train_mode && cfg.dropout > 0.0;
    if (use_dropout && !rng)
        throw std::invalid_argument("forward: train mode needs an rng for dropout");

    Tensor* emb_grad =
        (grads && params.embeddings.trainable) ? &grads->embeddings : nullptr;
    GruVars word_fwd, word_bwd;
    if (!cfg.word_encoder_identity) {
        word_fwd = nn::register_gru(tape, params.word_fwd, grads ? &grads->word_fwd : nullptr);
        word_bwd = nn::register_gru(tape, params.word_bwd, grads ? &grads->word_bwd : nullptr);
    }
    AttnVars word_attn =
        nn::register_attn(tape, params.word_attn, grads ? &grads->word_attn : nullptr);
    GruVars turn_fwd =
        nn::register_gru(tape, params.turn_fwd, grads ? &grads->turn_fwd : nullptr);
    GruVars turn_bwd =
        nn::register_gru(tape, params.turn_bwd, grads ? &grads->turn_bwd : nullptr);
    AttnVars turn_attn =
        nn::register_attn(tape, params.turn_attn, grads ? &grads->turn_attn : nullptr);
    DenseVars classifier =
        nn::register_dense(tape, params.classifier, grads ? &grads->classifier : nullptr);

    // shared word-level pipeline: embed -> encode -> dropout -> pool
    auto encode_tokens = [&](const std::vector<std::size_t>& ids,
                             const std::vector<std::string>& words) -> AttnPoolVars {
        std::vector<Var> xs(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            xs[i] = tape.matrix_row(&params.embeddings.matrix, emb_grad, ids[i]);

        std::vector<Var> states =
            cfg.word_encoder_identity
                ? xs
                : nn::bigru_encode(tape, word_fwd, word_bwd, xs, cfg.hidden);
        if (use_dropout)
            for (Var& s : states) s = tape.dropout(s, cfg.dropout, *rng);

        if (!cfg.conditioning) return nn::attention_pool(tape, word_attn, states);

        std::vector<Var> contexts(words.size());
        for (std::size_t i = 0; i < words.size(); ++i)
            contexts[i] = tape.constant(Tensor::row(stack->context_vector(words[i])));
        return nn::conditioned_attention_pool(tape, word_attn, states, contexts);
    };

    ForwardGraph g;
    std::vector<Var> turn_vecs;
    turn_vecs.reserve(session.turns.size());
    for (const IndexedTurn& turn : session.turns) {
        AttnPoolVars pooled = encode_tokens(turn.ids, turn.words);
        g.word_attention.push_back(pooled.weights);
        turn_vecs.push_back(pooled.pooled);
    }
    g.turn_vectors = turn_vecs;

    std::vector<Var> turn_states =
        nn::bigru_encode(tape, turn_fwd, turn_bwd, turn_vecs, cfg.hidden);
    if (use_dropout)
        for (Var& s : turn_states) s = tape.dropout(s, cfg.dropout, *rng);

    AttnPoolVars session_pool = nn::attention_pool(tape, turn_attn, turn_states);
    g.turn_attention = session_pool.weights;
    g.session_rep = session_pool.pooled;

    Var input = g.session_rep;
    if (cfg.summary) {
        AttnPoolVars summary_pool =
            encode_tokens(session.summary_ids, session.summary_words);
        g.summary_rep = summary_pool.pooled;
        g.summary_attention = summary_pool.weights;
        input = tape.concat(g.summary_rep, g.session_rep);
    }
    g.logits = nn::dense(tape, classifier, input);
    return g;
}

ForwardTrace forward(const IndexedSession& session, const HanParams& params,
                     const HanConfig& cfg, const lex::LexiconStack* stack) {
    Tape tape;
    ForwardGraph g = build_forward(tape, session, params, nullptr, cfg, stack,
                                   /*train_mode=*/false, nullptr);
    ForwardTrace t;
    t.logits = tape.value(g.logits);
    for (Var v : g.word_attention) t.word_attention.push_back(tape.value(v));
    t.turn_attention = tape.value(g.turn_attention);
    t.session_rep = tape.value(g.session_rep);
    for (Var v : g.turn_vectors) t.turn_vectors.push_back(tape.value(v));
    if (cfg.summary) {
        t.summary_rep = tape.value(g.summary_rep);
        t.summary_attention = tape.value(g.summary_attention);
    }
    return t;
}

double loss(const ForwardTrace& trace, Label label,
            const std::vector<double>* class_weights) {
    std::size_t cls = static_cast<std::size_t>(label);
    if (class_weights && cls >= class_weights->size())
        throw std::invalid_argument("loss: class weight vector too short");
    double w = class_weights ? (*class_weights)[cls] : 1.0;
    return w * nn::cross_entropy(nn::softmax(trace.logits), cls);
}

Label predict_logits(const Tensor& logits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    return best == 1 ? Label::Depressed : Label::NotDepressed;
}

Label predict(const ForwardTrace& trace) { return predict_logits(trace.logits); }

namespace {

std::vector<std::pair<std::string, const Tensor*>> named_tensors(const HanParams& p) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.emplace_back("embeddings", &p.embeddings.matrix);
    auto add_gru = [&out](const std::string& prefix, const nn::GruParams& g) {
        out.emplace_back(prefix + ".w_update", &g.w_update);
        out.emplace_back(prefix + ".w_reset", &g.w_reset);
        out.emplace_back(prefix + ".w_cand", &g.w_cand);
        out.emplace_back(prefix + ".u_update", &g.u_update);
        out.emplace_back(prefix + ".u_reset", &g.u_reset);
        out.emplace_back(prefix + ".u_cand", &g.u_cand);
        out.emplace_back(prefix + ".b_update", &g.b_update);
        out.emplace_back(prefix + ".b_reset", &g.b_reset);
        out.emplace_back(prefix + ".b_cand", &g.b_cand);
    };
    auto add_attn = [&out](const std::string& prefix, const nn::AttnParams& a) {
        out.emplace_back(prefix + ".proj", &a.proj);
        out.emplace_back(prefix + ".proj_bias", &a.proj_bias);
        out.emplace_back(prefix + ".score_vec", &a.score_vec);
    };
    add_gru("word_fwd", p.word_fwd);
    add_gru("word_bwd", p.word_bwd);
    add_attn("word_attn", p.word_attn);
    add_gru("turn_fwd", p.turn_fwd);
    add_gru("turn_bwd", p.turn_bwd);
    add_attn("turn_attn", p.turn_attn);
    out.emplace_back("classifier.w", &p.classifier.w);
    out.emplace_back("classifier.b", &p.classifier.b);
    return out;
}

json config_to_json(const HanConfig& cfg) {
    json j;
    j["conditioning"] = cfg.conditioning;
    j["summary"] = cfg.summary;
    j["hidden"] = cfg.hidden;
    j["attn_dim"] = cfg.attn_dim;
    j["embed_dim"] = cfg.embed_dim;
    j["dropout"] = cfg.dropout;
    j["context_dim"] = cfg.context_dim;
    j["classes"] = cfg.classes;
    j["word_encoder_identity"] = cfg.word_encoder_identity;
    return j;
}

HanConfig config_from_json(const json& j) {
    HanConfig cfg;
    cfg.conditioning = j.at("conditioning").get<bool>();
    cfg.summary = j.at("summary").get<bool>();
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.attn_dim = j.at("attn_dim").get<std::size_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.context_dim = j.at("context_dim").get<std::size_t>();
    cfg.classes = j.at("classes").get<std::size_t>();
    cfg.word_encoder_identity = j.at("word_encoder_identity").get<bool>();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const HanParams& params,
                     const HanConfig& cfg, const corpus::Vocabulary& vocab) {
    json j;
    j["format_version"] = 1;
    j["config"] = config_to_json(cfg);
    j["embeddings_trainable"] = params.embeddings.trainable;

    json tokens = json::array();
    const auto& all = vocab.tokens();
    for (std::size_t i = 2; i < all.size(); ++i) tokens.push_back(all[i]);
    j["vocab"] = std::move(tokens);

    json tensors;
    for (const auto& [name, tensor] : named_tensors(params)) {
        json t;
        t["shape"] = tensor->shape();
        t["data"] = tensor->values();
        tensors[name] = std::move(t);
    }
    j["params"] = std::move(tensors);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint " + path + ": malformed JSON: " + e.what());
    }
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
        throw std::runtime_error("checkpoint " + path + ": unsupported format version");

    Checkpoint ck;
    ck.config = config_from_json(j.at("config"));
    ck.vocab =
        corpus::Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    ck.params.embeddings.trainable = j.at("embeddings_trainable").get<bool>();

    // materialize zero-shaped params, then fill every named tensor
    ck.params.embeddings.matrix = Tensor({ck.vocab.size(), ck.config.embed_dim});
    ck.params.word_fwd = nn::GruParams::zeros(ck.config.hidden, ck.config.embed_dim);
    ck.params.word_bwd = nn::GruParams::zeros(ck.config.hidden, ck.config.embed_dim);
    ck.params.word_attn =
        nn::AttnParams::zeros(ck.config.attn_dim, ck.config.turn_vector_dim());
    ck.params.turn_fwd =
        nn::GruParams::zeros(ck.config.hidden, ck.config.turn_vector_dim());
    ck.params.turn_bwd =
        nn::GruParams::zeros(ck.config.hidden, ck.config.turn_vector_dim());
    ck.params.turn_attn =
        nn::AttnParams::zeros(ck.config.attn_dim, ck.config.turn_state_dim());
    ck.params.classifier =
        nn::DenseParams::zeros(ck.config.classes, ck.config.classifier_input_dim());

    HanParams& p = ck.params;
    std::vector<std::pair<std::string, Tensor*>> targets;
    for (auto& [name, tensor] : named_tensors(p))
        targets.emplace_back(name, const_cast<Tensor*>(tensor));

    const json& tensors = j.at("params");
    for (auto& [name, target] : targets) {
        if (!tensors.contains(name))
            throw std::runtime_error("checkpoint " + path + ": missing tensor '" + name + "'");
        const json& t = tensors.at(name);
        auto shape = t.at("shape").get<std::vector<std::size_t>>();
        auto data = t.at("data").get<std::vector<double>>();
        Tensor loaded(shape, std::move(data));
        if (!loaded.same_shape(*target))
            throw std::runtime_error("checkpoint " + path + ": tensor '" + name +
                                     "' has shape " + loaded.shape_str() + ", expected " +
                                     target->shape_str());
        *target = std::move(loaded);
    }
    return ck;
}

}  // namespace han::model
