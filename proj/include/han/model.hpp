#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "han/corpus.hpp"
#include "han/lexicon.hpp"
#include "han/nn.hpp"
#include "han/rng.hpp"
#include "han/tape.hpp"

namespace han::model {

// Variant switches and sizes for the hierarchical attention network.
// conditioning: concatenate per-word lexicon context vectors to word states
// before attention (requires context_dim == stack.total_dim).
// summary: encode the session summary with the shared word-level encoder and
// concatenate its pooled vector to the session representation.
struct HanConfig {
    bool conditioning = false;
    bool summary = false;
    std::size_t hidden = 300;       // per direction
    std::size_t attn_dim = 300;
    std::size_t embed_dim = 300;
    double dropout = 0.2;
    std::size_t context_dim = 0;
    std::size_t classes = 2;
    // Test-harness mode: word encoder becomes an identity pass-through of the
    // embeddings, making turn vectors order-invariant.
    bool word_encoder_identity = false;

    std::size_t word_state_dim() const {
        return word_encoder_identity ? embed_dim : 2 * hidden;
    }
    std::size_t turn_vector_dim() const {
        return word_state_dim() + (conditioning ? context_dim : 0);
    }
    std::size_t turn_state_dim() const { return 2 * hidden; }
    std::size_t classifier_input_dim() const {
        return turn_state_dim() + (summary ? turn_vector_dim() : 0);
    }
    void validate() const;
};

struct HanParams {
    corpus::EmbeddingTable embeddings;
    nn::GruParams word_fwd, word_bwd;
    nn::AttnParams word_attn;   // over word_state (+ context when conditioning)
    nn::GruParams turn_fwd, turn_bwd;
    nn::AttnParams turn_attn;   // over turn-level encoder states
    nn::DenseParams classifier;

    static HanParams init(const HanConfig& cfg, corpus::EmbeddingTable embeddings,
                          Rng& rng);
};

struct HanGrads {
    nn::Tensor embeddings;  // used only when the table is trainable
    nn::GruParams word_fwd, word_bwd;
    nn::AttnParams word_attn;
    nn::GruParams turn_fwd, turn_bwd;
    nn::AttnParams turn_attn;
    nn::DenseParams classifier;

    static HanGrads zeros(const HanConfig& cfg, std::size_t vocab_size);
};

// Trainable tensors in a fixed, documented order. The embedding table is
// included only when trainable.
std::vector<nn::ParamRef> enumerate_params(HanParams& params, HanGrads& grads);

struct ForwardTrace {
    nn::Tensor logits;
    std::vector<nn::Tensor> word_attention;  // per turn
    nn::Tensor turn_attention;
    nn::Tensor session_rep;
    std::vector<nn::Tensor> turn_vectors;
    nn::Tensor summary_rep;        // empty unless config.summary
    nn::Tensor summary_attention;  // empty unless config.summary
};

// Live handles into a forward graph, for training-time loss construction.
struct ForwardGraph {
    nn::Var logits;
    std::vector<nn::Var> word_attention;
    nn::Var turn_attention;
    nn::Var session_rep;
    std::vector<nn::Var> turn_vectors;
    nn::Var summary_rep;
    nn::Var summary_attention;
};

// Builds the whole forward pass for one session on the tape. grads may be
// null for evaluation; rng is required only in train_mode (dropout).
ForwardGraph build_forward(nn::Tape& tape, const corpus::IndexedSession& session,
                           const HanParams& params, HanGrads* grads,
                           const HanConfig& cfg, const lex::LexiconStack* stack,
                           bool train_mode, Rng* rng);

// Evaluation-mode forward pass with the trace materialized.
ForwardTrace forward(const corpus::IndexedSession& session, const HanParams& params,
                     const HanConfig& cfg, const lex::LexiconStack* stack);

// Cross-entropy of softmax(logits) against the label; optional per-class
// weights (e.g. inverse class frequency).
double loss(const ForwardTrace& trace, corpus::Label label,
            const std::vector<double>* class_weights = nullptr);

// Argmax over logits; an exact tie resolves to NotDepressed.
corpus::Label predict(const ForwardTrace& trace);
corpus::Label predict_logits(const nn::Tensor& logits);

// Versioned JSON checkpoint: config, vocabulary, and every parameter tensor
// by name with shape and row-major data.
void save_checkpoint(const std::string& path, const HanParams& params,
                     const HanConfig& cfg, const corpus::Vocabulary& vocab);

struct Checkpoint {
    HanConfig config;
    corpus::Vocabulary vocab;
    HanParams params;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace han::model
