#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "han/rng.hpp"
#include "han/tensor.hpp"

namespace han::corpus {

enum class Speaker { Therapist, Client };
enum class Label { NotDepressed = 0, Depressed = 1 };
enum class View { Client, Therapist, Both };

const char* speaker_name(Speaker s);
const char* label_name(Label l);
const char* view_name(View v);
std::optional<Speaker> speaker_from_name(const std::string& s);
std::optional<Label> label_from_name(const std::string& s);
std::optional<View> view_from_name(const std::string& s);

struct Turn {
    Speaker speaker;
    std::vector<std::string> tokens;
};

// One transcribed therapy session: ordered speaker turns, an optional
// expert-written summary, and an optional binary label. phq8 is kept when
// the source record carried a questionnaire score.
struct Session {
    std::string id;
    std::vector<Turn> turns;
    std::optional<std::vector<std::string>> summary;
    std::optional<Label> label;
    std::optional<int> phq8;
};

// Strips speaker prefixes (an uppercase name followed by ':' at line start),
// removes [] / () annotation spans, and collapses whitespace.
std::string clean_transcript(const std::string& raw);

// Lowercases, splits on whitespace, and detaches punctuation as single-char
// tokens; apostrophes stay word-internal when flanked by word characters.
std::vector<std::string> tokenize(const std::string& text);

struct ParseOptions {
    bool require_labels = false;
    // Questionnaire scores binarize to Depressed at >= threshold when no
    // explicit label is present.
    int phq8_threshold = 10;
};

// One JSON object per line:
// {"id", "label", "phq8", "summary", "turns": [{"speaker", "text"}]}
// Turn text is cleaned and tokenized; empty turns are dropped.
std::vector<Session> parse_session_jsonl(const std::string& bytes,
                                         const ParseOptions& opts = {});
std::vector<Session> load_sessions(const std::string& path, const ParseOptions& opts = {});

std::string session_to_json(const Session& s);
std::string sessions_to_jsonl(const std::vector<Session>& sessions);
void write_sessions_jsonl(const std::string& path, const std::vector<Session>& sessions);

// Keeps only the chosen speaker's turns (Both = identity); summary, label
// and id carry through. Throws if the result has no turns.
Session select_view(const Session& s, View view);
std::vector<Session> select_view(const std::vector<Session>& sessions, View view);

class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;

    Vocabulary();

    // Tokens with corpus frequency >= min_count (turns and summaries),
    // ordered by descending frequency then lexicographically.
    static Vocabulary build(const std::vector<Session>& sessions,
                            std::size_t min_count = 1);
    // Rebuild from a serialized non-special token list (checkpoint load).
    static Vocabulary from_tokens(const std::vector<std::string>& non_special);

    std::size_t index(const std::string& token) const;  // kUnk when absent
    bool contains(const std::string& token) const;
    const std::string& token(std::size_t idx) const;
    std::size_t size() const { return tokens_.size(); }
    // All tokens including the two specials at indices 0 and 1.
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingTable {
    nn::Tensor matrix;  // |V| x dim, row kPad all zeros
    bool trainable = false;
    std::size_t matched = 0;   // vocab tokens found in the embedding file
    double coverage = 0.0;     // matched / non-special vocab size

    std::size_t dim() const { return matrix.cols(); }
};

// Text format: `token v1 ... v<dim>` per line, space-separated. Unmatched
// vocabulary rows are drawn from uniform(-0.05, 0.05).
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               std::size_t dim, Rng& rng);
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, Rng& rng);

struct IndexLimits {
    std::size_t max_turn_tokens = 200;
    std::size_t max_session_turns = 400;
};

struct IndexedTurn {
    Speaker speaker;
    std::vector<std::size_t> ids;
    std::vector<std::string> words;  // aligned with ids; raw tokens for lexicon lookups
};

// Vocabulary-indexed view of a session with length truncation applied.
struct IndexedSession {
    std::string id;
    std::vector<IndexedTurn> turns;
    std::vector<std::size_t> summary_ids;
    std::vector<std::string> summary_words;
    bool has_summary = false;
    std::optional<Label> label;
};

IndexedSession index_session(const Session& s, const Vocabulary& vocab,
                             const IndexLimits& limits = {});

}  // namespace han::corpus
