#include "han/analysis.hpp"

#include <set>
#include <stdexcept>

namespace han::analysis {

using corpus::Label;
using corpus::Session;
using corpus::Speaker;
using corpus::Turn;
using corpus::View;

TurnStats turn_stats(const std::vector<Session>& sessions) {
    if (sessions.empty()) throw std::invalid_argument("turn_stats: empty corpus");
    std::size_t turns = 0, tokens = 0;
    std::size_t client_turns = 0, client_tokens = 0;
    std::size_t therapist_turns = 0, therapist_tokens = 0;
    for (const Session& s : sessions) {
        turns += s.turns.size();
        for (const Turn& t : s.turns) {
            tokens += t.tokens.size();
            if (t.speaker == Speaker::Client) {
                ++client_turns;
                client_tokens += t.tokens.size();
            } else {
                ++therapist_turns;
                therapist_tokens += t.tokens.size();
            }
        }
    }
    TurnStats out;
    out.avg_turns_per_session = static_cast<double>(turns) / sessions.size();
    out.avg_tokens_per_turn =
        turns == 0 ? 0.0 : static_cast<double>(tokens) / static_cast<double>(turns);
    out.no_client_turns = client_turns == 0;
    out.no_therapist_turns = therapist_turns == 0;
    out.avg_tokens_client =
        client_turns == 0 ? 0.0
                          : static_cast<double>(client_tokens) / static_cast<double>(client_turns);
    out.avg_tokens_therapist = therapist_turns == 0
                                   ? 0.0
                                   : static_cast<double>(therapist_tokens) /
                                         static_cast<double>(therapist_turns);
    return out;
}

namespace {

Label require_label(const Session& s) {
    if (!s.label)
        throw std::invalid_argument("analysis: session '" + s.id + "' has no label");
    return *s.label;
}

bool speaker_selected(Speaker sp, View view) {
    if (view == View::Both) return true;
    return view == View::Client ? sp == Speaker::Client : sp == Speaker::Therapist;
}

std::vector<std::size_t> resolve_columns(const lex::LexiconStack& stack,
                                         const std::vector<CategoryRef>& categories) {
    std::vector<std::size_t> cols;
    cols.reserve(categories.size());
    for (const CategoryRef& c : categories) cols.push_back(stack.column(c.lexicon, c.category));
    return cols;
}

}  // namespace

ClassVocabStats class_vocab_stats(const std::vector<Session>& sessions,
                                  const lex::LexiconStack& stack,
                                  const std::vector<CategoryRef>& categories,
                                  View view) {
    std::vector<std::size_t> cols = resolve_columns(stack, categories);

    std::set<std::string> vocab[2];
    ClassStats stats[2];
    for (const Session& s : sessions) {
        std::size_t cls = require_label(s) == Label::Depressed ? 1 : 0;
        ++stats[cls].samples;
        for (const Turn& t : s.turns) {
            if (!speaker_selected(t.speaker, view)) continue;
            ++stats[cls].total_turns;
            for (const std::string& tok : t.tokens) vocab[cls].insert(tok);
        }
    }

    for (int cls = 0; cls < 2; ++cls) {
        stats[cls].vocab_size = vocab[cls].size();
        for (const std::string& tok : vocab[cls]) {
            std::vector<double> ctx = stack.context_vector(tok);
            for (std::size_t col : cols) {
                if (ctx[col] != 0.0) {
                    ++stats[cls].affective_word_count;
                    break;
                }
            }
        }
        stats[cls].affective_fraction =
            stats[cls].vocab_size == 0
                ? 0.0
                : static_cast<double>(stats[cls].affective_word_count) /
                      static_cast<double>(stats[cls].vocab_size);
    }

    ClassVocabStats out;
    out.not_depressed = stats[0];
    out.depressed = stats[1];
    return out;
}

CategoryOccurrence category_occurrence(const std::vector<Session>& sessions,
                                       const lex::LexiconStack& stack,
                                       const std::vector<CategoryRef>& categories,
                                       View view) {
    std::vector<std::size_t> cols = resolve_columns(stack, categories);

    std::vector<CategoryStat> stats[2];
    stats[0].resize(categories.size());
    stats[1].resize(categories.size());
    std::size_t token_totals[2] = {0, 0};

    for (const Session& s : sessions) {
        std::size_t cls = require_label(s) == Label::Depressed ? 1 : 0;
        for (const Turn& t : s.turns) {
            if (!speaker_selected(t.speaker, view)) continue;
            for (const std::string& tok : t.tokens) {
                ++token_totals[cls];
                std::vector<double> ctx = stack.context_vector(tok);
                for (std::size_t i = 0; i < cols.size(); ++i)
                    if (ctx[cols[i]] != 0.0) ++stats[cls][i].occurrences;
            }
        }
    }

    for (int cls = 0; cls < 2; ++cls)
        for (CategoryStat& c : stats[cls])
            c.fraction_of_tokens = token_totals[cls] == 0
                                       ? 0.0
                                       : static_cast<double>(c.occurrences) /
                                             static_cast<double>(token_totals[cls]);

    CategoryOccurrence out;
    for (const CategoryRef& c : categories) out.labels.push_back(c.label);
    out.not_depressed = std::move(stats[0]);
    out.depressed = std::move(stats[1]);
    return out;
}

std::vector<CategoryRef> default_categories() {
    return {
        {"positive_sentiment", "liwc", "posemo"},
        {"negative_sentiment", "liwc", "negemo"},
        {"sadness", "liwc", "sad"},
        {"anxiety", "liwc", "anx"},
    };
}

}  // namespace han::analysis
