#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "han/corpus.hpp"
#include "han/lexicon.hpp"

namespace han::analysis {

// Dialogue-shape averages over a corpus, split by speaker.
struct TurnStats {
    double avg_turns_per_session = 0.0;
    double avg_tokens_per_turn = 0.0;
    double avg_tokens_client = 0.0;
    double avg_tokens_therapist = 0.0;
    // set when a speaker has no turns at all (its average reads 0)
    bool no_client_turns = false;
    bool no_therapist_turns = false;
};

TurnStats turn_stats(const std::vector<corpus::Session>& sessions);

// One affective category pinned to a lexicon column; label is the
// display/report name.
struct CategoryRef {
    std::string label;
    std::string lexicon;
    std::string category;
};

struct ClassStats {
    std::size_t samples = 0;
    std::size_t total_turns = 0;
    std::size_t vocab_size = 0;
    std::size_t affective_word_count = 0;
    double affective_fraction = 0.0;
};

// Vocabulary-use contrast between the two classes. A vocabulary word counts
// as affective when any selected category column is nonzero for it. Turns of
// the selected speaker view feed the counts (client by default).
struct ClassVocabStats {
    ClassStats depressed;
    ClassStats not_depressed;
};

ClassVocabStats class_vocab_stats(const std::vector<corpus::Session>& sessions,
                                  const lex::LexiconStack& stack,
                                  const std::vector<CategoryRef>& categories,
                                  corpus::View view = corpus::View::Client);

struct CategoryStat {
    std::size_t occurrences = 0;       // token occurrences, with multiplicity
    double fraction_of_tokens = 0.0;   // occurrences / class token total
};

struct CategoryOccurrence {
    std::vector<std::string> labels;   // category display names, input order
    std::vector<CategoryStat> depressed;
    std::vector<CategoryStat> not_depressed;
};

CategoryOccurrence category_occurrence(const std::vector<corpus::Session>& sessions,
                                       const lex::LexiconStack& stack,
                                       const std::vector<CategoryRef>& categories,
                                       corpus::View view = corpus::View::Client);

// The category set used for the affective-word statistics when the config
// does not override it; matches the shipped toy lexica's column names.
std::vector<CategoryRef> default_categories();

}  // namespace han::analysis
