#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "han/corpus.hpp"

namespace han::lex {

// One affective lexicon: a word -> fixed-width annotation vector map with
// named columns (e.g. a "sadness" column).
struct Lexicon {
    std::string name;
    std::size_t dim = 0;
    std::vector<std::string> category_names;
    std::unordered_map<std::string, std::vector<double>> entries;

    bool has(const std::string& word) const { return entries.count(word) != 0; }
};

// TSV with a header line `#name<TAB>dim<TAB>cat1<TAB>..<TAB>catD`, then one
// `word<TAB>v1<TAB>..<TAB>vD` row per entry. Words are lowercased on load.
Lexicon load_lexicon(const std::string& path);
Lexicon parse_lexicon(const std::string& bytes, const std::string& origin);

// Ordered concatenation of several lexica into one annotation space.
class LexiconStack {
public:
    explicit LexiconStack(std::vector<Lexicon> lexica);

    std::size_t total_dim() const { return total_dim_; }
    std::size_t count() const { return lexica_.size(); }
    const Lexicon& lexicon(std::size_t i) const { return lexica_.at(i); }
    const std::vector<std::size_t>& offsets() const { return offsets_; }

    // Column of `category` within lexicon `lexicon_name`, as an absolute
    // index into the stacked space. Throws when unknown.
    std::size_t column(const std::string& lexicon_name, const std::string& category) const;
    bool has_column(const std::string& lexicon_name, const std::string& category) const;

    // Stacked annotations for a word; zeros where a lexicon has no entry.
    std::vector<double> context_vector(const std::string& word) const;

    // Rescale every dimension to [-1, 1] over the entries present
    // (experimentation aid; lookups stay raw by default).
    void min_max_scale();

private:
    std::vector<Lexicon> lexica_;
    std::vector<std::size_t> offsets_;
    std::size_t total_dim_ = 0;
};

LexiconStack load_stack(const std::vector<std::string>& paths, bool scale = false);

struct CoverageReport {
    std::size_t covered_count = 0;            // vocab tokens with nonzero context
    double fraction = 0.0;                    // covered / non-special vocab
    std::vector<std::size_t> per_lexicon;     // tokens with an entry, per lexicon
};

CoverageReport coverage(const LexiconStack& stack, const corpus::Vocabulary& vocab);

}  // namespace han::lex
