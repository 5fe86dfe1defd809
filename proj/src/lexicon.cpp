#include "han/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace han::lex {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t tab = line.find('\t', pos);
        if (tab == std::string::npos) {
            parts.push_back(line.substr(pos));
            break;
        }
        parts.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
    return parts;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

[[noreturn]] void lex_error(const std::string& origin, std::size_t line_no,
                            const std::string& what) {
    throw std::runtime_error(origin + " line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

Lexicon parse_lexicon(const std::string& bytes, const std::string& origin) {
    std::istringstream in(bytes);
    std::string line;
    std::size_t line_no = 0;
    Lexicon lex;

    // header: #name, dim, category names
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] != '#') lex_error(origin, line_no, "expected '#name<TAB>dim<TAB>cats' header");
        auto parts = split_tabs(line);
        if (parts.size() < 3) lex_error(origin, line_no, "header needs name, dim and categories");
        lex.name = parts[0].substr(1);
        long dim = 0;
        try {
            dim = std::stol(parts[1]);
        } catch (...) {
            lex_error(origin, line_no, "dim is not an integer");
        }
        if (dim < 1) lex_error(origin, line_no, "dim must be positive");
        lex.dim = static_cast<std::size_t>(dim);
        if (parts.size() - 2 != lex.dim)
            lex_error(origin, line_no,
                      "header lists " + std::to_string(parts.size() - 2) + " categories for dim " +
                          std::to_string(lex.dim));
        lex.category_names.assign(parts.begin() + 2, parts.end());
        break;
    }
    if (lex.dim == 0) lex_error(origin, line_no ? line_no : 1, "missing header");

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto parts = split_tabs(line);
        if (parts.size() != lex.dim + 1)
            lex_error(origin, line_no,
                      "expected word + " + std::to_string(lex.dim) + " values, got " +
                          std::to_string(parts.size() - 1));
        std::string word = lower(parts[0]);
        if (word.empty()) lex_error(origin, line_no, "empty word");
        if (lex.entries.count(word)) lex_error(origin, line_no, "duplicate word '" + word + "'");
        std::vector<double> values(lex.dim);
        for (std::size_t i = 0; i < lex.dim; ++i) {
            try {
                values[i] = std::stod(parts[i + 1]);
            } catch (...) {
                lex_error(origin, line_no, "bad value '" + parts[i + 1] + "'");
            }
        }
        lex.entries.emplace(std::move(word), std::move(values));
    }
    return lex;
}

Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_lexicon(buf.str(), path);
}

LexiconStack::LexiconStack(std::vector<Lexicon> lexica) : lexica_(std::move(lexica)) {
    if (lexica_.empty()) throw std::invalid_argument("lexicon stack: no lexica");
    for (std::size_t i = 0; i < lexica_.size(); ++i)
        for (std::size_t j = i + 1; j < lexica_.size(); ++j)
            if (lexica_[i].name == lexica_[j].name)
                throw std::invalid_argument("lexicon stack: duplicate name '" +
                                            lexica_[i].name + "'");
    offsets_.resize(lexica_.size());
    for (std::size_t i = 0; i < lexica_.size(); ++i) {
        offsets_[i] = total_dim_;
        total_dim_ += lexica_[i].dim;
    }
}

std::size_t LexiconStack::column(const std::string& lexicon_name,
                                 const std::string& category) const {
    for (std::size_t i = 0; i < lexica_.size(); ++i) {
        if (lexica_[i].name != lexicon_name) continue;
        const auto& cats = lexica_[i].category_names;
        auto it = std::find(cats.begin(), cats.end(), category);
        if (it == cats.end())
            throw std::invalid_argument("lexicon '" + lexicon_name + "' has no category '" +
                                        category + "'");
        return offsets_[i] + static_cast<std::size_t>(it - cats.begin());
    }
    throw std::invalid_argument("no lexicon named '" + lexicon_name + "' in stack");
}

bool LexiconStack::has_column(const std::string& lexicon_name,
                              const std::string& category) const {
    for (std::size_t i = 0; i < lexica_.size(); ++i) {
        if (lexica_[i].name != lexicon_name) continue;
        const auto& cats = lexica_[i].category_names;
        return std::find(cats.begin(), cats.end(), category) != cats.end();
    }
    return false;
}

std::vector<double> LexiconStack::context_vector(const std::string& word) const {
    std::vector<double> out(total_dim_, 0.0);
    for (std::size_t i = 0; i < lexica_.size(); ++i) {
        auto it = lexica_[i].entries.find(word);
        if (it == lexica_[i].entries.end()) continue;
        std::copy(it->second.begin(), it->second.end(), out.begin() + offsets_[i]);
    }
    return out;
}

void LexiconStack::min_max_scale() {
    for (Lexicon& lex : lexica_) {
        std::vector<double> lo(lex.dim, std::numeric_limits<double>::infinity());
        std::vector<double> hi(lex.dim, -std::numeric_limits<double>::infinity());
        for (const auto& [word, values] : lex.entries) {
            for (std::size_t j = 0; j < lex.dim; ++j) {
                lo[j] = std::min(lo[j], values[j]);
                hi[j] = std::max(hi[j], values[j]);
            }
        }
        for (auto& [word, values] : lex.entries) {
            for (std::size_t j = 0; j < lex.dim; ++j) {
                double span = hi[j] - lo[j];
                if (span > 0.0) values[j] = -1.0 + 2.0 * (values[j] - lo[j]) / span;
            }
        }
    }
}

LexiconStack load_stack(const std::vector<std::string>& paths, bool scale) {
    std::vector<Lexicon> lexica;
    lexica.reserve(paths.size());
    for (const std::string& p : paths) lexica.push_back(load_lexicon(p));
    LexiconStack stack(std::move(lexica));
    if (scale) stack.min_max_scale();
    return stack;
}

CoverageReport coverage(const LexiconStack& stack, const corpus::Vocabulary& vocab) {
    CoverageReport report;
    report.per_lexicon.assign(stack.count(), 0);
    std::size_t non_special = 0;
    for (std::size_t idx = 0; idx < vocab.size(); ++idx) {
        if (idx == corpus::Vocabulary::kPad || idx == corpus::Vocabulary::kUnk) continue;
        ++non_special;
        const std::string& word = vocab.token(idx);
        bool nonzero = false;
        for (std::size_t i = 0; i < stack.count(); ++i) {
            const Lexicon& lex = stack.lexicon(i);
            auto it = lex.entries.find(word);
            if (it == lex.entries.end()) continue;
            ++report.per_lexicon[i];
            for (double v : it->second)
                if (v != 0.0) nonzero = true;
        }
        if (nonzero) ++report.covered_count;
    }
    report.fraction = non_special == 0
                          ? 0.0
                          : static_cast<double>(report.covered_count) /
                                static_cast<double>(non_special);
    return report;
}

}  // namespace han::lex
