#include "han/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace han::corpus {

using nlohmann::json;

const char* speaker_name(Speaker s) {
    return s == Speaker::Therapist ? "therapist" : "client";
}

const char* label_name(Label l) {
    return l == Label::Depressed ? "depressed" : "not_depressed";
}

const char* view_name(View v) {
    switch (v) {
        case View::Client: return "client";
        case View::Therapist: return "therapist";
        default: return "both";
    }
}

std::optional<Speaker> speaker_from_name(const std::string& s) {
    if (s == "therapist") return Speaker::Therapist;
    if (s == "client") return Speaker::Client;
    return std::nullopt;
}

std::optional<Label> label_from_name(const std::string& s) {
    if (s == "depressed") return Label::Depressed;
    if (s == "not_depressed") return Label::NotDepressed;
    return std::nullopt;
}

std::optional<View> view_from_name(const std::string& s) {
    if (s == "client") return View::Client;
    if (s == "therapist") return View::Therapist;
    if (s == "both") return View::Both;
    return std::nullopt;
}

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

// Drop a leading `NAME:` tag where NAME is uppercase letters possibly with
// spaces, dots or apostrophes ("MR. SMITH:").
std::size_t speaker_prefix_end(const std::string& line) {
    if (line.empty() || !is_upper(line[0])) return 0;
    std::size_t i = 1;
    while (i < line.size() &&
           (is_upper(line[i]) || line[i] == ' ' || line[i] == '.' || line[i] == '\''))
        ++i;
    if (i < line.size() && line[i] == ':') return i + 1;
    return 0;
}

}  // namespace

std::string clean_transcript(const std::string& raw) {
    std::string no_tags;
    no_tags.reserve(raw.size());
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t eol = raw.find('\n', pos);
        std::string line = raw.substr(pos, eol == std::string::npos ? std::string::npos
                                                                    : eol - pos);
        line.erase(0, speaker_prefix_end(line));
        no_tags += line;
        no_tags += '\n';
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }

    // remove [] and () annotation spans; unterminated spans run to the end
    std::string no_spans;
    no_spans.reserve(no_tags.size());
    int square = 0, paren = 0;
    for (char c : no_tags) {
        if (c == '[') { ++square; continue; }
        if (c == ']') { if (square > 0) --square; continue; }
        if (c == '(') { ++paren; continue; }
        if (c == ')') { if (paren > 0) --paren; continue; }
        if (square == 0 && paren == 0) no_spans += c;
    }

    std::string out;
    out.reserve(no_spans.size());
    bool in_space = true;  // leading whitespace dropped
    for (char c : no_spans) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out += ' ';
            out += c;
            in_space = false;
        }
    }
    return out;
}

namespace {

// letters/digits and any non-ASCII byte count as word characters
bool word_char(unsigned char c) {
    return std::isalnum(c) || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) c = static_cast<unsigned char>(std::tolower(c));
        if (std::isspace(c)) {
            flush();
        } else if (word_char(c)) {
            cur += static_cast<char>(c);
        } else if (c == '\'' && i > 0 && i + 1 < text.size() &&
                   word_char(static_cast<unsigned char>(text[i - 1])) &&
                   word_char(static_cast<unsigned char>(text[i + 1]))) {
            cur += '\'';  // word-internal apostrophe
        } else {
            flush();
            tokens.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    flush();
    return tokens;
}

namespace {

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("sessions line " + std::to_string(line_no) + ": " + what);
}

Session parse_session_object(const json& j, std::size_t line_no, const ParseOptions& opts) {
    Session s;
    if (!j.is_object()) line_error(line_no, "expected a JSON object");
    if (!j.contains("id") || !j.at("id").is_string())
        line_error(line_no, "missing or non-string id");
    s.id = j.at("id").get<std::string>();

    if (j.contains("label") && !j.at("label").is_null()) {
        if (!j.at("label").is_string()) line_error(line_no, "label must be a string or null");
        auto parsed = label_from_name(j.at("label").get<std::string>());
        if (!parsed)
            line_error(line_no, "unknown label '" + j.at("label").get<std::string>() + "'");
        s.label = parsed;
    }
    if (j.contains("phq8") && !j.at("phq8").is_null()) {
        if (!j.at("phq8").is_number_integer())
            line_error(line_no, "phq8 must be an integer or null");
        s.phq8 = j.at("phq8").get<int>();
        if (!s.label)
            s.label = *s.phq8 >= opts.phq8_threshold ? Label::Depressed
                                                     : Label::NotDepressed;
    }
    if (opts.require_labels && !s.label)
        line_error(line_no, "session '" + s.id + "' has no label");

    if (j.contains("summary") && !j.at("summary").is_null()) {
        if (!j.at("summary").is_string())
            line_error(line_no, "summary must be a string or null");
        auto toks = tokenize(clean_transcript(j.at("summary").get<std::string>()));
        if (!toks.empty()) s.summary = std::move(toks);
    }

    if (!j.contains("turns") || !j.at("turns").is_array())
        line_error(line_no, "missing turns array");
    for (const json& jt : j.at("turns")) {
        if (!jt.is_object() || !jt.contains("speaker") || !jt.contains("text") ||
            !jt.at("speaker").is_string() || !jt.at("text").is_string())
            line_error(line_no, "turn must be {\"speaker\": str, \"text\": str}");
        auto sp = speaker_from_name(jt.at("speaker").get<std::string>());
        if (!sp)
            line_error(line_no,
                       "unknown speaker '" + jt.at("speaker").get<std::string>() + "'");
        auto toks = tokenize(clean_transcript(jt.at("text").get<std::string>()));
        if (toks.empty()) continue;  // annotation-only turns vanish
        s.turns.push_back({*sp, std::move(toks)});
    }
    if (s.turns.empty())
        line_error(line_no, "session '" + s.id + "' has no non-empty turns");
    return s;
}

}  // namespace

std::vector<Session> parse_session_jsonl(const std::string& bytes,
                                         const ParseOptions& opts) {
    std::vector<Session> out;
    std::size_t pos = 0, line_no = 0;
    while (pos <= bytes.size()) {
        std::size_t eol = bytes.find('\n', pos);
        std::string line = bytes.substr(pos, eol == std::string::npos ? std::string::npos
                                                                      : eol - pos);
        ++line_no;
        bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
        if (!blank) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                line_error(line_no, std::string("malformed JSON: ") + e.what());
            }
            out.push_back(parse_session_object(j, line_no, opts));
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return out;
}

std::vector<Session> load_sessions(const std::string& path, const ParseOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open sessions file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_session_jsonl(buf.str(), opts);
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace

std::string session_to_json(const Session& s) {
    json j;
    j["id"] = s.id;
    j["label"] = s.label ? json(label_name(*s.label)) : json(nullptr);
    j["phq8"] = s.phq8 ? json(*s.phq8) : json(nullptr);
    j["summary"] = s.summary ? json(join_tokens(*s.summary)) : json(nullptr);
    json turns = json::array();
    for (const Turn& t : s.turns) {
        json jt;
        jt["speaker"] = speaker_name(t.speaker);
        jt["text"] = join_tokens(t.tokens);
        turns.push_back(std::move(jt));
    }
    j["turns"] = std::move(turns);
    return j.dump();
}

std::string sessions_to_jsonl(const std::vector<Session>& sessions) {
    std::string out;
    for (const Session& s : sessions) {
        out += session_to_json(s);
        out += '\n';
    }
    return out;
}

void write_sessions_jsonl(const std::string& path, const std::vector<Session>& sessions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write sessions file: " + path);
    out << sessions_to_jsonl(sessions);
}

Session select_view(const Session& s, View view) {
    if (view == View::Both) return s;
    Session out;
    out.id = s.id;
    out.summary = s.summary;
    out.label = s.label;
    out.phq8 = s.phq8;
    Speaker keep = view == View::Client ? Speaker::Client : Speaker::Therapist;
    for (const Turn& t : s.turns)
        if (t.speaker == keep) out.turns.push_back(t);
    if (out.turns.empty())
        throw std::runtime_error("empty view: session '" + s.id + "' has no " +
                                 std::string(view_name(view)) + " turns");
    return out;
}

std::vector<Session> select_view(const std::vector<Session>& sessions, View view) {
    std::vector<Session> out;
    out.reserve(sessions.size());
    for (const Session& s : sessions) out.push_back(select_view(s, view));
    return out;
}

Vocabulary::Vocabulary() {
    tokens_ = {"<pad>", "<unk>"};
    index_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

Vocabulary Vocabulary::build(const std::vector<Session>& sessions,
                             std::size_t min_count) {
    if (sessions.empty()) throw std::invalid_argument("vocabulary: empty corpus");
    if (min_count < 1) throw std::invalid_argument("vocabulary: min_count must be >= 1");

    std::unordered_map<std::string, std::size_t> freq;
    for (const Session& s : sessions) {
        for (const Turn& t : s.turns)
            for (const std::string& tok : t.tokens) ++freq[tok];
        if (s.summary)
            for (const std::string& tok : *s.summary) ++freq[tok];
    }

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : freq)
        if (n >= min_count) kept.emplace_back(tok, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    for (auto& [tok, n] : kept) {
        v.index_.emplace(tok, v.tokens_.size());
        v.tokens_.push_back(tok);
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& non_special) {
    Vocabulary v;
    for (const std::string& tok : non_special) {
        if (v.index_.count(tok))
            throw std::invalid_argument("vocabulary: duplicate token '" + tok + "'");
        v.index_.emplace(tok, v.tokens_.size());
        v.tokens_.push_back(tok);
    }
    return v;
}

std::size_t Vocabulary::index(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return index_.count(token) != 0;
}

const std::string& Vocabulary::token(std::size_t idx) const {
    if (idx >= tokens_.size()) throw std::out_of_range("vocabulary index out of range");
    return tokens_[idx];
}

namespace {

EmbeddingTable fresh_table(const Vocabulary& vocab, std::size_t dim) {
    EmbeddingTable table;
    table.matrix = nn::Tensor({vocab.size(), dim});
    return table;
}

void randomize_row(nn::Tensor& m, std::size_t row, Rng& rng) {
    for (std::size_t j = 0; j < m.cols(); ++j) m.at(row, j) = rng.uniform(-0.05, 0.05);
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               std::size_t dim, Rng& rng) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embeddings file: " + path);

    EmbeddingTable table = fresh_table(vocab, dim);
    std::vector<bool> filled(vocab.size(), false);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        std::size_t idx = vocab.contains(word) ? vocab.index(word) : Vocabulary::kUnk;
        bool wanted = idx > Vocabulary::kUnk;  // specials never take file vectors

        std::vector<double> values;
        double v;
        while (ss >> v) values.push_back(v);
        if (values.size() != dim)
            throw std::runtime_error("embeddings line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(dim) + " values, got " +
                                     std::to_string(values.size()));
        if (wanted && !filled[idx]) {
            for (std::size_t j = 0; j < dim; ++j) table.matrix.at(idx, j) = values[j];
            filled[idx] = true;
            ++table.matched;
        }
    }

    // remaining rows (including the unknown-word row) get small random values
    for (std::size_t i = Vocabulary::kUnk; i < vocab.size(); ++i)
        if (!filled[i]) randomize_row(table.matrix, i, rng);

    std::size_t denom = vocab.size() > 2 ? vocab.size() - 2 : 1;
    table.coverage = static_cast<double>(table.matched) / static_cast<double>(denom);
    return table;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, Rng& rng) {
    EmbeddingTable table = fresh_table(vocab, dim);
    for (std::size_t i = Vocabulary::kUnk; i < vocab.size(); ++i)
        randomize_row(table.matrix, i, rng);
    return table;
}

IndexedSession index_session(const Session& s, const Vocabulary& vocab,
                             const IndexLimits& limits) {
    IndexedSession out;
    out.id = s.id;
    out.label = s.label;
    for (const Turn& t : s.turns) {
        if (out.turns.size() >= limits.max_session_turns) break;
        IndexedTurn it;
        it.speaker = t.speaker;
        std::size_t n = std::min(t.tokens.size(), limits.max_turn_tokens);
        for (std::size_t i = 0; i < n; ++i) {
            it.ids.push_back(vocab.index(t.tokens[i]));
            it.words.push_back(t.tokens[i]);
        }
        out.turns.push_back(std::move(it));
    }
    if (s.summary) {
        std::size_t n = std::min(s.summary->size(), limits.max_turn_tokens);
        for (std::size_t i = 0; i < n; ++i) {
            out.summary_ids.push_back(vocab.index((*s.summary)[i]));
            out.summary_words.push_back((*s.summary)[i]);
        }
        out.has_summary = !out.summary_ids.empty();
    }
    return out;
}

}  // namespace han::corpus
