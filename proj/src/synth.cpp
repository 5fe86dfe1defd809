#include "han/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "han/rng.hpp"

namespace han::synth {

using corpus::Label;
using corpus::Session;
using corpus::Speaker;
using corpus::Turn;
using lex::Lexicon;
using nlohmann::json;

namespace {

const std::vector<std::string> kEmolexCats = {
    "anger",         "anticipation",   "disgust",           "fear",
    "joy",           "negative",       "positive",          "sadness",
    "surprise",      "trust",          "valence",           "arousal",
    "dominance",     "anger_intensity", "fear_intensity",   "joy_intensity",
    "sadness_intensity", "positive_intensity", "negative_intensity"};

const std::vector<std::string> kLiwcCats = {
    "function", "pronoun", "ppron",   "i",        "we",      "you",
    "shehe",    "they",    "ipron",   "article",  "verb",    "auxverb",
    "past",     "present", "future",  "adverb",   "preps",   "conj",
    "negate",   "quant",   "number",  "swear",    "social",  "family",
    "friend",   "humans",  "affect",  "posemo",   "negemo",  "anx",
    "anger",    "sad",     "cogmech", "insight",  "cause",   "discrep",
    "tentat",   "certain", "inhib",   "incl",     "excl",    "percept",
    "see",      "hear",    "feel",    "bio",      "body",    "health",
    "sexual",   "ingest",  "relativ", "motion",   "space",   "time",
    "work",     "achieve", "leisure", "home",     "money",   "relig",
    "death",    "assent",  "nonfl",   "filler",   "period",  "comma",
    "colon",    "semic",   "qmark",   "exclam",   "dash",    "quote",
    "apostro"};

const std::map<std::string, std::vector<std::string>> kPools = {
    {"positive_sentiment",
     {"happy", "glad", "hopeful", "cheerful", "enjoyed", "grateful"}},
    {"negative_sentiment",
     {"awful", "terrible", "horrible", "miserable", "hopeless", "worthless"}},
    {"sadness", {"sad", "crying", "tearful", "grieving", "lonely", "heartbroken"}},
    {"anxiety", {"worried", "anxious", "nervous", "panicked", "tense", "afraid"}}};

void put(Lexicon& lx, const std::string& word,
         const std::vector<std::pair<std::string, double>>& marks) {
    std::vector<double> row(lx.dim, 0.0);
    for (const auto& [cat, val] : marks) {
        auto it = std::find(lx.category_names.begin(), lx.category_names.end(), cat);
        if (it == lx.category_names.end())
            throw std::logic_error("toy lexicon '" + lx.name + "' missing category '" +
                                   cat + "'");
        row[static_cast<std::size_t>(it - lx.category_names.begin())] = val;
    }
    lx.entries[word] = std::move(row);
}

void mark_pool(std::vector<Lexicon>& lexica, const std::string& category) {
    auto& afinn = lexica[0];
    auto& semeval = lexica[1];
    auto& bingliu = lexica[2];
    auto& mpqa = lexica[3];
    auto& emolex = lexica[4];
    auto& liwc = lexica[5];
    for (const auto& w : kPools.at(category)) {
        if (category == "positive_sentiment") {
            put(afinn, w, {{"score", 3.0}});
            put(semeval, w, {{"sentiment", 0.8}});
            put(bingliu, w, {{"polarity", 1.0}});
            put(mpqa, w, {{"positive", 1.0}, {"strong_subj", 1.0}});
            put(emolex, w,
                {{"joy", 1.0}, {"positive", 1.0}, {"valence", 0.9},
                 {"joy_intensity", 0.7}, {"positive_intensity", 0.8}});
            put(liwc, w, {{"affect", 1.0}, {"posemo", 1.0}});
        } else if (category == "negative_sentiment") {
            put(afinn, w, {{"score", -3.0}});
            put(semeval, w, {{"sentiment", -0.8}});
            put(bingliu, w, {{"polarity", -1.0}});
            put(mpqa, w, {{"negative", 1.0}, {"strong_subj", 1.0}});
            put(emolex, w,
                {{"disgust", 1.0}, {"negative", 1.0}, {"valence", 0.2},
                 {"negative_intensity", 0.8}});
            put(liwc, w, {{"affect", 1.0}, {"negemo", 1.0}});
        } else if (category == "sadness") {
            put(semeval, w, {{"sentiment", -0.6}});
            put(mpqa, w, {{"negative", 1.0}});
            put(emolex, w,
                {{"sadness", 1.0}, {"negative", 1.0}, {"valence", 0.15},
                 {"sadness_intensity", 0.8}});
            put(liwc, w, {{"affect", 1.0}, {"sad", 1.0}});
        } else {  // anxiety
            put(semeval, w, {{"sentiment", -0.5}});
            put(mpqa, w, {{"negative", 1.0}, {"strong_subj", 1.0}});
            put(emolex, w,
                {{"fear", 1.0}, {"negative", 1.0}, {"arousal", 0.8},
                 {"fear_intensity", 0.7}});
            put(liwc, w, {{"affect", 1.0}, {"anx", 1.0}});
        }
    }
}

std::string padded(const char* prefix, std::size_t i, int width) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
    return buf;
}

std::size_t draw_range(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + rng.index(hi - lo + 1);
}

}  // namespace

SynthSpec::SynthSpec() {
    rates["negative_sentiment"] = {0.20, 0.04};
    rates["anxiety"] = {0.15, 0.03};
    rates["sadness"] = {0.10, 0.02};
    rates["positive_sentiment"] = {0.05, 0.10};
}

void SynthSpec::validate() const {
    if (sessions_per_class == 0)
        throw std::runtime_error("synth: sessions_per_class must be >= 1");
    if (min_turns == 0 || min_turns > max_turns)
        throw std::runtime_error("synth: turns range is empty");
    if (min_tokens == 0 || min_tokens > max_tokens)
        throw std::runtime_error("synth: tokens range is empty");
    if (base_vocab == 0) throw std::runtime_error("synth: base_vocab must be >= 1");
    double sums[2] = {0, 0};
    for (const auto& [cat, rp] : rates) {
        if (!kPools.count(cat))
            throw std::runtime_error("synth: unknown category '" + cat + "'");
        if (!(rp.depressed >= 0 && rp.depressed <= 1) ||
            !(rp.not_depressed >= 0 && rp.not_depressed <= 1))
            throw std::runtime_error("synth: rate for '" + cat + "' outside [0, 1]");
        sums[0] += rp.depressed;
        sums[1] += rp.not_depressed;
    }
    for (int c = 0; c < 2; ++c)
        if (sums[c] > 1.0)
            throw std::runtime_error("synth: class rates sum to " +
                                     std::to_string(sums[c]) + ", must be <= 1");
}

bool SynthSpec::classes_identical() const {
    for (const auto& [cat, rp] : rates)
        if (rp.depressed != rp.not_depressed) return false;
    return true;
}

const std::map<std::string, std::vector<std::string>>& affective_pools() {
    return kPools;
}

std::vector<Lexicon> toy_lexica() {
    std::vector<Lexicon> lexica(6);
    lexica[0].name = "afinn";
    lexica[0].dim = 1;
    lexica[0].category_names = {"score"};
    lexica[1].name = "semeval15";
    lexica[1].dim = 1;
    lexica[1].category_names = {"sentiment"};
    lexica[2].name = "bingliu";
    lexica[2].dim = 1;
    lexica[2].category_names = {"polarity"};
    lexica[3].name = "mpqa";
    lexica[3].dim = 4;
    lexica[3].category_names = {"positive", "negative", "neutral", "strong_subj"};
    lexica[4].name = "emolex";
    lexica[4].dim = 19;
    lexica[4].category_names = kEmolexCats;
    lexica[5].name = "liwc";
    lexica[5].dim = 73;
    lexica[5].category_names = kLiwcCats;
    for (const auto& [cat, pool] : kPools) mark_pool(lexica, cat);
    return lexica;
}

SynthResult generate(const SynthSpec& spec) {
    spec.validate();

    SynthResult result;
    result.lexica = toy_lexica();
    if (spec.warn_if_identical && spec.classes_identical())
        result.warnings.push_back(
            "synth: class rates are identical; generated classes are not separable");

    Rng master(spec.seed);
    std::size_t n = spec.sessions_per_class;
    result.sessions.reserve(2 * n);

    for (std::size_t cls = 0; cls < 2; ++cls) {
        Label label = cls == 0 ? Label::Depressed : Label::NotDepressed;
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng = master.fork(cls * n + i);
            Session s;
            s.id = padded(cls == 0 ? "synth_dep_" : "synth_ctl_", i, 3);
            s.label = label;

            std::size_t n_turns = draw_range(rng, spec.min_turns, spec.max_turns);
            for (std::size_t k = 0; k < n_turns; ++k) {
                Turn turn;
                turn.speaker = k % 2 == 0 ? Speaker::Therapist : Speaker::Client;
                std::size_t n_tok = draw_range(rng, spec.min_tokens, spec.max_tokens);
                for (std::size_t t = 0; t < n_tok; ++t) {
                    if (turn.speaker == Speaker::Client) {
                        double u = rng.uniform();
                        double cum = 0.0;
                        const std::vector<std::string>* hit = nullptr;
                        for (const auto& [cat, rp] : spec.rates) {
                            cum += label == Label::Depressed ? rp.depressed
                                                             : rp.not_depressed;
                            if (u < cum) {
                                hit = &kPools.at(cat);
                                break;
                            }
                        }
                        if (hit) {
                            turn.tokens.push_back((*hit)[rng.index(hit->size())]);
                            continue;
                        }
                    }
                    turn.tokens.push_back(padded("w", rng.index(spec.base_vocab), 3));
                }
                s.turns.push_back(std::move(turn));
            }

            std::vector<std::string> summary;
            std::size_t n_sum = 3 + rng.index(3);
            for (std::size_t t = 0; t < n_sum; ++t)
                summary.push_back(padded("t", rng.index(20), 2));
            s.summary = std::move(summary);

            result.sessions.push_back(std::move(s));
        }
    }
    return result;
}

std::vector<Session> toy_corpus() {
    auto mk_turn = [](Speaker sp, std::initializer_list<const char*> toks) {
        Turn t;
        t.speaker = sp;
        for (const char* w : toks) t.tokens.push_back(w);
        return t;
    };
    std::vector<Session> out(3);

    out[0].id = "toy_dep_0";
    out[0].label = Label::Depressed;
    out[0].turns = {
        mk_turn(Speaker::Therapist, {"w001", "w002", "w003", "w004"}),
        mk_turn(Speaker::Client,
                {"awful", "w005", "worried", "w006", "hopeless", "w007", "w008",
                 "crying", "w009", "tense"}),
        mk_turn(Speaker::Therapist, {"w007", "w002"}),
        mk_turn(Speaker::Client,
                {"sad", "crying", "w008", "terrible", "w010", "w011", "worried",
                 "w012", "miserable"}),
    };
    out[0].summary = std::vector<std::string>{"t01", "t02", "t03"};

    out[1].id = "toy_dep_1";
    out[1].label = Label::Depressed;
    out[1].turns = {
        mk_turn(Speaker::Therapist, {"w003", "w009"}),
        mk_turn(Speaker::Client,
                {"anxious", "w010", "miserable", "lonely", "w013", "hopeless",
                 "w014", "grieving"}),
        mk_turn(Speaker::Client,
                {"w011", "worthless", "tense", "w015", "afraid", "w016", "sad",
                 "w017", "w018", "heartbroken"}),
    };
    out[1].summary = std::vector<std::string>{"t04", "t01", "t05", "t06"};

    out[2].id = "toy_ctl_0";
    out[2].label = Label::NotDepressed;
    out[2].turns = {
        mk_turn(Speaker::Therapist, {"w001", "w012"}),
        mk_turn(Speaker::Client,
                {"happy", "w013", "w005", "grateful", "w019", "hopeful", "w020",
                 "glad", "w021"}),
        mk_turn(Speaker::Therapist, {"w014"}),
        mk_turn(Speaker::Client,
                {"w015", "cheerful", "w016", "w017", "enjoyed", "w022", "happy",
                 "w023", "grateful", "w024"}),
    };
    out[2].summary = std::vector<std::string>{"t07", "t08", "t02"};

    return out;
}

std::string lexicon_tsv(const Lexicon& lx) {
    std::ostringstream out;
    out << '#' << lx.name << '\t' << lx.dim;
    for (const auto& cat : lx.category_names) out << '\t' << cat;
    out << '\n';
    std::vector<std::string> words;
    words.reserve(lx.entries.size());
    for (const auto& [w, _] : lx.entries) words.push_back(w);
    std::sort(words.begin(), words.end());
    char buf[64];
    for (const auto& w : words) {
        out << w;
        for (double v : lx.entries.at(w)) {
            std::snprintf(buf, sizeof buf, "%g", v);
            out << '\t' << buf;
        }
        out << '\n';
    }
    return out.str();
}

json spec_json(const SynthSpec& spec) {
    json j;
    j["sessions_per_class"] = spec.sessions_per_class;
    j["turns"] = {spec.min_turns, spec.max_turns};
    j["tokens"] = {spec.min_tokens, spec.max_tokens};
    j["base_vocab"] = spec.base_vocab;
    j["seed"] = spec.seed;
    json r = json::object();
    for (const auto& [cat, rp] : spec.rates)
        r[cat] = {{"depressed", rp.depressed}, {"not_depressed", rp.not_depressed}};
    j["rates"] = r;
    return j;
}

SynthSpec spec_from_json(const json& j) {
    SynthSpec spec;
    if (!j.is_object()) throw std::runtime_error("synth spec: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        const auto& v = it.value();
        try {
            if (key == "sessions_per_class") {
                spec.sessions_per_class = v.get<std::size_t>();
            } else if (key == "turns") {
                spec.min_turns = v.at(0).get<std::size_t>();
                spec.max_turns = v.at(1).get<std::size_t>();
            } else if (key == "tokens") {
                spec.min_tokens = v.at(0).get<std::size_t>();
                spec.max_tokens = v.at(1).get<std::size_t>();
            } else if (key == "base_vocab") {
                spec.base_vocab = v.get<std::size_t>();
            } else if (key == "seed") {
                spec.seed = v.get<std::uint64_t>();
            } else if (key == "rates") {
                spec.rates.clear();
                for (auto rit = v.begin(); rit != v.end(); ++rit) {
                    RatePair rp;
                    rp.depressed = rit.value().at("depressed").get<double>();
                    rp.not_depressed = rit.value().at("not_depressed").get<double>();
                    spec.rates[rit.key()] = rp;
                }
            } else {
                throw std::runtime_error("synth spec: unknown field '" + key + "'");
            }
        } catch (const json::exception&) {
            throw std::runtime_error("synth spec: bad value for field '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

}  // namespace han::synth
