#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "han/corpus.hpp"
#include "han/rng.hpp"

using namespace han;
using namespace han::corpus;

namespace {

std::string join(const std::vector<std::string>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out += ' ';
        out += toks[i];
    }
    return out;
}

Session make_session(std::string id, std::vector<Turn> turns,
                     std::optional<Label> label = std::nullopt) {
    Session s;
    s.id = std::move(id);
    s.turns = std::move(turns);
    s.label = label;
    return s;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("clean_transcript strips speaker prefixes and annotations") {
    CHECK(clean_transcript("ELLIE: how are you [laughs] today") == "how are you today");
    CHECK(clean_transcript("  no   prefix (sighs) here ") == "no prefix here");
    CHECK(clean_transcript("THERAPIST: [inaudible]") == "");
    // lowercase word + colon at line start is content, not a speaker tag
    CHECK(clean_transcript("note: keep this") == "note: keep this");
}

TEST_CASE("tokenize hand traces") {
    CHECK(tokenize("I feel sad.") == std::vector<std::string>{"i", "feel", "sad", "."});
    CHECK(tokenize("OK") == std::vector<std::string>{"ok"});
    CHECK(tokenize("don't!") == std::vector<std::string>{"don't", "!"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("well, you know...") ==
          std::vector<std::string>{"well", ",", "you", "know", ".", ".", "."});
    // leading/trailing apostrophes detach; internal ones stay
    CHECK(tokenize("'tis isn't") == std::vector<std::string>{"'", "tis", "isn't"});
}

TEST_CASE("tokenize is idempotent on its own output") {
    std::vector<std::string> texts{"I feel sad.", "don't! stop...", "He said: \"fine\""};
    for (const auto& t : texts) {
        auto once = tokenize(t);
        auto twice = tokenize(join(once));
        CHECK(once == twice);
    }
}

TEST_CASE("parse_session_jsonl keeps file order and drops empty turns") {
    std::string bytes =
        R"({"id":"a","label":"depressed","phq8":null,"summary":null,"turns":[{"speaker":"client","text":"I feel sad."}]})"
        "\n"
        R"({"id":"b","label":"not_depressed","phq8":null,"summary":"short visit","turns":[{"speaker":"therapist","text":"hello"},{"speaker":"client","text":"[sighs]"},{"speaker":"client","text":"ok"}]})"
        "\n";
    auto sessions = parse_session_jsonl(bytes);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].id == "a");
    CHECK(sessions[1].id == "b");
    CHECK(sessions[0].label == Label::Depressed);
    // "[sighs]" cleans to nothing, so session b keeps 2 of its 3 turns
    REQUIRE(sessions[1].turns.size() == 2);
    CHECK(sessions[1].turns[0].speaker == Speaker::Therapist);
    CHECK(sessions[1].turns[1].tokens == std::vector<std::string>{"ok"});
    REQUIRE(sessions[1].summary.has_value());
    CHECK(*sessions[1].summary == std::vector<std::string>{"short", "visit"});
}

TEST_CASE("parse_session_jsonl rejects bad records with line numbers") {
    std::string bad_speaker =
        R"({"id":"a","label":null,"phq8":null,"summary":null,"turns":[{"speaker":"X","text":"hi"}]})"
        "\n";
    CHECK_THROWS_WITH_AS(parse_session_jsonl(bad_speaker),
                         doctest::Contains("line 1"), std::runtime_error);

    std::string malformed = "{\"id\":\"a\"\n";
    CHECK_THROWS_WITH_AS(parse_session_jsonl(malformed),
                         doctest::Contains("line 1"), std::runtime_error);

    std::string ok_line =
        R"({"id":"a","label":null,"phq8":null,"summary":null,"turns":[{"speaker":"client","text":"hi"}]})";
    std::string second_bad = ok_line + "\n" + "not json\n";
    CHECK_THROWS_WITH_AS(parse_session_jsonl(second_bad),
                         doctest::Contains("line 2"), std::runtime_error);

    ParseOptions req;
    req.require_labels = true;
    CHECK_THROWS_WITH_AS(parse_session_jsonl(ok_line + "\n", req),
                         doctest::Contains("no label"), std::runtime_error);
}

TEST_CASE("phq8 scores binarize at the configured threshold") {
    auto mk = [](int score) {
        return "{\"id\":\"s\",\"label\":null,\"phq8\":" + std::to_string(score) +
               ",\"summary\":null,\"turns\":[{\"speaker\":\"client\",\"text\":\"hi\"}]}\n";
    };
    CHECK(parse_session_jsonl(mk(10))[0].label == Label::Depressed);
    CHECK(parse_session_jsonl(mk(9))[0].label == Label::NotDepressed);
    ParseOptions strict;
    strict.phq8_threshold = 5;
    CHECK(parse_session_jsonl(mk(9), strict)[0].label == Label::Depressed);
    // explicit label wins over the score
    std::string both =
        R"({"id":"s","label":"not_depressed","phq8":24,"summary":null,"turns":[{"speaker":"client","text":"hi"}]})"
        "\n";
    CHECK(parse_session_jsonl(both)[0].label == Label::NotDepressed);
}

TEST_CASE("session json round-trip is lossless") {
    std::string bytes =
        R"({"id":"a","label":"depressed","phq8":12,"summary":"hard week at work","turns":[{"speaker":"therapist","text":"how are you?"},{"speaker":"client","text":"I don't know."}]})"
        "\n"
        R"({"id":"b","label":null,"phq8":null,"summary":null,"turns":[{"speaker":"client","text":"fine"}]})"
        "\n";
    auto first = parse_session_jsonl(bytes);
    auto second = parse_session_jsonl(sessions_to_jsonl(first));
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].id == second[i].id);
        CHECK(first[i].label == second[i].label);
        CHECK(first[i].phq8 == second[i].phq8);
        CHECK(first[i].summary == second[i].summary);
        REQUIRE(first[i].turns.size() == second[i].turns.size());
        for (std::size_t k = 0; k < first[i].turns.size(); ++k) {
            CHECK(first[i].turns[k].speaker == second[i].turns[k].speaker);
            CHECK(first[i].turns[k].tokens == second[i].turns[k].tokens);
        }
    }
}

TEST_CASE("select_view filters by speaker and keeps metadata") {
    Session s = make_session(
        "v",
        {{Speaker::Therapist, {"hi"}},
         {Speaker::Client, {"hello"}},
         {Speaker::Client, {"again"}},
         {Speaker::Therapist, {"bye"}}},
        Label::Depressed);
    s.summary = std::vector<std::string>{"greeting"};

    Session c = select_view(s, View::Client);
    REQUIRE(c.turns.size() == 2);
    CHECK(c.turns[0].tokens == std::vector<std::string>{"hello"});
    CHECK(c.turns[1].tokens == std::vector<std::string>{"again"});
    CHECK(c.label == Label::Depressed);
    CHECK(c.summary == s.summary);
    CHECK(c.id == "v");

    Session b = select_view(s, View::Both);
    CHECK(b.turns.size() == s.turns.size());
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
        CHECK(b.turns[i].speaker == s.turns[i].speaker);
        CHECK(b.turns[i].tokens == s.turns[i].tokens);
    }

    // client + therapist views partition the turns
    Session t = select_view(s, View::Therapist);
    CHECK(c.turns.size() + t.turns.size() == s.turns.size());

    Session only_t = make_session("t", {{Speaker::Therapist, {"hi"}}});
    CHECK_THROWS_WITH_AS(select_view(only_t, View::Client),
                         doctest::Contains("empty view"), std::runtime_error);
}

TEST_CASE("vocabulary orders by frequency then spelling") {
    Session s = make_session("v", {{Speaker::Client, {"a", "a", "b"}}});
    Vocabulary v = Vocabulary::build({s}, 2);
    REQUIRE(v.size() == 3);  // pad, unk, "a"
    CHECK(v.token(Vocabulary::kPad) == "<pad>");
    CHECK(v.token(Vocabulary::kUnk) == "<unk>");
    CHECK(v.index("a") == 2);
    CHECK(v.index("b") == Vocabulary::kUnk);

    Session tie = make_session("t", {{Speaker::Client, {"zeta", "beta", "beta", "zeta"}}});
    Vocabulary vt = Vocabulary::build({tie});
    CHECK(vt.token(2) == "beta");  // equal counts break lexicographically
    CHECK(vt.token(3) == "zeta");

    // summaries feed the counts too
    Session sm = make_session("s", {{Speaker::Client, {"x"}}});
    sm.summary = std::vector<std::string>{"summ", "summ"};
    Vocabulary vs = Vocabulary::build({sm});
    CHECK(vs.contains("summ"));
    CHECK(vs.index("summ") == 2);  // freq 2 beats freq 1

    CHECK_THROWS(Vocabulary::build({}));
}

TEST_CASE("vocabulary index round-trips and rebuilds from token list") {
    Session s = make_session(
        "r", {{Speaker::Client, {"one", "two", "two", "three", "three", "three"}}});
    Vocabulary v = Vocabulary::build({s});
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index(v.token(i)) == i);

    std::vector<std::string> non_special(v.tokens().begin() + 2, v.tokens().end());
    Vocabulary rebuilt = Vocabulary::from_tokens(non_special);
    CHECK(rebuilt.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(rebuilt.token(i) == v.token(i));
}

TEST_CASE("vocabulary build is deterministic") {
    std::vector<Session> corpus{
        make_session("a", {{Speaker::Client, {"m", "n", "n", "q"}}}),
        make_session("b", {{Speaker::Therapist, {"q", "q", "m"}}}),
    };
    Vocabulary v1 = Vocabulary::build(corpus);
    Vocabulary v2 = Vocabulary::build(corpus);
    CHECK(v1.tokens() == v2.tokens());
}

TEST_CASE("embeddings load matched rows and randomize the rest") {
    Session s = make_session("e", {{Speaker::Client, {"cat", "dog", "newt"}}});
    Vocabulary v = Vocabulary::build({s});

    std::string path = "test_embed_tmp.txt";
    {
        std::ofstream out(path);
        out << "cat 1.0 2.0 3.0\n";
        out << "dog -0.5 0.25 0.125\n";
        out << "unrelated 9 9 9\n";
    }
    Rng rng(5);
    EmbeddingTable table = load_embeddings(path, v, 3, rng);
    std::remove(path.c_str());

    CHECK(table.dim() == 3);
    CHECK(table.matched == 2);
    CHECK(table.coverage == doctest::Approx(2.0 / 3.0));
    std::size_t cat = v.index("cat");
    CHECK(table.matrix.at(cat, 0) == 1.0);
    CHECK(table.matrix.at(cat, 1) == 2.0);
    CHECK(table.matrix.at(cat, 2) == 3.0);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(table.matrix.at(Vocabulary::kPad, j) == 0.0);
        double r = table.matrix.at(v.index("newt"), j);
        CHECK(r >= -0.05);
        CHECK(r <= 0.05);
    }
}

TEST_CASE("embedding dimension mismatch names the line") {
    Session s = make_session("e", {{Speaker::Client, {"cat"}}});
    Vocabulary v = Vocabulary::build({s});
    std::string path = "test_embed_bad_tmp.txt";
    {
        std::ofstream out(path);
        out << "cat 1.0 2.0 3.0\n";
        out << "dog 1.0\n";
    }
    Rng rng(5);
    CHECK_THROWS_WITH_AS(load_embeddings(path, v, 3, rng), doctest::Contains("line 2"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("index_session truncates and maps unknowns to unk") {
    Session s = make_session("i", {{Speaker::Client, {"a", "a", "b"}},
                                   {Speaker::Therapist, {"a", "zzz"}}});
    s.summary = std::vector<std::string>{"a", "qqq"};
    Vocabulary v = Vocabulary::build({s});

    IndexLimits lim;
    lim.max_turn_tokens = 2;
    lim.max_session_turns = 1;
    IndexedSession ix = index_session(s, v, lim);
    REQUIRE(ix.turns.size() == 1);
    REQUIRE(ix.turns[0].ids.size() == 2);
    CHECK(ix.turns[0].ids[0] == v.index("a"));
    CHECK(ix.turns[0].words == std::vector<std::string>{"a", "a"});

    IndexedSession full = index_session(s, v);
    CHECK(full.turns.size() == 2);
    CHECK(full.has_summary);
    REQUIRE(full.summary_ids.size() == 2);
    CHECK(full.summary_ids[0] == v.index("a"));
    CHECK(full.summary_ids[1] == v.index("qqq"));  // summaries feed the vocabulary

    Vocabulary tiny = Vocabulary::build({make_session("o", {{Speaker::Client, {"a"}}})});
    IndexedSession u = index_session(s, tiny);
    CHECK(u.turns[1].ids[1] == Vocabulary::kUnk);  // zzz unseen
    CHECK(u.summary_ids[1] == Vocabulary::kUnk);
}

}  // TEST_SUITE
