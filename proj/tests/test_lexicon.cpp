#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "han/corpus.hpp"
#include "han/lexicon.hpp"
#include "han/synth.hpp"

using namespace han;
using namespace han::lex;

namespace {

Lexicon make_lexicon(std::string name, std::vector<std::string> cats,
                     std::vector<std::pair<std::string, std::vector<double>>> rows) {
    Lexicon lx;
    lx.name = std::move(name);
    lx.dim = cats.size();
    lx.category_names = std::move(cats);
    for (auto& [w, v] : rows) lx.entries[w] = v;
    return lx;
}

}  // namespace

TEST_SUITE("lexicon") {

TEST_CASE("parse_lexicon reads the tsv format") {
    std::string tsv =
        "#polarity\t1\tscore\n"
        "sad\t-2\n"
        "Happy\t3\n";
    Lexicon lx = parse_lexicon(tsv, "inline");
    CHECK(lx.name == "polarity");
    CHECK(lx.dim == 1);
    CHECK(lx.category_names == std::vector<std::string>{"score"});
    CHECK(lx.entries.size() == 2);
    CHECK(lx.has("sad"));
    CHECK(lx.has("happy"));  // words lowercase on load
    CHECK(lx.entries.at("happy")[0] == 3.0);
}

TEST_CASE("parse_lexicon rejects malformed input with line numbers") {
    // three values under a dim-2 header
    std::string arity =
        "#x\t2\ta\tb\n"
        "word\t1\t2\t3\n";
    CHECK_THROWS_WITH_AS(parse_lexicon(arity, "inline"), doctest::Contains("line 2"),
                         std::runtime_error);

    std::string dup =
        "#x\t1\ta\n"
        "word\t1\n"
        "WORD\t2\n";
    CHECK_THROWS_WITH_AS(parse_lexicon(dup, "inline"), doctest::Contains("duplicate"),
                         std::runtime_error);

    std::string bad_header = "#x\t2\tonly_one_cat\nword\t1\t2\n";
    CHECK_THROWS(parse_lexicon(bad_header, "inline"));

    std::string not_a_number =
        "#x\t1\ta\n"
        "word\tzzz\n";
    CHECK_THROWS_WITH_AS(parse_lexicon(not_a_number, "inline"),
                         doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("stack offsets are cumulative dims") {
    std::vector<Lexicon> six = synth::toy_lexica();
    REQUIRE(six.size() == 6);
    LexiconStack stack(six);
    CHECK(stack.total_dim() == 99);
    CHECK(stack.offsets() == std::vector<std::size_t>{0, 1, 2, 3, 7, 26});

    LexiconStack one({make_lexicon("solo", {"a", "b", "c", "d", "e"}, {})});
    CHECK(one.total_dim() == 5);
    CHECK(one.offsets() == std::vector<std::size_t>{0});

    LexiconStack two({make_lexicon("p", {"a", "b"}, {}), make_lexicon("q", {"x", "y", "z"}, {})});
    CHECK(two.total_dim() == 5);
    CHECK(two.offsets() == std::vector<std::size_t>{0, 2});

    CHECK_THROWS(LexiconStack({make_lexicon("same", {"a"}, {}), make_lexicon("same", {"b"}, {})}));
    CHECK_THROWS(LexiconStack({}));
}

TEST_CASE("context vectors fill segments in stack order") {
    Lexicon a = make_lexicon("a1", {"s"}, {{"only_a", {7.0}}, {"shared", {1.0}}});
    Lexicon b = make_lexicon("b4", {"w", "x", "y", "z"},
                             {{"only_b", {1, 2, 3, 4}}, {"shared", {5, 6, 7, 8}}});
    LexiconStack stack({a, b});
    REQUIRE(stack.total_dim() == 5);

    CHECK(stack.context_vector("only_b") == std::vector<double>{0, 1, 2, 3, 4});
    CHECK(stack.context_vector("only_a") == std::vector<double>{7, 0, 0, 0, 0});
    CHECK(stack.context_vector("shared") == std::vector<double>{1, 5, 6, 7, 8});
    CHECK(stack.context_vector("nowhere") == std::vector<double>(5, 0.0));

    // permuting the stack permutes the segments, contents unchanged
    LexiconStack swapped({b, a});
    CHECK(swapped.context_vector("shared") == std::vector<double>{5, 6, 7, 8, 1});
}

TEST_CASE("column lookup addresses the stacked space") {
    LexiconStack stack(synth::toy_lexica());
    CHECK(stack.column("afinn", "score") == 0);
    std::size_t lc = stack.column("liwc", "posemo");
    CHECK(lc >= 26);
    CHECK(lc < 99);
    CHECK(stack.has_column("liwc", "sad"));
    CHECK(!stack.has_column("liwc", "no_such_cat"));
    CHECK(!stack.has_column("nope", "sad"));
    CHECK_THROWS(stack.column("liwc", "no_such_cat"));

    // every toy-pool word carries a nonzero liwc affect value
    std::size_t affect = stack.column("liwc", "affect");
    for (const auto& [cat, pool] : synth::affective_pools())
        for (const auto& w : pool) CHECK(stack.context_vector(w)[affect] != 0.0);
}

TEST_CASE("zero-valued entry is absence in the vector but presence in coverage") {
    Lexicon z = make_lexicon("z", {"c"}, {{"meh", {0.0}}, {"sad", {-1.0}}});
    LexiconStack stack({z});
    CHECK(stack.context_vector("meh") == std::vector<double>{0.0});
    CHECK(stack.context_vector("gone") == std::vector<double>{0.0});

    corpus::Session s;
    s.id = "c";
    s.turns.push_back({corpus::Speaker::Client, {"meh", "sad", "gone"}});
    corpus::Vocabulary v = corpus::Vocabulary::build({s});

    CoverageReport rep = coverage(stack, v);
    CHECK(rep.covered_count == 1);  // only "sad" has a nonzero vector
    CHECK(rep.fraction == doctest::Approx(1.0 / 3.0));
    REQUIRE(rep.per_lexicon.size() == 1);
    CHECK(rep.per_lexicon[0] == 2);  // "meh" is a real entry even though its vector is zero
}

TEST_CASE("coverage endpoints") {
    Lexicon a = make_lexicon("a", {"c"}, {{"in1", {1.0}}, {"in2", {2.0}}});
    LexiconStack stack({a});

    corpus::Session covered;
    covered.id = "x";
    covered.turns.push_back({corpus::Speaker::Client, {"in1", "in2"}});
    CoverageReport full = coverage(stack, corpus::Vocabulary::build({covered}));
    CHECK(full.fraction == 1.0);
    CHECK(full.covered_count == 2);

    corpus::Session disjoint;
    disjoint.id = "y";
    disjoint.turns.push_back({corpus::Speaker::Client, {"out1", "out2"}});
    CoverageReport none = coverage(stack, corpus::Vocabulary::build({disjoint}));
    CHECK(none.fraction == 0.0);
    CHECK(none.covered_count == 0);
}

TEST_CASE("min_max_scale maps the observed range onto [-1, 1]") {
    Lexicon r = make_lexicon("r", {"c"}, {{"lo", {-5.0}}, {"mid", {0.0}}, {"hi", {5.0}}});
    LexiconStack stack({r});
    stack.min_max_scale();
    CHECK(stack.context_vector("lo")[0] == doctest::Approx(-1.0));
    CHECK(stack.context_vector("mid")[0] == doctest::Approx(0.0));
    CHECK(stack.context_vector("hi")[0] == doctest::Approx(1.0));

    // constant column stays untouched rather than dividing by zero
    Lexicon flat = make_lexicon("f", {"c"}, {{"a", {2.0}}, {"b", {2.0}}});
    LexiconStack fs({flat});
    fs.min_max_scale();
    CHECK(std::isfinite(fs.context_vector("a")[0]));
}

TEST_CASE("toy lexica round-trip through their tsv serialization") {
    for (const auto& lx : synth::toy_lexica()) {
        Lexicon back = parse_lexicon(synth::lexicon_tsv(lx), lx.name);
        CHECK(back.name == lx.name);
        CHECK(back.dim == lx.dim);
        CHECK(back.category_names == lx.category_names);
        REQUIRE(back.entries.size() == lx.entries.size());
        for (const auto& [w, v] : lx.entries) {
            REQUIRE(back.has(w));
            CHECK(back.entries.at(w) == v);
        }
    }
}

}  // TEST_SUITE
