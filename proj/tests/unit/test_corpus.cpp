#include <doctest.h>

#include <random>

#include "medrag/corpus.hpp"
#include "medrag/errors.hpp"
#include "medrag/ranked_list.hpp"
#include "testkit.hpp"

using namespace medrag;

TEST_CASE("load_corpus maps BEIR fields") {
    auto docs = parse_corpus(R"({"_id":"d1","title":"","text":"aspirin reduces fever"})");
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].id == "d1");
    CHECK(docs[0].title.empty());
    CHECK(docs[0].body == "aspirin reduces fever");
    CHECK(docs[0].indexable_text() == "aspirin reduces fever");

    docs = parse_corpus(R"({"_id":"d2","title":"Aspirin","text":"reduces fever"})");
    CHECK(docs[0].indexable_text() == "Aspirin reduces fever");
}

TEST_CASE("empty corpus file gives an empty list") {
    CHECK(parse_corpus("").empty());
    CHECK(parse_corpus("\n\n").empty());
}

TEST_CASE("corpus integrity errors") {
    CHECK_THROWS_AS(parse_corpus("{\"_id\":\"d1\",\"title\":\"a\",\"text\":\"x\"}\n"
                                 "{\"_id\":\"d1\",\"title\":\"b\",\"text\":\"y\"}\n"),
                    IntegrityError);
    CHECK_THROWS_AS(parse_corpus(R"({"_id":"","title":"a","text":"x"})"), IntegrityError);
    CHECK_THROWS_AS(parse_corpus(R"({"_id":"d1","title":"","text":""})"), IntegrityError);
}

TEST_CASE("malformed corpus line reports its line number") {
    try {
        parse_corpus("{\"_id\":\"d1\",\"title\":\"a\",\"text\":\"x\"}\n{not json\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("load_corpus from file keeps file order") {
    auto docs = load_corpus(testkit::fixture("e2e/corpus.jsonl"));
    REQUIRE(docs.size() == 14);
    CHECK(docs.front().id == "d01");
    CHECK(docs.back().id == "d14");
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), Error);
}

TEST_CASE("queries") {
    auto qs = parse_queries("{\"_id\":\"q1\",\"text\":\"fever\"}\n{\"_id\":\"q2\",\"text\":\"pain\"}\n");
    REQUIRE(qs.size() == 2);
    CHECK(qs[1] == Query{"q2", "pain"});
    CHECK_THROWS_AS(parse_queries("{\"_id\":\"q1\",\"text\":\"a\"}\n{\"_id\":\"q1\",\"text\":\"b\"}\n"), IntegrityError);
    CHECK_THROWS_AS(parse_queries(R"({"_id":"q1","text":"   "})"), IntegrityError);
}

TEST_CASE("qrels rows and header") {
    auto q = parse_qrels("query-id\tcorpus-id\tscore\nq1\td3\t2\n");
    CHECK(q.grade("q1", "d3") == 2);
    CHECK(q.grade("q1", "d4") == 0);
    CHECK(q.relevant_count("q1") == 1);
    CHECK(q.find("q9") == nullptr);
}

TEST_CASE("qrels TREC four-column layout") {
    auto q = parse_qrels("q1 Q0 d3 2\nq1 Q0 d5 0\n");
    CHECK(q.grade("q1", "d3") == 2);
    REQUIRE(q.find("q1") != nullptr);
    CHECK(q.find("q1")->size() == 2);
    CHECK(q.relevant_count("q1") == 1);
}

TEST_CASE("qrels errors") {
    CHECK_THROWS_AS(parse_qrels("q1\td3\t-1\n"), IntegrityError);
    CHECK_THROWS_AS(parse_qrels("q1\td3\t1.5\n"), ParseError);
    CHECK_THROWS_AS(parse_qrels("q1\td3\n"), ParseError);
    CHECK_THROWS_AS(parse_qrels("q1\td3\t1\nq1\td3\t2\n"), IntegrityError);
    // a non-numeric grade after the first line is not a header
    CHECK_THROWS_AS(parse_qrels("q1\td3\t1\nq1\td4\tx\n"), ParseError);
}

TEST_CASE("tokenize examples") {
    CHECK(tokenize("Heart Attack, myocardial-infarction") ==
          TokenStream{"heart", "attack", "myocardial", "infarction"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("COVID-19") == TokenStream{"covid", "19"});
    CHECK(tokenize("  ... !!! ").empty());
}

TEST_CASE("tokenize handles non-ASCII text") {
    CHECK(tokenize("Ärzte UND Ödeme") == TokenStream{"ärzte", "und", "ödeme"});
    CHECK(tokenize("Αθήνα") == TokenStream{"αθήνα"});
    CHECK(tokenize("ИНСУЛИН") == TokenStream{"инсулин"});
    CHECK(tokenize("糖尿病") == TokenStream{"糖", "尿", "病"});
    CHECK(tokenize("naïve…café") == TokenStream{"naïve", "café"});
}

TEST_CASE("tokenize is idempotent on its joined output") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> pieces{"Heart", "ATTACK", "-", ",", " ", "19", "Ödem", "x.y", "糖", "\t", "é", "'s"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string s;
        const auto n = rng() % 12;
        for (std::size_t i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
        const auto once = tokenize(s);
        std::string joined;
        for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
        CHECK(tokenize(joined) == once);
        for (const auto& t : once) {
            CHECK(!t.empty());
            CHECK(t.find(' ') == std::string::npos);
        }
    }
}

TEST_CASE("corpus serialize round trip") {
    const std::vector<Document> docs{{"d1", "Title", "body \"quoted\" text"},
                                     {"d2", "", "unicode: ü 糖"},
                                     {"d3", "only title", ""}};
    CHECK(parse_corpus(serialize_corpus(docs)) == docs);

    const auto fixture = load_corpus(testkit::fixture("e2e/corpus.jsonl"));
    CHECK(parse_corpus(serialize_corpus(fixture)) == fixture);
}

TEST_CASE("utf8 helpers") {
    CHECK(utf8::length("aé糖") == 3);
    CHECK(utf8::prefix("aé糖b", 2) == "aé");
    CHECK(utf8::encode(utf8::decode("Ödem 糖")) == "Ödem 糖");
}

TEST_CASE("ranked list from scores breaks ties by doc id") {
    auto r = RankedList::from_scores("q", {{"b", 1.0}, {"a", 1.0}, {"c", 2.0}}, 10);
    REQUIRE(r.size() == 3);
    CHECK(r.entries[0].doc_id == "c");
    CHECK(r.entries[1].doc_id == "a");
    CHECK(r.entries[2].doc_id == "b");
    CHECK(r.entries[2].rank == 3);
    r.validate();
    CHECK(RankedList::from_scores("q", {{"b", 1.0}, {"a", 3.0}}, 1).size() == 1);
}

TEST_CASE("trec run round trip") {
    std::vector<RankedList> runs{RankedList::from_scores("q1", {{"d1", 0.1}, {"d2", 2.5}}, 10),
                                 RankedList::from_scores("q2", {{"d3", 1.0 / 3.0}}, 10)};
    const auto text = format_trec_run(runs, "tag");
    CHECK(text.rfind("q1 Q0 d2 1 2.5 tag\n", 0) == 0);
    const auto parsed = parse_trec_run(text);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed.at("q1") == runs[0]);
    CHECK(parsed.at("q2") == runs[1]);
    CHECK_THROWS_AS(parse_trec_run("q1 Q0 d1 1 1.0 t\nq1 Q0 d1 2 0.5 t\n"), ParseError);
    CHECK_THROWS_AS(parse_trec_run("q1 Q0 d1\n"), ParseError);
}
