#include <doctest.h>

#include <cstdlib>

#include "medrag/config.hpp"
#include "medrag/errors.hpp"
#include "medrag/lexical.hpp"
#include "medrag/pipeline.hpp"
#include "testkit.hpp"

using namespace medrag;
using nlohmann::json;

TEST_CASE("env interpolation") {
    ::setenv("MEDRAG_T_SET", "abc", 1);
    ::unsetenv("MEDRAG_T_UNSET");
    CHECK(interpolate_env("plain") == "plain");
    CHECK(interpolate_env("${MEDRAG_T_SET}") == "abc");
    CHECK(interpolate_env("x/${MEDRAG_T_SET}/y/${MEDRAG_T_SET}") == "x/abc/y/abc");
    CHECK(interpolate_env("${MEDRAG_T_UNSET:-fallback}") == "fallback");
    CHECK(interpolate_env("${MEDRAG_T_SET:-fallback}") == "abc");
    CHECK(interpolate_env("${MEDRAG_T_UNSET:-}") == "");
    CHECK_THROWS_AS(interpolate_env("${MEDRAG_T_UNSET}"), ConfigError);
    CHECK_THROWS_AS(interpolate_env("${MEDRAG_T_SET"), ConfigError);

    const auto c = RunConfig::from_json(json::parse(R"({"retrieval":{"mode":"${MEDRAG_T_UNSET:-lexical}"}})"));
    CHECK(c.mode == RetrievalMode::lexical);
}

TEST_CASE("defaults") {
    const auto c = RunConfig::from_json(json::object());
    CHECK(c.mode == RetrievalMode::hybrid);
    CHECK(c.k == 10);
    CHECK(c.fusion().kind() == FusionKind::weighted);
    CHECK(c.fusion().alpha() == 0.7);
    CHECK(c.bm25.k1 == 1.2);
    CHECK(c.bm25.b == 0.75);
    CHECK(c.encoder.kind == "local_test");
    CHECK(c.encoder.dim == 256);
    CHECK(c.generation.task == Task::closed_ended);
    CHECK(c.generation.confidence_threshold == doctest::Approx(0.1));
    CHECK(c.backend.kind == "mock");
    CHECK_FALSE(c.corpus.has_value());
}

TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"retreival":{}})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"bm25":{"k2":1}})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"retrieval":{"k":0}})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"retrieval":{"mode":"fuzzy"}})")), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"retrieval":{"k":"ten"}})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"bm25":{"query_terms":"bag"}})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"encoder":{"kind":"magic"}})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"backend":{"kind":"magic"}})")), ConfigError);
    CHECK_THROWS(RunConfig::from_json(json::parse(R"({"fusion":{"kind":"weighted","alpha":2}})")));
    CHECK_THROWS(RunConfig::from_json(json::parse(R"({"generation":{"profile":{"max_tokens":0}}})")));
}

TEST_CASE("relative paths resolve against the config directory") {
    testkit::TempDir dir;
    std::filesystem::create_directories(dir / "sub");
    testkit::spit(dir / "sub/run.json", R"({
        "corpus": {"documents": "data/corpus.jsonl", "qrels": "/abs/qrels.tsv"},
        "index": {"lexical": "idx/lex.json"},
        "backend": {"script": "mock.json"}
    })");
    const auto c = RunConfig::load(dir / "sub/run.json");
    CHECK(*c.corpus == dir / "sub/data/corpus.jsonl");
    CHECK(*c.qrels == std::filesystem::path("/abs/qrels.tsv"));
    CHECK(*c.lexical_index == dir / "sub/idx/lex.json");
    CHECK(*c.backend.script == dir / "sub/mock.json");

    CHECK_THROWS_AS(RunConfig::load(dir / "missing.json"), ConfigError);
    testkit::spit(dir / "broken.json", "{not json");
    CHECK_THROWS_AS(RunConfig::load(dir / "broken.json"), ConfigError);
}

TEST_CASE("component factories") {
    EncoderConfig e;
    CHECK(make_encoder(e)->dim() == 256);
    e.kind = "remote";
    CHECK_THROWS_AS(make_encoder(e), ConfigError);

    BackendConfig b;
    CHECK_THROWS_AS(make_backend(b), ConfigError);
    b.script = "/nonexistent/mock.json";
    CHECK_THROWS_AS(make_backend(b), ConfigError);
    b.script = testkit::fixture("e2e/mock.json");
    CHECK(make_backend(b) != nullptr);
    b.kind = "http";
    CHECK_THROWS_AS(make_backend(b), ConfigError);
}

TEST_CASE("question and gold loading") {
    const auto qs = load_questions(testkit::fixture("e2e/questions.jsonl"));
    REQUIRE(qs.size() == 5);
    CHECK(qs[0].id == "c1");
    REQUIRE(qs[0].options.size() == 4);
    CHECK(qs[0].options[1].label == "B");
    CHECK(qs[0].options[1].text == "Metformin");
    CHECK(qs[0].effective_option_set() == OptionSet::abcd);
    CHECK(qs[4].effective_option_set() == OptionSet::yes_no_maybe);

    testkit::TempDir dir;
    testkit::spit(dir / "q.jsonl", R"({"id":"a","question":"Q?","options":["x","y","z"]}
{"id":"b","question":"R?","option_set":"yes_no"}
)");
    const auto arr = load_questions(dir / "q.jsonl");
    REQUIRE(arr[0].options.size() == 3);
    CHECK(arr[0].options[2].label == "C");
    CHECK(arr[0].options[2].text == "z");
    CHECK(arr[1].effective_option_set() == OptionSet::yes_no);

    testkit::spit(dir / "dup.jsonl", "{\"id\":\"a\",\"question\":\"Q\"}\n{\"id\":\"a\",\"question\":\"Q\"}\n");
    CHECK_THROWS_AS(load_questions(dir / "dup.jsonl"), IntegrityError);

    const auto gold = load_gold(testkit::fixture("e2e/gold.jsonl"));
    CHECK(gold.size() == 5);
    CHECK(gold.at("c1") == "B");
    testkit::spit(dir / "gold.jsonl", "{\"id\":\"a\",\"answer\":\"A\"}\n{\"id\":\"a\",\"answer\":\"B\"}\n");
    CHECK_THROWS_AS(load_gold(dir / "gold.jsonl"), IntegrityError);
}

TEST_CASE("retriever modes agree with the underlying searches") {
    const auto docs = load_corpus(testkit::fixture("e2e/corpus.jsonl"));
    auto lex = InvertedIndex::build(docs);
    LocalTestEncoder enc(256);
    auto vec = build_vector_index(enc, docs);
    Retriever r(lex, vec, std::make_unique<LocalTestEncoder>(256), {}, FusionStrategy::rrf());

    const Query q{"q", "statin cholesterol therapy"};
    const auto l = lexical_search(lex, {}, q, 5);
    const auto s = semantic_search(vec, enc.encode(q.text), 5, "q");
    CHECK(r.retrieve(q, RetrievalMode::lexical, 5) == l);
    CHECK(r.retrieve(q, RetrievalMode::semantic, 5) == s);
    CHECK(r.retrieve(q, RetrievalMode::hybrid, 5) == fuse(l, s, FusionStrategy::rrf(), 5));

    Retriever sem_only(std::nullopt, vec, std::make_unique<LocalTestEncoder>(256), {}, FusionStrategy::rrf());
    CHECK_THROWS_AS(sem_only.retrieve(q, RetrievalMode::lexical, 5), ConfigError);
    CHECK_THROWS_AS(sem_only.retrieve(q, RetrievalMode::hybrid, 5), ConfigError);
}
