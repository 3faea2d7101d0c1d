#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "medrag/cli.hpp"
#include "medrag/corpus.hpp"
#include "testkit.hpp"

using namespace medrag;
using nlohmann::json;
using testkit::fixture;
using testkit::run_cli;

namespace {

std::string write_config(const testkit::TempDir& dir, const std::string& name, json extra) {
    json c = {{"corpus",
               {{"documents", fixture("e2e/corpus.jsonl").string()},
                {"queries", fixture("e2e/queries.jsonl").string()},
                {"qrels", fixture("e2e/qrels.tsv").string()}}},
              {"index", {{"lexical", "lex.json"}, {"vector", "vec.bin"}}},
              {"backend", {{"script", fixture("e2e/mock.json").string()}, {"request_log", "log.jsonl"}}}};
    c.merge_patch(extra);
    testkit::spit(dir / name, c.dump(2));
    return dir.str(name);
}

std::vector<json> read_jsonl(const std::filesystem::path& p) {
    std::vector<json> out;
    std::istringstream in(testkit::slurp(p));
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"bogus"}).code == 2);
    CHECK(run_cli({"search", "--no-such-flag"}).code == 2);
    CHECK(run_cli({"search"}).code == 2);  // nothing to search
    CHECK(run_cli({"eval-retrieval"}).code == 2);
    CHECK(run_cli({"eval-qa", "--answers", "/nonexistent", "--gold", "/nonexistent"}).code == 2);
    CHECK(run_cli({"finetune-manifest"}).code == 2);
    CHECK(run_cli({"index", "--config", "/nonexistent.json"}).code == 2);
    CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("index refuses to overwrite without --force") {
    testkit::TempDir dir;
    const auto cfg = write_config(dir, "c.json", json::object());
    auto r = run_cli({"index", "--config", cfg});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("documents: 14") != std::string::npos);
    CHECK(r.out.find("vector_dim: 256") != std::string::npos);
    const auto first = testkit::slurp(dir / "lex.json");

    r = run_cli({"index", "--config", cfg});
    CHECK(r.code == 2);
    CHECK(r.err.find("--force") != std::string::npos);
    CHECK(run_cli({"index", "--config", cfg, "--force"}).code == 0);
    CHECK(testkit::slurp(dir / "lex.json") == first);
}

TEST_CASE("lexical search output matches the brute-force scorer") {
    testkit::TempDir dir;
    const auto cfg = write_config(dir, "c.json", {{"retrieval", {{"mode", "lexical"}, {"k", 4}}}});
    REQUIRE(run_cli({"index", "--config", cfg}).code == 0);
    const auto r = run_cli({"search", "--config", cfg, "--queries", fixture("e2e/queries.jsonl").string(), "-o",
                            dir.str("run.trec")});
    REQUIRE(r.code == 0);

    const auto docs = load_corpus(fixture("e2e/corpus.jsonl"));
    const auto queries = load_queries(fixture("e2e/queries.jsonl"));
    std::map<std::string, std::vector<std::pair<std::string, double>>> got;
    std::istringstream in(testkit::slurp(dir / "run.trec"));
    for (std::string q, q0, d, tag; true;) {
        std::size_t rank;
        double score;
        if (!(in >> q >> q0 >> d >> rank >> score >> tag)) break;
        CHECK(q0 == "Q0");
        CHECK(tag == "medrag-lexical");
        CHECK(rank == got[q].size() + 1);
        got[q].emplace_back(d, score);
    }
    CHECK(got.size() == queries.size());
    for (const auto& q : queries) {
        auto oracle = testkit::brute_bm25(docs, tokenize(q.text));
        if (oracle.size() > 4) oracle.resize(4);
        REQUIRE(got[q.id].size() == oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i) {
            CHECK(got[q.id][i].first == oracle[i].doc_id);
            CHECK(std::abs(got[q.id][i].second - oracle[i].score) < 1e-9);
        }
    }

    // single-query form prints to stdout with the given id and tag
    const auto one = run_cli({"search", "--config", cfg, "--query", "lower LDL cholesterol", "--query-id", "x", "--tag",
                              "t", "-k", "1"});
    REQUIRE(one.code == 0);
    CHECK(one.out.rfind("x Q0 ", 0) == 0);
    CHECK(one.out.find(" 1 ") != std::string::npos);
    CHECK(one.out.substr(one.out.size() - 3) == " t\n");
}

TEST_CASE("eval-retrieval reproduces the metric sheet") {
    testkit::TempDir dir;
    const auto r = run_cli({"eval-retrieval", "--run", fixture("metrics/run.trec").string(), "--qrels",
                            fixture("metrics/qrels.tsv").string(), "--json", dir.str("report.json")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("NDCG@10") != std::string::npos);
    CHECK(r.out.find("53.97") != std::string::npos);

    const auto expected = json::parse(testkit::slurp(fixture("metrics/expected.json")));
    const auto report = json::parse(testkit::slurp(dir / "report.json"));
    CHECK(report["query_count"] == 5);
    for (const auto& [name, value] : expected["mean"].items()) {
        const double scale = name == "dcg" ? 1.0 : 100.0;
        CHECK(std::abs(report["metrics"][name].get<double>() - value.get<double>() * scale) < 1e-9);
    }
    for (const auto& row : report["per_query"]) {
        const auto& want = expected["per_query"][row["query_id"].get<std::string>()];
        for (const auto& [name, value] : want.items()) CHECK(std::abs(row[name].get<double>() - value.get<double>()) < 1e-9);
    }
}

TEST_CASE("closed-ended answer and eval-qa") {
    testkit::TempDir dir;
    const auto cfg = write_config(dir, "c.json", {{"retrieval", {{"mode", "lexical"}, {"k", 3}}}});
    REQUIRE(run_cli({"index", "--config", cfg}).code == 0);
    const auto r = run_cli({"answer", "--config", cfg, "--questions", fixture("e2e/questions.jsonl").string(), "-o",
                            dir.str("answers.jsonl")});
    REQUIRE(r.code == 0);

    const auto answers = read_jsonl(dir / "answers.jsonl");
    REQUIRE(answers.size() == 5);
    std::vector<std::string> labels;
    std::vector<bool> refined;
    for (const auto& a : answers) {
        labels.push_back(a["label"].get<std::string>());
        refined.push_back(a["refined"].get<bool>());
    }
    CHECK(labels == std::vector<std::string>{"B", "A", "C", "B", "yes"});
    CHECK(refined == std::vector<bool>{false, false, true, true, false});
    CHECK(answers[2]["confidence"].get<double>() == doctest::Approx(std::exp(-0.2)));
    CHECK(answers[3]["confidence"].get<double>() == doctest::Approx(std::exp(-4.0)));

    // c3 and c4 are regenerated once each
    const auto log = read_jsonl(dir / "log.jsonl");
    std::map<std::string, int> calls;
    for (const auto& e : log) {
        ++calls[e["tag"].get<std::string>()];
        CHECK(e["request"]["max_tokens"] == 2);
        CHECK(e["request"]["user"].get<std::string>().find("\nContext:\n[doc:") != std::string::npos);
    }
    CHECK(calls == std::map<std::string, int>{{"c1", 1}, {"c2", 1}, {"c3", 2}, {"c4", 2}, {"c5", 1}});

    const auto eq = run_cli({"eval-qa", "--answers", dir.str("answers.jsonl"), "--gold",
                             fixture("e2e/gold.jsonl").string(), "--json", dir.str("qa.json")});
    REQUIRE(eq.code == 0);
    CHECK(eq.out.find("80.00") != std::string::npos);
}

TEST_CASE("long-form answer reports partial failure") {
    testkit::TempDir dir;
    const auto cfg = write_config(
        dir, "c.json",
        {{"retrieval", {{"mode", "lexical"}, {"k", 3}}},
         {"backend", {{"script", fixture("e2e/longform_mock.json").string()}}}});
    REQUIRE(run_cli({"index", "--config", cfg}).code == 0);
    const auto r = run_cli({"answer", "--config", cfg, "--task", "long_form", "--questions",
                            fixture("e2e/longform_questions.jsonl").string(), "-o", dir.str("answers.jsonl")});
    CHECK(r.code == 1);
    CHECK(r.err.find("l3") != std::string::npos);
    const auto answers = read_jsonl(dir / "answers.jsonl");
    REQUIRE(answers.size() == 2);
    CHECK(answers[0]["id"] == "l1");
    CHECK_FALSE(answers[0].contains("label"));
    for (const auto& e : read_jsonl(dir / "log.jsonl")) CHECK(e["request"]["max_tokens"] == 300);

    const auto eq = run_cli({"eval-qa", "--answers", dir.str("answers.jsonl"), "--gold",
                             fixture("e2e/longform_gold.jsonl").string(), "--task", "long_form"});
    CHECK(eq.code == 0);
    CHECK(eq.out.find("ROUGE-L") != std::string::npos);
    CHECK(eq.err.find("l3") != std::string::npos);
}

TEST_CASE("sweep-topk writes one row per depth") {
    testkit::TempDir dir;
    json c = {{"corpus", {{"documents", fixture("sweep/corpus.jsonl").string()}}},
              {"index", {{"vector", "vec.bin"}}},
              {"retrieval", {{"mode", "semantic"}}},
              {"backend", {{"script", fixture("sweep/mock.json").string()}}}};
    testkit::spit(dir / "s.json", c.dump());
    REQUIRE(run_cli({"index", "--config", dir.str("s.json")}).code == 0);
    const auto r = run_cli({"sweep-topk", "--config", dir.str("s.json"), "--questions",
                            fixture("sweep/questions.jsonl").string(), "--gold", fixture("sweep/gold.jsonl").string(),
                            "--k-list", "1,2,4,8"});
    REQUIRE(r.code == 0);
    CHECK(r.out ==
          "k,accuracy,answered,failed\n"
          "1,100.000000,4,0\n"
          "2,50.000000,4,0\n"
          "4,0.000000,4,0\n"
          "8,0.000000,4,0\n");
    CHECK(run_cli({"sweep-topk", "--config", dir.str("s.json"), "--questions", fixture("sweep/questions.jsonl").string(),
                   "--gold", fixture("sweep/gold.jsonl").string(), "--k-list", "1,x"})
              .code == 2);
}

TEST_CASE("finetune-manifest") {
    const auto r = run_cli({"finetune-manifest", "--records"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        const auto j = json::parse(line);
        CHECK(j.contains("train_dataset"));
        ++n;
    }
    CHECK(n == 9);

    testkit::TempDir dir;
    const auto cfg = write_config(dir, "c.json", {{"retrieval", {{"mode", "lexical"}, {"k", 2}}}});
    REQUIRE(run_cli({"index", "--config", cfg}).code == 0);
    const auto pairs = run_cli({"finetune-manifest", "--config", cfg, "--questions",
                                fixture("e2e/questions.jsonl").string(), "--gold", fixture("e2e/gold.jsonl").string()});
    REQUIRE(pairs.code == 0);
    std::istringstream pin(pairs.out);
    std::string line;
    REQUIRE(std::getline(pin, line));
    const auto first = json::parse(line);
    CHECK(first["y"] == "B");
    CHECK(first["x"].get<std::string>().find("\n\nQuestion: Which drug") != std::string::npos);
}

TEST_CASE("eval-qa scores candidate/reference pairs") {
    testkit::TempDir dir;
    testkit::spit(dir / "pairs.jsonl", "{\"id\":\"p1\",\"candidate\":\"the cat sat\",\"reference\":\"the cat sat down\"}\n"
                                       "{\"id\":\"p2\",\"candidate\":\"a b c\",\"reference\":\"a b d\"}\n");
    const auto r = run_cli({"eval-qa", "--pairs", dir.str("pairs.jsonl"), "--json", dir.str("gen.json")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("ROUGE-1") != std::string::npos);
    const auto report = json::parse(testkit::slurp(dir / "gen.json"))["generation"];
    CHECK(report["item_count"] == 2);

    const testkit::Tokens c1{"the", "cat", "sat"}, r1{"the", "cat", "sat", "down"};
    const testkit::Tokens c2{"a", "b", "c"}, r2{"a", "b", "d"};
    const double r1_mean = (testkit::brute_rouge_n(c1, r1, 1).f + testkit::brute_rouge_n(c2, r2, 1).f) / 2 * 100;
    const double bleu_mean = (testkit::brute_bleu(c1, r1) + testkit::brute_bleu(c2, r2)) / 2 * 100;
    CHECK(std::abs(report["metrics"]["rouge1"].get<double>() - r1_mean) < 1e-9);
    CHECK(std::abs(report["metrics"]["bleu"].get<double>() - bleu_mean) < 1e-9);

    CHECK(run_cli({"eval-qa", "--pairs", dir.str("pairs.jsonl"), "--gold", dir.str("pairs.jsonl")}).code == 2);
    CHECK(run_cli({"eval-qa"}).code == 2);
    testkit::spit(dir / "dup.jsonl", "{\"id\":\"p\",\"candidate\":\"a\",\"reference\":\"a\"}\n"
                                     "{\"id\":\"p\",\"candidate\":\"a\",\"reference\":\"a\"}\n");
    CHECK(run_cli({"eval-qa", "--pairs", dir.str("dup.jsonl")}).code == 2);
}
