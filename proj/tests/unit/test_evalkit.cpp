#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "medrag/errors.hpp"
#include "medrag/evalkit.hpp"
#include "testkit.hpp"

using namespace medrag;

namespace {

RankedList ranked(const std::string& qid, const std::vector<std::string>& ids) {
    RankedList r;
    r.query_id = qid;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        r.entries.push_back({ids[i], static_cast<double>(ids.size() - i), i + 1});
    }
    return r;
}

RelevanceJudgments judgments(const std::string& qid, const std::vector<std::pair<std::string, int>>& grades) {
    RelevanceJudgments q;
    for (const auto& [d, g] : grades) q.add(qid, d, g);
    return q;
}

testkit::Tokens toks(std::initializer_list<const char*> words) { return {words.begin(), words.end()}; }

}  // namespace

TEST_CASE("dcg examples") {
    CHECK(dcg_at_k(ranked("q", {"a"}), judgments("q", {{"a", 3}}), 10) == 3.0);
    CHECK(dcg_at_k(ranked("q", {"x", "y"}), judgments("q", {{"a", 3}}), 10) == 0.0);
    const double v = dcg_at_k(ranked("q", {"a", "b"}), judgments("q", {{"a", 2}, {"b", 1}}), 10);
    CHECK(std::abs(v - (2.0 + 1.0 / std::log2(3.0))) < 1e-12);
    CHECK(std::abs(v - 2.63093) < 1e-5);
    const double e = dcg_at_k(ranked("q", {"a", "b"}), judgments("q", {{"a", 2}, {"b", 1}}), 10, DcgGain::exponential);
    CHECK(std::abs(e - (3.0 + 1.0 / std::log2(3.0))) < 1e-12);
    CHECK_THROWS_AS(dcg_at_k(ranked("q", {"a"}), judgments("q", {{"a", 1}}), 0), InputError);
}

TEST_CASE("ndcg examples") {
    const auto q = judgments("q", {{"a", 3}, {"b", 2}, {"c", 1}});
    CHECK(*ndcg_at_k(ranked("q", {"a", "b", "c"}), q, 10) == 1.0);
    const auto single = judgments("q", {{"r", 1}});
    CHECK(std::abs(*ndcg_at_k(ranked("q", {"x", "r"}), single, 10) - 1.0 / std::log2(3.0)) < 1e-12);
    CHECK(std::abs(*ndcg_at_k(ranked("q", {"x", "r"}), single, 10) - 0.63093) < 1e-5);
    CHECK(*ndcg_at_k(ranked("q", {"x", "y"}), single, 10) == 0.0);
    CHECK(!ndcg_at_k(ranked("q", {"x"}), judgments("q", {{"x", 0}}), 10));
}

TEST_CASE("mrr examples") {
    const auto q = judgments("q", {{"r", 1}});
    CHECK(std::abs(mrr_at_k(ranked("q", {"a", "b", "r"}), q, 10) - 1.0 / 3.0) < 1e-15);
    CHECK(mrr_at_k(ranked("q", {"r"}), q, 10) == 1.0);
    CHECK(mrr_at_k(ranked("q", {"a", "b", "r"}), q, 2) == 0.0);
}

TEST_CASE("precision recall f1 examples") {
    std::vector<std::pair<std::string, int>> g;
    for (int i = 0; i < 8; ++i) g.emplace_back("r" + std::to_string(i), 1);
    const auto q = judgments("q", g);
    const auto p = precision_recall_f1_at_k(ranked("q", {"r0", "x1", "r1", "x2", "r2", "x3", "r3", "x4", "x5", "x6"}), q, 10);
    CHECK(p.precision == 0.4);
    CHECK(*p.recall == 0.5);
    CHECK(std::abs(*p.f1 - 2 * 0.4 * 0.5 / 0.9) < 1e-12);
    CHECK(std::abs(*p.f1 - 0.44444) < 1e-5);
    const auto z = precision_recall_f1_at_k(ranked("q", {}), q, 10);
    CHECK(z.precision == 0.0);
    CHECK(*z.recall == 0.0);
    CHECK(*z.f1 == 0.0);
}

TEST_CASE("map examples") {
    CHECK(*map_at_k(ranked("q", {"a", "b"}), judgments("q", {{"a", 1}, {"b", 1}}), 10) == 1.0);
    CHECK(*map_at_k(ranked("q", {"x", "a"}), judgments("q", {{"a", 1}}), 10) == 0.5);
    CHECK(*map_at_k(ranked("q", {"x", "y"}), judgments("q", {{"a", 1}}), 10) == 0.0);
    CHECK(!map_at_k(ranked("q", {"x"}), judgments("q", {{"a", 0}}), 10));
}

TEST_CASE("metric sheet fixture") {
    const auto sheet = nlohmann::json::parse(testkit::slurp(testkit::fixture("metrics/expected.json")));
    const auto run = parse_trec_run(testkit::slurp(testkit::fixture("metrics/run.trec")));
    const auto qrels = load_qrels(testkit::fixture("metrics/qrels.tsv"));
    const auto report = evaluate_run(run, qrels, 10);
    CHECK(report.query_count == 5);
    CHECK(report.excluded_no_relevant == 0);
    REQUIRE(report.per_query.size() == 5);
    for (const auto& qm : report.per_query) {
        const auto& want = sheet.at("per_query").at(qm.query_id);
        CHECK(std::abs(qm.dcg - want.at("dcg").get<double>()) < 1e-9);
        CHECK(std::abs(*qm.ndcg - want.at("ndcg").get<double>()) < 1e-9);
        CHECK(std::abs(qm.mrr - want.at("mrr").get<double>()) < 1e-9);
        CHECK(std::abs(qm.precision - want.at("precision").get<double>()) < 1e-9);
        CHECK(std::abs(*qm.recall - want.at("recall").get<double>()) < 1e-9);
        CHECK(std::abs(*qm.f1 - want.at("f1").get<double>()) < 1e-9);
        CHECK(std::abs(*qm.map - want.at("map").get<double>()) < 1e-9);
    }
    const auto& mean = sheet.at("mean");
    CHECK(std::abs(report.dcg - mean.at("dcg").get<double>()) < 1e-9);
    CHECK(std::abs(report.ndcg - mean.at("ndcg").get<double>()) < 1e-9);
    CHECK(std::abs(report.mrr - mean.at("mrr").get<double>()) < 1e-9);
    CHECK(std::abs(report.precision - mean.at("precision").get<double>()) < 1e-9);
    CHECK(std::abs(report.recall - mean.at("recall").get<double>()) < 1e-9);
    CHECK(std::abs(report.f1 - mean.at("f1").get<double>()) < 1e-9);
    CHECK(std::abs(report.map - mean.at("map").get<double>()) < 1e-9);

    const auto j = report.to_json();
    CHECK(j.at("query_count") == 5);
    CHECK(report.to_table().find("NDCG@10") != std::string::npos);
}

TEST_CASE("queries without relevant docs are excluded and counted") {
    RelevanceJudgments q;
    q.add("q1", "a", 1);
    q.add("q2", "b", 0);
    std::map<std::string, RankedList> run{{"q1", ranked("q1", {"a"})}, {"q2", ranked("q2", {"b"})}, {"q3", ranked("q3", {"c"})}};
    const auto r = evaluate_run(run, q, 10);
    CHECK(r.query_count == 2);
    CHECK(r.excluded_no_relevant == 1);
    CHECK(r.unknown_queries == std::vector<std::string>{"q3"});
    CHECK(r.ndcg == 1.0);
    CHECK(r.map == 1.0);
    CHECK(r.mrr == 0.5);  // MRR is defined (0) for q2
}

TEST_CASE("report aggregates are means of per-query values") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 30; ++trial) {
        RelevanceJudgments q;
        std::map<std::string, RankedList> run;
        for (int qi = 0; qi < 8; ++qi) {
            const auto qid = "q" + std::to_string(qi);
            for (int d = 0; d < 15; ++d) {
                if (rng() % 3 == 0) q.add(qid, "d" + std::to_string(d), static_cast<int>(rng() % 4));
            }
            std::vector<std::string> ids;
            for (int d = 0; d < 15; ++d) {
                if (rng() % 2) ids.push_back("d" + std::to_string(d));
            }
            std::shuffle(ids.begin(), ids.end(), rng);
            run[qid] = ranked(qid, ids);
        }
        const auto r = evaluate_run(run, q, 10);
        double dcg = 0, mrr = 0, p = 0, ndcg = 0;
        std::size_t n_def = 0;
        for (const auto& qm : r.per_query) {
            dcg += qm.dcg;
            mrr += qm.mrr;
            p += qm.precision;
            if (qm.ndcg) {
                ndcg += *qm.ndcg;
                ++n_def;
            }
            if (qm.ndcg) CHECK((*qm.ndcg >= 0.0 && *qm.ndcg <= 1.0 + 1e-12));
            if (qm.map) CHECK((*qm.map >= 0.0 && *qm.map <= 1.0));
        }
        const auto n = static_cast<double>(r.per_query.size());
        CHECK(std::abs(r.dcg - dcg / n) < 1e-9);
        CHECK(std::abs(r.mrr - mrr / n) < 1e-9);
        CHECK(std::abs(r.precision - p / n) < 1e-9);
        if (n_def) CHECK(std::abs(r.ndcg - ndcg / static_cast<double>(n_def)) < 1e-9);
    }
}

TEST_CASE("appending unjudged docs below k changes nothing at k") {
    const auto q = judgments("q", {{"a", 2}, {"b", 1}, {"c", 3}});
    auto base = ranked("q", {"x", "a", "y", "b", "z"});
    auto longer = ranked("q", {"x", "a", "y", "b", "z", "p1", "p2", "p3", "p4", "p5", "u1", "u2", "c"});
    CHECK(dcg_at_k(base, q, 10) == dcg_at_k(longer, q, 10));
    CHECK(*ndcg_at_k(base, q, 10) == *ndcg_at_k(longer, q, 10));
    CHECK(mrr_at_k(base, q, 10) == mrr_at_k(longer, q, 10));
    CHECK(*map_at_k(base, q, 10) == *map_at_k(longer, q, 10));
    CHECK(precision_recall_f1_at_k(base, q, 10).precision == precision_recall_f1_at_k(longer, q, 10).precision);
}

TEST_CASE("MAP equals MRR for single-relevant queries") {
    std::mt19937_64 rng(73);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::string> ids;
        for (int d = 0; d < 12; ++d) ids.push_back("d" + std::to_string(d));
        std::shuffle(ids.begin(), ids.end(), rng);
        const auto q = judgments("q", {{"d" + std::to_string(rng() % 14), 1 + static_cast<int>(rng() % 3)}});
        const auto r = ranked("q", ids);
        CHECK(*map_at_k(r, q, 10) == mrr_at_k(r, q, 10));
    }
}

TEST_CASE("accuracy") {
    const std::vector<std::string> gold{"A", "B", "C", "D"};
    const std::vector<std::optional<std::string>> all{"A", "B", "C", "D"};
    const std::vector<std::optional<std::string>> three{"A", std::nullopt, "C", "D"};
    CHECK(accuracy(all, gold) == 1.0);
    CHECK(accuracy(three, gold) == 0.75);
    CHECK_THROWS_AS(accuracy(std::vector<std::optional<std::string>>{}, std::vector<std::string>{}), InputError);
    CHECK_THROWS_AS(accuracy(three, std::vector<std::string>{"A"}), InputError);
}

TEST_CASE("rouge and bleu examples") {
    const auto r1 = rouge_n("a b c", "a b d", 1);
    CHECK(std::abs(r1.precision - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(r1.recall - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(r1.f1 - 2.0 / 3.0) < 1e-15);
    CHECK(rouge_n("aspirin fever", "aspirin fever", 2).f1 == 1.0);
    CHECK(rouge_n("a b", "c d", 1).f1 == 0.0);
    CHECK_THROWS_AS(rouge_n("a", "a", 0), InputError);

    CHECK(rouge_l("a b c d", "a c b d").f1 == 0.75);
    CHECK(rouge_l("x y z", "x y z").f1 == 1.0);
    CHECK(rouge_l("", "a b").f1 == 0.0);

    CHECK(bleu("the cat sat on the mat", "the cat sat on the mat") == 1.0);
    CHECK(bleu("a b c", "x y z") == 0.0);
    const double b = bleu("the cat sat", "the cat sat down");
    CHECK(std::abs(b - std::exp(1.0 - 4.0 / 3.0)) < 1e-12);
    CHECK(std::abs(b - 0.71653) < 1e-5);
}

TEST_CASE("generation metrics match the brute-force reference") {
    std::mt19937_64 rng(79);
    for (int i = 0; i < 300; ++i) {
        const auto vocab = 2 + rng() % 8;
        auto gen = [&] {
            testkit::Tokens t(rng() % 14);
            for (auto& w : t) w = testkit::word(rng() % vocab);
            return t;
        };
        const auto c = gen(), r = gen();
        for (std::size_t n : {1, 2}) {
            const auto got = rouge_n(c, r, n);
            const auto want = testkit::brute_rouge_n(c, r, n);
            CHECK(std::abs(got.precision - want.p) < 1e-9);
            CHECK(std::abs(got.recall - want.r) < 1e-9);
            CHECK(std::abs(got.f1 - want.f) < 1e-9);
        }
        const auto gl = rouge_l(c, r);
        const auto wl = testkit::brute_rouge_l(c, r);
        CHECK(std::abs(gl.f1 - wl.f) < 1e-9);
        CHECK(std::abs(bleu(c, r) - testkit::brute_bleu(c, r)) < 1e-9);
        const double bl = bleu(c, r);
        CHECK((bl >= 0.0 && bl <= 1.0));
        if (!c.empty()) {
            CHECK(rouge_n(c, c, 1).f1 == 1.0);
            CHECK(rouge_l(c, c).f1 == 1.0);
            CHECK(bleu(c, c) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("evaluate_generation scales by 100") {
    const std::vector<GenPair> pairs{{"1", "a b c", "a b c"}, {"2", "x", "y"}};
    const auto r = evaluate_generation(pairs);
    CHECK(r.item_count == 2);
    CHECK(r.rouge1 == doctest::Approx(50.0));
    CHECK(r.rougeL == doctest::Approx(50.0));
    CHECK(r.bleu == doctest::Approx(50.0));
    CHECK(r.per_item.size() == 2);
    CHECK(r.to_table().find("ROUGE-1") != std::string::npos);
    CHECK_THROWS_AS(evaluate_generation(std::vector<GenPair>{}), InputError);
}

TEST_CASE("literal example tokens") {
    CHECK(rouge_n(toks({"a", "a", "a"}), toks({"a"}), 1).precision == doctest::Approx(1.0 / 3.0));
}
