#include "medrag/cli.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "medrag/config.hpp"
#include "medrag/errors.hpp"
#include "medrag/evalkit.hpp"
#include "medrag/fileio.hpp"
#include "medrag/pipeline.hpp"

namespace medrag::cli {

namespace {

namespace fs = std::filesystem;

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void require_file(const std::optional<fs::path>& path, const std::string& what) {
    if (!path) throw ConfigError(what + " path is not configured");
    if (!fs::exists(*path)) throw ConfigError(what + " not found: " + path->string());
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : RunConfig::load(path); }

void emit(const std::string& out_path, const std::string& contents, std::ostream& out) {
    if (out_path.empty() || out_path == "-") {
        out << contents;
    } else {
        write_file_atomic(out_path, contents);
    }
}

struct CommonOverrides {
    std::string config;
    std::optional<std::string> mode;
    std::optional<std::size_t> k;
    std::optional<std::string> fusion;
    std::optional<double> alpha;
    std::optional<double> rrf_k;
    std::optional<std::string> lexical;
    std::optional<std::string> vector;
    std::optional<std::string> corpus;

    void add_retrieval(CLI::App* cmd) {
        cmd->add_option("--mode", mode, "Retrieval mode: lexical, semantic or hybrid");
        cmd->add_option("-k,--top-k", k, "Number of documents to retrieve");
        cmd->add_option("--fusion", fusion, "Hybrid fusion: weighted, rrf, semantic_only or lexical_only");
        cmd->add_option("--alpha", alpha, "Semantic weight for weighted fusion");
        cmd->add_option("--rrf-k", rrf_k, "Rank offset for reciprocal rank fusion");
        cmd->add_option("--lexical-index", lexical, "Lexical index file");
        cmd->add_option("--vector-index", vector, "Vector index file");
    }

    RunConfig resolve() const {
        auto c = config_or_default(config);
        if (mode) c.mode = parse_retrieval_mode(*mode);
        if (k) c.k = *k;
        if (fusion) c.fusion_kind = *fusion;
        if (alpha) c.fusion_alpha = *alpha;
        if (rrf_k) c.rrf_k = *rrf_k;
        if (lexical) c.lexical_index = *lexical;
        if (vector) c.vector_index = *vector;
        if (corpus) c.corpus = *corpus;
        if (c.k == 0) throw ConfigError("k must be >= 1");
        (void)c.fusion();
        return c;
    }
};

Retriever open_retriever(const RunConfig& c) {
    const bool need_lex = c.mode != RetrievalMode::semantic;
    const bool need_vec = c.mode != RetrievalMode::lexical;
    std::optional<InvertedIndex> lex;
    std::optional<VectorIndex> vec;
    std::unique_ptr<Encoder> encoder;
    if (need_lex) {
        require_file(c.lexical_index, "lexical index");
        lex = InvertedIndex::load(*c.lexical_index);
    }
    if (need_vec) {
        require_file(c.vector_index, "vector index");
        vec = VectorIndex::load(*c.vector_index);
        encoder = make_encoder(c.encoder);
    }
    return Retriever(std::move(lex), std::move(vec), std::move(encoder), c.bm25, c.fusion());
}

// ---------------------------------------------------------------------------

struct IndexArgs {
    CommonOverrides common;
    bool force = false;
    std::size_t batch_size = 64;
};

int cmd_index(const IndexArgs& args, std::ostream& out, std::ostream&) {
    auto c = args.common.resolve();
    require_file(c.corpus, "corpus");
    if (!c.lexical_index && !c.vector_index) {
        throw ConfigError("nothing to build: set --lexical-index and/or --vector-index");
    }
    for (const auto& p : {c.lexical_index, c.vector_index}) {
        if (p && fs::exists(*p) && !args.force) {
            throw ConfigError("index already exists: " + p->string() + " (use --force to rebuild)");
        }
    }
    const auto docs = load_corpus(*c.corpus);
    if (docs.empty()) throw InputError("corpus is empty: " + c.corpus->string());
    out << "documents: " << docs.size() << '\n';
    if (c.lexical_index) {
        const auto index = InvertedIndex::build(docs, c.bm25);
        index.save(*c.lexical_index);
        out << "avg_doc_length: " << shortest(index.avg_doc_length()) << '\n';
        out << "terms: " << index.term_count() << '\n';
    }
    if (c.vector_index) {
        auto encoder = make_encoder(c.encoder);
        const auto index = build_vector_index(*encoder, docs, args.batch_size);
        index.save(*c.vector_index);
        out << "vector_dim: " << index.dim() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SearchArgs {
    CommonOverrides common;
    std::optional<std::string> query;
    std::string query_id = "q1";
    std::optional<std::string> queries;
    std::string out_path;
    std::optional<std::string> tag;
};

int cmd_search(const SearchArgs& args, std::ostream& out, std::ostream&) {
    auto c = args.common.resolve();
    std::vector<Query> queries;
    if (args.query) {
        if (args.query->find_first_not_of(" \t\r\n") == std::string::npos) throw InputError("empty --query");
        queries.push_back({args.query_id, *args.query});
    } else {
        if (args.queries) c.queries = *args.queries;
        require_file(c.queries, "queries file");
        queries = load_queries(*c.queries);
    }
    auto retriever = open_retriever(c);
    std::vector<RankedList> runs;
    for (const auto& q : queries) runs.push_back(retriever.retrieve(q, c.mode, c.k));
    emit(args.out_path, format_trec_run(runs, args.tag.value_or("medrag-" + to_string(c.mode))), out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalRetrievalArgs {
    std::string config;
    std::string run;
    std::optional<std::string> qrels;
    std::size_t k = 10;
    std::string gain = "linear";
    std::string json_out;
};

int cmd_eval_retrieval(const EvalRetrievalArgs& args, std::ostream& out, std::ostream& err) {
    auto c = config_or_default(args.config);
    if (args.qrels) c.qrels = *args.qrels;
    require_file(fs::path(args.run), "run file");
    require_file(c.qrels, "qrels file");
    if (args.k == 0) throw ConfigError("k must be >= 1");
    if (args.gain != "linear" && args.gain != "exponential") throw ConfigError("--gain must be linear or exponential");
    const auto run = parse_trec_run(read_text_file(args.run));
    const auto qrels = load_qrels(*c.qrels);
    const auto report =
        evaluate_run(run, qrels, args.k, args.gain == "linear" ? DcgGain::linear : DcgGain::exponential);
    for (const auto& q : report.unknown_queries) {
        err << "warning: run query " << q << " has no relevance judgments; excluded\n";
    }
    out << report.to_table();
    if (!args.json_out.empty()) write_file_atomic(args.json_out, report.to_json().dump(2) + "\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct QaArgs {
    CommonOverrides common;
    std::string questions;
    std::optional<std::string> task;
    std::optional<double> threshold;
    std::optional<std::string> request_log;
};

RunConfig resolve_qa(const QaArgs& args) {
    auto c = args.common.resolve();
    if (args.task) c.generation.task = parse_task(*args.task);
    if (args.threshold) c.generation.confidence_threshold = *args.threshold;
    if (args.request_log) c.backend.request_log = *args.request_log;
    (void)c.generation.profile();
    require_file(fs::path(args.questions), "questions file");
    require_file(c.corpus, "corpus");
    if (c.backend.kind == "mock") require_file(c.backend.script, "mock script");
    return c;
}

void write_request_log(const RunConfig& c, LlmBackend& backend) {
    if (!c.backend.request_log) return;
    auto* mock = dynamic_cast<MockLlmBackend*>(&backend);
    if (mock == nullptr) return;
    std::string text;
    for (const auto& entry : mock->request_log()) text += entry.dump() + "\n";
    write_file_atomic(*c.backend.request_log, text);
}

struct AnswerArgs {
    QaArgs qa;
    std::string out_path;
};

int cmd_answer(const AnswerArgs& args, std::ostream& out, std::ostream& err) {
    const auto c = resolve_qa(args.qa);
    const auto questions = load_questions(args.qa.questions);
    const auto store = make_store(load_corpus(*c.corpus));
    auto retriever = open_retriever(c);
    auto backend = make_backend(c.backend);
    const auto records = answer_questions(questions, retriever, c.mode, c.k, store, c.generation, *backend);

    std::string text;
    std::vector<std::string> failed;
    for (const auto& r : records) {
        if (r.answer) {
            text += r.to_json(c.generation.task).dump() + "\n";
        } else {
            failed.push_back(r.id);
            err << "error: question " << r.id << ": " << r.error << '\n';
        }
    }
    emit(args.out_path, text, out);
    write_request_log(c, *backend);
    if (!failed.empty()) {
        err << "failed ids:";
        for (const auto& id : failed) err << ' ' << id;
        err << '\n';
        return kExitPartial;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ClosedScore {
    double accuracy = 0.0;
    std::size_t total = 0;
    std::size_t missing = 0;
    std::size_t unparsable = 0;
};

std::string normalize_gold(const std::string& gold, OptionSet set) {
    if (auto label = parse_closed_answer(gold, set)) return *label;
    return gold;
}

ClosedScore score_closed(const std::map<std::string, std::string>& gold,
                         const std::map<std::string, std::pair<std::string, OptionSet>>& answers, OptionSet fallback) {
    std::vector<std::optional<std::string>> preds;
    std::vector<std::string> golds;
    ClosedScore s;
    for (const auto& [id, g] : gold) {
        auto it = answers.find(id);
        const OptionSet set = it == answers.end() ? fallback : it->second.second;
        golds.push_back(normalize_gold(g, set));
        if (it == answers.end()) {
            ++s.missing;
            preds.emplace_back();
            continue;
        }
        auto label = parse_closed_answer(it->second.first, set);
        if (!label) ++s.unparsable;
        preds.push_back(std::move(label));
    }
    s.total = golds.size();
    s.accuracy = accuracy(preds, golds);
    return s;
}

GenMetricsReport score_generation(const std::map<std::string, std::string>& gold,
                                  const std::map<std::string, std::string>& answers, std::size_t& missing) {
    std::vector<GenPair> pairs;
    missing = 0;
    for (const auto& [id, g] : gold) {
        auto it = answers.find(id);
        if (it == answers.end()) ++missing;
        pairs.push_back({id, it == answers.end() ? std::string{} : it->second, g});
    }
    return evaluate_generation(pairs);
}

struct EvalQaArgs {
    std::string answers;
    std::string gold;
    std::string pairs;
    std::string task = "closed_ended";
    std::string option_set = "abcd";
    std::string json_out;
};

int cmd_eval_pairs(const EvalQaArgs& args, std::ostream& out) {
    require_file(fs::path(args.pairs), "pairs file");
    const auto pairs = load_gen_pairs(args.pairs);
    const auto r = evaluate_generation(pairs);
    out << r.to_table();
    if (!args.json_out.empty()) {
        nlohmann::ordered_json report;
        report["generation"] = r.to_json();
        write_file_atomic(args.json_out, report.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_eval_qa(const EvalQaArgs& args, std::ostream& out, std::ostream& err) {
    if (!args.pairs.empty()) {
        if (!args.answers.empty() || !args.gold.empty()) throw ConfigError("--pairs excludes --answers and --gold");
        return cmd_eval_pairs(args, out);
    }
    if (args.answers.empty() || args.gold.empty()) throw ConfigError("--answers and --gold are required");
    require_file(fs::path(args.answers), "answers file");
    require_file(fs::path(args.gold), "gold file");
    const auto task = parse_task(args.task);
    const auto fallback = parse_option_set(args.option_set);
    const auto gold = load_gold(args.gold);
    if (gold.empty()) throw InputError("gold file is empty: " + args.gold);

    std::map<std::string, std::pair<std::string, OptionSet>> answers;
    const auto text = read_text_file(args.answers);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto& idj = j.at("id");
            std::string id = idj.is_string() ? idj.get<std::string>() : idj.dump();
            if (j.value("text", nlohmann::json()).is_null()) continue;
            auto set = j.contains("option_set") ? parse_option_set(j.at("option_set").get<std::string>()) : fallback;
            if (!gold.contains(id)) err << "warning: answer " << id << " has no gold label; ignored\n";
            answers[id] = {j.at("text").get<std::string>(), set};
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(args.answers + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }

    nlohmann::ordered_json report;
    report["task"] = to_string(task);
    std::size_t missing = 0;
    if (task == Task::closed_ended) {
        const auto s = score_closed(gold, answers, fallback);
        missing = s.missing;
        out << fmt::format("{:<16}{:>10}\n", "Metric", "Value");
        out << fmt::format("{:<16}{:>10.2f}\n", "Accuracy", s.accuracy * 100.0);
        out << fmt::format("{:<16}{:>10}\n", "items", s.total);
        out << fmt::format("{:<16}{:>10}\n", "missing", s.missing);
        out << fmt::format("{:<16}{:>10}\n", "unparsable", s.unparsable);
        report["accuracy"] = s.accuracy * 100.0;
        report["items"] = s.total;
        report["missing"] = s.missing;
        report["unparsable"] = s.unparsable;
    } else {
        std::map<std::string, std::string> texts;
        for (const auto& [id, v] : answers) texts[id] = v.first;
        const auto r = score_generation(gold, texts, missing);
        out << r.to_table();
        out << fmt::format("{:<16}{:>10}\n", "missing", missing);
        report["generation"] = r.to_json();
        report["missing"] = missing;
    }
    if (missing > 0) {
        err << "warning: " << missing << " gold ids have no answer; scored as wrong:";
        for (const auto& [id, _] : gold) {
            if (!answers.contains(id)) err << ' ' << id;
        }
        err << '\n';
    }
    if (!args.json_out.empty()) write_file_atomic(args.json_out, report.dump(2) + "\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
    QaArgs qa;
    std::string gold;
    std::string k_list = "1,2,4,8";
    std::string out_path;
};

std::vector<std::size_t> parse_k_list(const std::string& s, std::ostream& err) {
    std::vector<std::size_t> ks;
    std::set<std::size_t> seen;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        std::size_t k = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), k);
        if (ec != std::errc{} || ptr != item.data() + item.size() || k == 0) {
            throw ConfigError("bad k value '" + item + "' in --k-list");
        }
        if (!seen.insert(k).second) {
            err << "warning: duplicate k=" << k << " dropped\n";
            continue;
        }
        ks.push_back(k);
    }
    if (ks.empty()) throw ConfigError("--k-list is empty");
    return ks;
}

int cmd_sweep_topk(const SweepArgs& args, std::ostream& out, std::ostream& err) {
    const auto c = resolve_qa(args.qa);
    require_file(fs::path(args.gold), "gold file");
    const auto ks = parse_k_list(args.k_list, err);
    const auto questions = load_questions(args.qa.questions);
    const auto gold = load_gold(args.gold);
    const auto store = make_store(load_corpus(*c.corpus));
    auto retriever = open_retriever(c);
    auto backend = make_backend(c.backend);
    const Task task = c.generation.task;

    std::string csv = task == Task::closed_ended ? "k,accuracy,answered,failed\n"
                                                 : "k,rouge1,rouge2,rougeL,bleu,answered,failed\n";
    for (const std::size_t k : ks) {
        // Tags carry k so scripted replies do not leak across sweep points.
        std::vector<Question> tagged = questions;
        for (auto& q : tagged) q.id = q.id + "@k" + std::to_string(k);
        auto records = answer_questions(tagged, retriever, c.mode, k, store, c.generation, *backend);
        std::size_t answered = 0, failed = 0;
        std::map<std::string, std::pair<std::string, OptionSet>> closed;
        std::map<std::string, std::string> texts;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& id = questions[i].id;
            if (!records[i].answer) {
                ++failed;
                err << "error: k=" << k << " question " << id << ": " << records[i].error << '\n';
                continue;
            }
            ++answered;
            closed[id] = {records[i].answer->text, records[i].option_set};
            texts[id] = records[i].answer->text;
        }
        if (task == Task::closed_ended) {
            const auto s = score_closed(gold, closed, OptionSet::abcd);
            csv += fmt::format("{},{:.6f},{},{}\n", k, s.accuracy * 100.0, answered, failed);
        } else {
            std::size_t missing = 0;
            const auto r = score_generation(gold, texts, missing);
            csv += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{},{}\n", k, r.rouge1, r.rouge2, r.rougeL, r.bleu,
                               answered, failed);
        }
    }
    emit(args.out_path, csv, out);
    write_request_log(c, *backend);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ManifestArgs {
    QaArgs qa;
    std::string gold;
    std::string out_path;
    bool records = false;
};

int cmd_finetune_manifest(const ManifestArgs& args, std::ostream& out, std::ostream& err) {
    if (args.records) {
        std::string text;
        for (const auto& r : builtin_finetune_records()) text += r.to_json().dump() + "\n";
        emit(args.out_path, text, out);
        return kExitOk;
    }
    const auto c = resolve_qa(args.qa);
    require_file(fs::path(args.gold), "gold file");
    const auto questions = load_questions(args.qa.questions);
    const auto gold = load_gold(args.gold);
    const auto store = make_store(load_corpus(*c.corpus));
    auto retriever = open_retriever(c);
    const auto profile = c.generation.profile();
    std::string text;
    for (const auto& q : questions) {
        auto it = gold.find(q.id);
        if (it == gold.end()) {
            err << "warning: question " << q.id << " has no gold answer; skipped\n";
            continue;
        }
        const auto ranked = retriever.retrieve(Query{q.id, q.text}, c.mode, c.k);
        const auto bundle = build_prompt(profile, Query{q.id, q.text}, q.options, resolve_passages(ranked, store),
                                         c.generation.context_budget);
        text += finetune_manifest_line(bundle, it->second) + "\n";
    }
    emit(args.out_path, text, out);
    return kExitOk;
}

void add_qa_options(CLI::App* cmd, QaArgs& qa) {
    cmd->add_option("--config", qa.common.config, "Run configuration (JSON)");
    cmd->add_option("--corpus", qa.common.corpus, "Corpus JSONL used to resolve retrieved passages");
    cmd->add_option("--questions", qa.questions, "Questions JSONL")->required();
    cmd->add_option("--task", qa.task, "closed_ended, long_form or short_form");
    cmd->add_option("--threshold", qa.threshold, "Confidence threshold for refinement");
    cmd->add_option("--request-log", qa.request_log, "Write the mock backend's request log here");
    qa.common.add_retrieval(cmd);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"medrag: hybrid BM25 + dense retrieval, retrieval-augmented answering and IR/QA evaluation",
                 "medrag"};
    app.require_subcommand(1);

    IndexArgs index_args;
    auto* index_cmd = app.add_subcommand("index", "Build lexical and/or vector indexes from a corpus");
    index_cmd->add_option("--config", index_args.common.config, "Run configuration (JSON)");
    index_cmd->add_option("--corpus", index_args.common.corpus, "BEIR corpus.jsonl");
    index_cmd->add_option("--lexical-index", index_args.common.lexical, "Output lexical index file");
    index_cmd->add_option("--vector-index", index_args.common.vector, "Output vector index file");
    index_cmd->add_option("--batch-size", index_args.batch_size, "Encoder batch size")->capture_default_str();
    index_cmd->add_flag("--force", index_args.force, "Overwrite existing index files");

    SearchArgs search_args;
    auto* search_cmd = app.add_subcommand("search", "Retrieve documents and write a TREC run");
    search_cmd->add_option("--config", search_args.common.config, "Run configuration (JSON)");
    search_args.common.add_retrieval(search_cmd);
    auto* q_opt = search_cmd->add_option("--query", search_args.query, "Single query text");
    search_cmd->add_option("--query-id", search_args.query_id, "Id for --query")->capture_default_str();
    search_cmd->add_option("--queries", search_args.queries, "BEIR queries.jsonl")->excludes(q_opt);
    search_cmd->add_option("-o,--out", search_args.out_path, "Run file (default: stdout)");
    search_cmd->add_option("--tag", search_args.tag, "Run tag column");

    EvalRetrievalArgs er_args;
    auto* er_cmd = app.add_subcommand("eval-retrieval", "Score a TREC run against qrels");
    er_cmd->add_option("--config", er_args.config, "Run configuration (JSON)");
    er_cmd->add_option("--run", er_args.run, "TREC run file")->required();
    er_cmd->add_option("--qrels", er_args.qrels, "qrels TSV");
    er_cmd->add_option("-k,--cutoff", er_args.k, "Metric cutoff")->capture_default_str();
    er_cmd->add_option("--gain", er_args.gain, "DCG gain: linear or exponential")->capture_default_str();
    er_cmd->add_option("--json", er_args.json_out, "Also write a JSON report");

    AnswerArgs answer_args;
    auto* answer_cmd = app.add_subcommand("answer", "Retrieve context and generate answers");
    add_qa_options(answer_cmd, answer_args.qa);
    answer_cmd->add_option("-o,--out", answer_args.out_path, "Answers JSONL (default: stdout)");

    EvalQaArgs eq_args;
    auto* eq_cmd = app.add_subcommand("eval-qa", "Score answers against gold labels");
    eq_cmd->add_option("--answers", eq_args.answers, "Answers JSONL");
    eq_cmd->add_option("--gold", eq_args.gold, "Gold JSONL of {id, answer}");
    eq_cmd->add_option("--pairs", eq_args.pairs, "Score a JSONL of {id, candidate, reference} instead");
    eq_cmd->add_option("--task", eq_args.task, "closed_ended, long_form or short_form")->capture_default_str();
    eq_cmd->add_option("--option-set", eq_args.option_set, "abcd, yes_no or yes_no_maybe")->capture_default_str();
    eq_cmd->add_option("--json", eq_args.json_out, "Also write a JSON report");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep-topk", "Answer and score at several retrieval depths");
    add_qa_options(sweep_cmd, sweep_args.qa);
    sweep_cmd->add_option("--gold", sweep_args.gold, "Gold JSONL of {id, answer}")->required();
    sweep_cmd->add_option("--k-list", sweep_args.k_list, "Comma-separated k values")->capture_default_str();
    sweep_cmd->add_option("-o,--out", sweep_args.out_path, "CSV output (default: stdout)");

    ManifestArgs manifest_args;
    auto* manifest_cmd =
        app.add_subcommand("finetune-manifest", "Emit {x, y} fine-tuning pairs, or the reference run records");
    manifest_cmd->add_option("--config", manifest_args.qa.common.config, "Run configuration (JSON)");
    manifest_cmd->add_option("--corpus", manifest_args.qa.common.corpus, "Corpus JSONL");
    manifest_cmd->add_option("--questions", manifest_args.qa.questions, "Questions JSONL");
    manifest_cmd->add_option("--task", manifest_args.qa.task, "closed_ended, long_form or short_form");
    manifest_cmd->add_option("--gold", manifest_args.gold, "Gold JSONL of {id, answer}");
    manifest_cmd->add_option("-o,--out", manifest_args.out_path, "JSONL output (default: stdout)");
    manifest_cmd->add_flag("--records", manifest_args.records, "Print the reference fine-tuning configurations");
    manifest_args.qa.common.add_retrieval(manifest_cmd);

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.emplace_back("medrag");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*index_cmd) return cmd_index(index_args, out, err);
        if (*search_cmd) return cmd_search(search_args, out, err);
        if (*er_cmd) return cmd_eval_retrieval(er_args, out, err);
        if (*answer_cmd) return cmd_answer(answer_args, out, err);
        if (*eq_cmd) return cmd_eval_qa(eq_args, out, err);
        if (*sweep_cmd) return cmd_sweep_topk(sweep_args, out, err);
        if (*manifest_cmd) {
            if (!manifest_args.records && (manifest_args.qa.questions.empty() || manifest_args.gold.empty())) {
                throw ConfigError("--questions and --gold are required unless --records is given");
            }
            return cmd_finetune_manifest(manifest_args, out, err);
        }
    } catch (const TransportError& e) {
        err << "error: " << e.what() << '\n';
        return kExitPartial;
    } catch (const EmptyAnswerError& e) {
        err << "error: " << e.what() << '\n';
        return kExitPartial;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace medrag::cli
