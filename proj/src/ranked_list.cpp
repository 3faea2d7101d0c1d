#include "medrag/ranked_list.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <set>
#include <sstream>

#include "medrag/errors.hpp"

namespace medrag {

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

RankedList RankedList::from_scores(std::string query_id, std::vector<std::pair<std::string, double>> scored,
                                   std::size_t k) {
    auto better = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    RankedList out;
    out.query_id = std::move(query_id);
    out.entries.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out.entries.push_back({std::move(scored[i].first), scored[i].second, i + 1});
    }
    return out;
}

void RankedList::validate() const {
    std::set<std::string_view> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.rank != i + 1) {
            throw IntegrityError("query " + query_id + ": rank " + std::to_string(e.rank) + " at position " +
                                 std::to_string(i + 1));
        }
        if (i > 0 && e.score > entries[i - 1].score) {
            throw IntegrityError("query " + query_id + ": score increases at rank " + std::to_string(e.rank));
        }
        if (!seen.insert(e.doc_id).second) {
            throw IntegrityError("query " + query_id + ": duplicate doc " + e.doc_id);
        }
    }
}

void write_trec_run(std::ostream& out, const std::vector<RankedList>& runs, std::string_view tag) {
    for (const auto& list : runs) {
        for (const auto& e : list.entries) {
            out << list.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << shortest(e.score) << ' ' << tag
                << '\n';
        }
    }
}

std::string format_trec_run(const std::vector<RankedList>& runs, std::string_view tag) {
    std::ostringstream ss;
    write_trec_run(ss, runs, tag);
    return ss.str();
}

std::map<std::string, RankedList> parse_trec_run(std::string_view text) {
    struct Row {
        std::size_t rank;
        double score;
        std::string doc;
    };
    std::map<std::string, std::vector<Row>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string qid, q0, doc, rank_s, score_s, tag;
        if (!(ls >> qid)) continue;
        if (!(ls >> q0 >> doc >> rank_s >> score_s)) {
            throw ParseError("run line " + std::to_string(line_no) + ": expected `qid Q0 docid rank score tag`");
        }
        Row row{};
        row.doc = doc;
        auto r1 = std::from_chars(rank_s.data(), rank_s.data() + rank_s.size(), row.rank);
        auto r2 = std::from_chars(score_s.data(), score_s.data() + score_s.size(), row.score);
        if (r1.ec != std::errc{} || r1.ptr != rank_s.data() + rank_s.size() || r2.ec != std::errc{} ||
            r2.ptr != score_s.data() + score_s.size()) {
            throw ParseError("run line " + std::to_string(line_no) + ": bad rank or score");
        }
        rows[qid].push_back(std::move(row));
    }
    std::map<std::string, RankedList> out;
    for (auto& [qid, list] : rows) {
        std::sort(list.begin(), list.end(), [](const Row& a, const Row& b) {
            if (a.rank != b.rank) return a.rank < b.rank;
            if (a.score != b.score) return a.score > b.score;
            return a.doc < b.doc;
        });
        RankedList rl;
        rl.query_id = qid;
        std::set<std::string> seen;
        for (auto& r : list) {
            if (!seen.insert(r.doc).second) {
                throw ParseError("run: duplicate doc " + r.doc + " for query " + qid);
            }
            rl.entries.push_back({std::move(r.doc), r.score, rl.entries.size() + 1});
        }
        out.emplace(qid, std::move(rl));
    }
    return out;
}

}  // namespace medrag
