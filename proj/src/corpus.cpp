#include "medrag/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "medrag/errors.hpp"

namespace medrag {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Calls fn(line_number, line) for every line, stripping a trailing '\r'.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        fn(line_no, line);
        if (nl == std::string_view::npos) {
            break;
        }
        text.remove_prefix(nl + 1);
    }
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string string_field(const nlohmann::json& obj, const char* key, bool required, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (required) {
            throw ParseError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
        }
        return {};
    }
    if (!it->is_string()) {
        throw ParseError("line " + std::to_string(line_no) + ": field '" + key + "' is not a string");
    }
    return it->get<std::string>();
}

nlohmann::json parse_json_line(std::string_view line, std::size_t line_no) {
    try {
        auto obj = nlohmann::json::parse(line);
        if (!obj.is_object()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
        }
        return obj;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
}

// Unicode classification. Letters, digits and combining marks are word
// characters; punctuation, symbols, spaces and controls separate words.
bool is_separator(char32_t c) {
    if (c < 0x80) {
        return !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'));
    }
    if (c <= 0xBF) {
        return c != 0xAA && c != 0xB5 && c != 0xBA;
    }
    if (c == 0xD7 || c == 0xF7) return true;
    if (c >= 0x02C2 && c <= 0x02FF) return c != 0x02E0 && c != 0x02E1 && c != 0x02E2 && c != 0x02E3 && c != 0x02E4 && c != 0x02EC && c != 0x02EE;
    if (c == 0x037E || c == 0x0387 || c == 0x0375 || c == 0x0384 || c == 0x0385) return true;
    if (c == 0x0482) return true;
    if ((c >= 0x055A && c <= 0x055F) || c == 0x0589 || c == 0x058A) return true;
    if (c == 0x05BE || c == 0x05C0 || c == 0x05C3 || c == 0x05C6 || c == 0x05F3 || c == 0x05F4) return true;
    if (c == 0x060C || c == 0x061B || c == 0x061F || (c >= 0x066A && c <= 0x066D) || c == 0x06D4) return true;
    if (c >= 0x2000 && c <= 0x2BFF) return true;
    if (c >= 0x2E00 && c <= 0x2E7F) return true;
    if (c >= 0x3000 && c <= 0x303F) return true;
    if (c >= 0xE000 && c <= 0xF8FF) return true;
    if (c >= 0xFE10 && c <= 0xFE1F) return true;
    if (c >= 0xFE30 && c <= 0xFE6F) return true;
    if (c == 0xFEFF) return true;
    if ((c >= 0xFF00 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
        (c >= 0xFF5B && c <= 0xFF65)) {
        return true;
    }
    if (c >= 0xFFF0 && c <= 0xFFFF) return true;
    if (c >= 0x1F000 && c <= 0x1FAFF) return true;
    return false;
}

// Ideographic scripts have no spaces; each character is its own word.
bool is_standalone(char32_t c) {
    return (c >= 0x3040 && c <= 0x30FF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x4E00 && c <= 0x9FFF) ||
           (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x20000 && c <= 0x2FFFF);
}

char32_t to_lower(char32_t c) {
    if (c < 0x80) {
        return (c >= 'A' && c <= 'Z') ? c + 0x20 : c;
    }
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
    if (c >= 0x0100 && c <= 0x017F) {
        if (c == 0x0130) return U'i';
        if (c == 0x0178) return 0xFF;
        bool even_upper = (c <= 0x012F) || (c >= 0x0132 && c <= 0x0137) || (c >= 0x014A && c <= 0x0177);
        bool odd_upper = (c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E);
        if ((even_upper && c % 2 == 0) || (odd_upper && c % 2 == 1)) return c + 1;
        return c;
    }
    if (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) return c + 0x20;
    if (c == 0x0386) return 0x03AC;
    if (c >= 0x0388 && c <= 0x038A) return c + 0x25;
    if (c == 0x038C) return 0x03CC;
    if (c == 0x038E || c == 0x038F) return c + 0x3F;
    if (c >= 0x0410 && c <= 0x042F) return c + 0x20;
    if (c >= 0x0400 && c <= 0x040F) return c + 0x50;
    if (((c >= 0x0460 && c <= 0x0481) || (c >= 0x048A && c <= 0x04BF) || (c >= 0x04D0 && c <= 0x04FF)) && c % 2 == 0) {
        return c + 1;
    }
    if (c == 0x04C0) return 0x04CF;
    if (c >= 0x04C1 && c <= 0x04CE && c % 2 == 1) return c + 1;
    if (c >= 0x0531 && c <= 0x0556) return c + 0x30;
    if (c >= 0x1E00 && c <= 0x1EFF && c % 2 == 0) return c + 1;
    if (c >= 0xFF21 && c <= 0xFF3A) return c + 0x20;
    return c;
}

std::optional<int> parse_int(std::string_view s) {
    int value = 0;
    auto* first = s.data();
    auto* last = s.data() + s.size();
    if (first != last && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last) {
        return std::nullopt;
    }
    return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

}  // namespace

std::string Document::indexable_text() const {
    if (title.empty()) return body;
    if (body.empty()) return title;
    return title + " " + body;
}

void RelevanceJudgments::add(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) {
        throw IntegrityError("negative relevance grade " + std::to_string(grade) + " for (" + query_id + ", " +
                             doc_id + ")");
    }
    auto [it, inserted] = entries_[query_id].emplace(doc_id, grade);
    if (!inserted) {
        throw IntegrityError("duplicate judgment for (" + query_id + ", " + doc_id + ")");
    }
}

int RelevanceJudgments::grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = entries_.find(query_id);
    if (q == entries_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
}

const RelevanceJudgments::Grades* RelevanceJudgments::find(const std::string& query_id) const {
    auto q = entries_.find(query_id);
    return q == entries_.end() ? nullptr : &q->second;
}

std::size_t RelevanceJudgments::relevant_count(const std::string& query_id) const {
    const auto* grades = find(query_id);
    if (grades == nullptr) return 0;
    return static_cast<std::size_t>(
        std::count_if(grades->begin(), grades->end(), [](const auto& kv) { return kv.second >= 1; }));
}

std::vector<Document> parse_corpus(std::string_view jsonl) {
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
        if (is_blank(line)) return;
        auto obj = parse_json_line(line, line_no);
        Document doc{string_field(obj, "_id", true, line_no), string_field(obj, "title", false, line_no),
                     string_field(obj, "text", true, line_no)};
        if (doc.id.empty()) {
            throw IntegrityError("line " + std::to_string(line_no) + ": empty document id");
        }
        if (doc.body.empty() && doc.title.empty()) {
            throw IntegrityError("line " + std::to_string(line_no) + ": document " + doc.id +
                                 " has neither title nor text");
        }
        if (!seen.insert(doc.id).second) {
            throw IntegrityError("line " + std::to_string(line_no) + ": duplicate document id " + doc.id);
        }
        docs.push_back(std::move(doc));
    });
    return docs;
}

std::vector<Query> parse_queries(std::string_view jsonl) {
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
        if (is_blank(line)) return;
        auto obj = parse_json_line(line, line_no);
        Query q{string_field(obj, "_id", true, line_no), string_field(obj, "text", true, line_no)};
        if (q.id.empty()) {
            throw IntegrityError("line " + std::to_string(line_no) + ": empty query id");
        }
        if (q.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw IntegrityError("line " + std::to_string(line_no) + ": query " + q.id + " has empty text");
        }
        if (!seen.insert(q.id).second) {
            throw IntegrityError("line " + std::to_string(line_no) + ": duplicate query id " + q.id);
        }
        queries.push_back(std::move(q));
    });
    return queries;
}

RelevanceJudgments parse_qrels(std::string_view tsv) {
    RelevanceJudgments qrels;
    bool first = true;
    for_each_line(tsv, [&](std::size_t line_no, std::string_view line) {
        if (is_blank(line)) return;
        auto cols = split_ws(line);
        bool was_first = first;
        first = false;
        if (was_first && !cols.empty() &&
            std::none_of(cols.back().begin(), cols.back().end(), [](char c) { return c >= '0' && c <= '9'; })) {
            return;  // header row
        }
        std::string_view qid, did, score;
        if (cols.size() == 3) {
            qid = cols[0], did = cols[1], score = cols[2];
        } else if (cols.size() == 4) {
            qid = cols[0], did = cols[2], score = cols[3];
        } else {
            throw ParseError("qrels line " + std::to_string(line_no) + ": expected 3 or 4 columns, got " +
                             std::to_string(cols.size()));
        }
        auto grade = parse_int(score);
        if (!grade) {
            throw ParseError("qrels line " + std::to_string(line_no) + ": non-integer grade '" + std::string(score) +
                             "'");
        }
        qrels.add(std::string(qid), std::string(did), *grade);
    });
    return qrels;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    switch (format) {
        case CorpusFormat::beir_jsonl:
            return parse_corpus(read_file(path));
    }
    throw InputError("unsupported corpus format");
}

std::vector<Query> load_queries(const std::filesystem::path& path) { return parse_queries(read_file(path)); }

RelevanceJudgments load_qrels(const std::filesystem::path& path) { return parse_qrels(read_file(path)); }

std::string serialize_corpus(const std::vector<Document>& docs) {
    std::string out;
    for (const auto& d : docs) {
        nlohmann::ordered_json obj{{"_id", d.id}, {"title", d.title}, {"text", d.body}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

TokenStream tokenize(std::string_view text) {
    TokenStream tokens;
    std::u32string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(utf8::encode(current));
            current.clear();
        }
    };
    for (char32_t c : utf8::decode(text)) {
        if (is_separator(c)) {
            flush();
        } else if (is_standalone(c)) {
            flush();
            current.push_back(c);
            flush();
        } else {
            current.push_back(to_lower(c));
        }
    }
    flush();
    return tokens;
}

namespace utf8 {

std::u32string decode(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        auto b0 = static_cast<unsigned char>(text[i]);
        int len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1, cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2, cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3, cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4, cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + static_cast<std::size_t>(len) <= text.size();
        for (int k = 1; ok && k < len; ++k) {
            auto b = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

std::string encode(std::u32string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t c : text) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

std::size_t length(std::string_view text) {
    return static_cast<std::size_t>(std::count_if(
        text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string_view prefix(std::string_view text, std::size_t max_chars) {
    std::size_t chars = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
            if (chars == max_chars) return text.substr(0, i);
            ++chars;
        }
    }
    return text;
}

}  // namespace utf8

}  // namespace medrag
