#include "medrag/semantic.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

#include "medrag/errors.hpp"
#include "medrag/fileio.hpp"

namespace medrag {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

namespace {

constexpr char kVectorMagic[4] = {'M', 'R', 'V', 'I'};
constexpr std::uint32_t kVectorVersion = 1;

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos; }

template <typename A, typename B>
double cosine_impl(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size()) {
        throw InputError("cosine_sim: dimension mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) {
        throw InputError("cosine_sim: zero-norm operand");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

template <typename T>
void put_raw(std::string& out, const T& v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(std::string_view& in) {
    if (in.size() < sizeof(T)) {
        throw ParseError("vector index: truncated file");
    }
    T v;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return v;
}

}  // namespace

double Embedding::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

bool Embedding::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double cosine_sim(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }
double cosine_sim(std::span<const double> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine_sim(const Embedding& a, const Embedding& b) {
    return cosine_impl(std::span<const double>(a.values), std::span<const double>(b.values));
}

Embedding Encoder::encode(std::string_view text) {
    std::string s(text);
    return std::move(encode_batch(std::span<const std::string>(&s, 1)).front());
}

std::vector<Embedding> Encoder::encode_batch(std::span<const std::string> texts) {
    for (const auto& t : texts) {
        if (blank(t)) {
            throw InputError("cannot encode empty text");
        }
    }
    auto out = encode_checked(texts);
    if (out.size() != texts.size()) {
        throw IntegrityError(name() + ": returned " + std::to_string(out.size()) + " vectors for " +
                             std::to_string(texts.size()) + " inputs");
    }
    for (const auto& e : out) {
        if (e.dim() != dim()) {
            throw IntegrityError(name() + ": expected dimension " + std::to_string(dim()) + ", got " +
                                 std::to_string(e.dim()));
        }
        if (!e.all_finite()) {
            throw IntegrityError(name() + ": non-finite embedding value");
        }
    }
    return out;
}

std::uint32_t fnv1a32(std::string_view bytes) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

LocalTestEncoder::LocalTestEncoder(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InputError("encoder dimension must be positive");
}

std::size_t LocalTestEncoder::bucket(std::string_view trigram) const { return fnv1a32(trigram) % dim_; }

std::vector<Embedding> LocalTestEncoder::encode_checked(std::span<const std::string> texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> counts(dim_, 0.0);
        for (const auto& token : tokenize(text)) {
            std::u32string padded = U" " + utf8::decode(token) + U" ";
            for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
                counts[bucket(utf8::encode(std::u32string_view(padded).substr(i, 3)))] += 1.0;
            }
        }
        double sq = 0.0;
        for (double c : counts) sq += c * c;
        if (sq > 0.0) {
            const double n = std::sqrt(sq);
            for (double& c : counts) c /= n;
        }
        out.push_back(Embedding{std::move(counts)});
    }
    return out;
}

EmbeddingCache::EmbeddingCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {}

std::string EmbeddingCache::key(std::string_view model, std::size_t dim, std::string_view text) {
    std::string material;
    material.append(model);
    material.push_back('\0');
    material.append(std::to_string(dim));
    material.push_back('\0');
    material.append(text);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::filesystem::path EmbeddingCache::file_for(const std::string& key) const {
    return *dir_ / key.substr(0, 2) / (key + ".f64");
}

std::optional<Embedding> EmbeddingCache::get(const std::string& key) {
    {
        std::lock_guard lock(mu_);
        if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    std::ifstream in(file_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(double) != 0 || bytes.empty()) return std::nullopt;
    Embedding e;
    e.values.resize(bytes.size() / sizeof(double));
    std::memcpy(e.values.data(), bytes.data(), bytes.size());
    std::lock_guard lock(mu_);
    memory_.emplace(key, e);
    return e;
}

void EmbeddingCache::put(const std::string& key, const Embedding& e) {
    {
        std::lock_guard lock(mu_);
        memory_.insert_or_assign(key, e);
    }
    if (!dir_) return;
    std::string bytes(e.values.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), e.values.data(), bytes.size());
    write_file_atomic(file_for(key), bytes);
}

std::size_t EmbeddingCache::memory_size() const {
    std::lock_guard lock(mu_);
    return memory_.size();
}

RemoteEncoder::RemoteEncoder(RemoteEncoderSettings settings)
    : settings_(std::move(settings)), client_(settings_.endpoint, settings_.timeout, settings_.retry),
      cache_(settings_.cache_dir) {
    if (settings_.dim == 0) throw ConfigError("remote encoder needs a positive dim");
    if (settings_.batch_size == 0) settings_.batch_size = 1;
    if (settings_.max_in_flight == 0) settings_.max_in_flight = 1;
}

std::size_t RemoteEncoder::requests_sent() const {
    std::lock_guard lock(stats_mu_);
    return requests_sent_;
}

std::vector<Embedding> RemoteEncoder::post_batch(std::span<const std::string> texts) {
    nlohmann::json req{{"model", settings_.model}, {"inputs", std::vector<std::string>(texts.begin(), texts.end())}};
    std::map<std::string, std::string> headers;
    if (!settings_.api_key.empty()) headers["Authorization"] = "Bearer " + settings_.api_key;
    {
        std::lock_guard lock(stats_mu_);
        ++requests_sent_;
    }
    auto res = client_.post(req.dump(), headers);
    if (res.status < 200 || res.status >= 300) {
        throw TransportError("embedding endpoint returned HTTP " + std::to_string(res.status));
    }
    std::vector<Embedding> out;
    try {
        auto j = nlohmann::json::parse(res.body);
        const auto& vectors = j.at("vectors");
        if (vectors.size() != texts.size()) {
            throw IntegrityError("embedding endpoint returned " + std::to_string(vectors.size()) + " vectors for " +
                                 std::to_string(texts.size()) + " inputs");
        }
        for (const auto& v : vectors) {
            Embedding e{v.get<std::vector<double>>()};
            if (e.dim() != settings_.dim) {
                throw IntegrityError("embedding endpoint returned dimension " + std::to_string(e.dim()) +
                                     ", expected " + std::to_string(settings_.dim));
            }
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

std::vector<Embedding> RemoteEncoder::encode_checked(std::span<const std::string> texts) {
    std::vector<Embedding> out(texts.size());
    std::vector<std::string> keys(texts.size());
    // Unique texts missing from the cache, in first-seen order.
    std::vector<std::string> pending;
    std::unordered_map<std::string, std::size_t> pending_slot;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = EmbeddingCache::key(settings_.model, settings_.dim, texts[i]);
        if (auto hit = cache_.get(keys[i])) {
            out[i] = std::move(*hit);
        } else if (!pending_slot.contains(texts[i])) {
            pending_slot.emplace(texts[i], pending.size());
            pending.push_back(texts[i]);
        }
    }
    if (pending.empty()) return out;

    const std::size_t batches = (pending.size() + settings_.batch_size - 1) / settings_.batch_size;
    std::vector<std::vector<Embedding>> results(batches);
    std::vector<std::exception_ptr> errors(batches);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next++; b < batches; b = next++) {
            const std::size_t begin = b * settings_.batch_size;
            const std::size_t len = std::min(settings_.batch_size, pending.size() - begin);
            try {
                results[b] = post_batch(std::span<const std::string>(pending).subspan(begin, len));
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(settings_.max_in_flight, batches);
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<const Embedding*> fresh(pending.size());
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < results[b].size(); ++i) fresh[b * settings_.batch_size + i] = &results[b][i];
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (!out[i].values.empty()) continue;
        const auto& e = *fresh[pending_slot.at(texts[i])];
        out[i] = e;
    }
    for (std::size_t p = 0; p < pending.size(); ++p) {
        cache_.put(EmbeddingCache::key(settings_.model, settings_.dim, pending[p]), *fresh[p]);
    }
    return out;
}

VectorIndex::VectorIndex(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InputError("vector index dimension must be positive");
}

void VectorIndex::add(std::string doc_id, const Embedding& e) {
    if (e.dim() != dim_) {
        throw IntegrityError("doc " + doc_id + ": dimension " + std::to_string(e.dim()) + " != index dimension " +
                             std::to_string(dim_));
    }
    if (!e.all_finite()) {
        throw IntegrityError("doc " + doc_id + ": non-finite embedding");
    }
    std::vector<float> values(e.values.begin(), e.values.end());
    double sq = 0.0;
    for (float v : values) sq += static_cast<double>(v) * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        throw IntegrityError("doc " + doc_id + ": zero-norm embedding");
    }
    if (ids_.contains(doc_id)) {
        throw IntegrityError("duplicate doc id " + doc_id + " in vector index");
    }
    ids_.emplace(doc_id, entries_.size());
    entries_.push_back({std::move(doc_id), std::move(values)});
}

std::string VectorIndex::serialize() const {
    std::string out;
    out.append(kVectorMagic, 4);
    put_raw(out, kVectorVersion);
    put_raw(out, static_cast<std::uint32_t>(dim_));
    put_raw(out, static_cast<std::uint64_t>(entries_.size()));
    for (const auto& e : entries_) {
        put_raw(out, static_cast<std::uint32_t>(e.doc_id.size()));
        out.append(e.doc_id);
        for (float v : e.values) put_raw(out, v);
    }
    return out;
}

VectorIndex VectorIndex::deserialize(std::string_view in) {
    if (in.size() < 4 || std::memcmp(in.data(), kVectorMagic, 4) != 0) {
        throw ParseError("not a vector index file");
    }
    in.remove_prefix(4);
    const auto version = get_raw<std::uint32_t>(in);
    if (version != kVectorVersion) {
        throw ParseError("unsupported vector index version " + std::to_string(version));
    }
    const auto dim = get_raw<std::uint32_t>(in);
    const auto count = get_raw<std::uint64_t>(in);
    VectorIndex index(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = get_raw<std::uint32_t>(in);
        if (in.size() < len) throw ParseError("vector index: truncated doc id");
        std::string id(in.substr(0, len));
        in.remove_prefix(len);
        Embedding e;
        e.values.resize(dim);
        for (auto& v : e.values) v = get_raw<float>(in);
        index.add(std::move(id), e);
    }
    if (!in.empty()) throw ParseError("vector index: trailing bytes");
    return index;
}

void VectorIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

VectorIndex VectorIndex::load(const std::filesystem::path& path) { return deserialize(read_text_file(path)); }

namespace {

[[noreturn]] void rethrow_for_doc(const std::string& doc_id) {
    try {
        throw;
    } catch (const TransportError& e) {
        throw TransportError("doc " + doc_id + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError("doc " + doc_id + ": " + e.what());
    } catch (const IntegrityError& e) {
        throw IntegrityError("doc " + doc_id + ": " + e.what());
    }
}

}  // namespace

VectorIndex build_vector_index(Encoder& encoder, std::span<const Document> docs, std::size_t batch_size) {
    if (docs.empty()) throw InputError("cannot index an empty corpus");
    if (batch_size == 0) batch_size = 1;
    std::vector<const Document*> order;
    for (const auto& d : docs) order.push_back(&d);
    std::sort(order.begin(), order.end(), [](const Document* a, const Document* b) { return a->id < b->id; });

    VectorIndex index(encoder.dim());
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(order.size(), begin + batch_size);
        std::vector<std::string> texts;
        for (std::size_t i = begin; i < end; ++i) {
            texts.push_back(order[i]->indexable_text());
            if (blank(texts.back())) {
                throw InputError("doc " + order[i]->id + ": empty text");
            }
        }
        std::vector<Embedding> vecs;
        try {
            vecs = encoder.encode_batch(texts);
        } catch (const Error&) {
            // Narrow the failure to one document.
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    encoder.encode(texts[i - begin]);
                } catch (const Error&) {
                    rethrow_for_doc(order[i]->id);
                }
            }
            throw;
        }
        for (std::size_t i = begin; i < end; ++i) {
            index.add(order[i]->id, vecs[i - begin]);
        }
    }
    return index;
}

RankedList semantic_search(const VectorIndex& index, const Embedding& query, std::size_t k, std::string query_id) {
    if (k == 0) throw InputError("k must be >= 1");
    if (query.dim() != index.dim()) {
        throw InputError("query dimension " + std::to_string(query.dim()) + " != index dimension " +
                         std::to_string(index.dim()));
    }
    if (index.empty()) return RankedList{std::move(query_id), {}};
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(index.size());
    for (const auto& e : index.entries()) {
        scored.emplace_back(e.doc_id, cosine_sim(std::span<const double>(query.values), std::span<const float>(e.values)));
    }
    return RankedList::from_scores(std::move(query_id), std::move(scored), k);
}

}  // namespace medrag
