#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medrag/corpus.hpp"
#include "medrag/http.hpp"
#include "medrag/ranked_list.hpp"

namespace medrag {

struct Embedding {
    std::vector<double> values;

    [[nodiscard]] std::size_t dim() const { return values.size(); }
    [[nodiscard]] double norm() const;
    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Dot product over the product of norms. Throws InputError on a dimension
/// mismatch or a zero-norm operand.
double cosine_sim(std::span<const double> a, std::span<const double> b);
double cosine_sim(std::span<const double> a, std::span<const float> b);
double cosine_sim(const Embedding& a, const Embedding& b);

/// Text encoder. Equal input text always yields equal vectors.
class Encoder {
public:
    virtual ~Encoder() = default;

    [[nodiscard]] virtual std::size_t dim() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;

    /// Throws InputError for text that is empty after trimming and
    /// IntegrityError if the backend returns a wrong-sized or non-finite vector.
    Embedding encode(std::string_view text);
    std::vector<Embedding> encode_batch(std::span<const std::string> texts);

protected:
    virtual std::vector<Embedding> encode_checked(std::span<const std::string> texts) = 0;
};

/// Deterministic dependency-free encoder: character trigrams of each
/// lowercased token (padded with one space on either side), hashed with
/// 32-bit FNV-1a into `dim` buckets, counted, then L2-normalized. Text with no
/// tokens encodes to the zero vector.
class LocalTestEncoder final : public Encoder {
public:
    explicit LocalTestEncoder(std::size_t dim = 256);

    [[nodiscard]] std::size_t dim() const override { return dim_; }
    [[nodiscard]] std::string name() const override { return "local_test"; }

    /// Bucket of one trigram (UTF-8 bytes).
    [[nodiscard]] std::size_t bucket(std::string_view trigram) const;

protected:
    std::vector<Embedding> encode_checked(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
};

std::uint32_t fnv1a32(std::string_view bytes);

/// Content-addressed embedding store keyed by SHA-256 of (model, dim, text).
/// Entries live in memory and, when a directory is given, as one file per key.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::optional<std::filesystem::path> dir = std::nullopt);

    static std::string key(std::string_view model, std::size_t dim, std::string_view text);

    std::optional<Embedding> get(const std::string& key);
    void put(const std::string& key, const Embedding& e);
    [[nodiscard]] std::size_t memory_size() const;

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, Embedding> memory_;

    [[nodiscard]] std::filesystem::path file_for(const std::string& key) const;
};

struct RemoteEncoderSettings {
    std::string endpoint;
    std::string model;
    std::size_t dim = 0;
    std::string api_key;
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;
    std::optional<std::filesystem::path> cache_dir;
};

/// JSON-over-HTTP encoder: POST {model, inputs: [text]} -> {vectors: [[real]]}.
/// Requests are batched, at most `max_in_flight` run concurrently, and results
/// are returned in input order.
class RemoteEncoder final : public Encoder {
public:
    explicit RemoteEncoder(RemoteEncoderSettings settings);

    [[nodiscard]] std::size_t dim() const override { return settings_.dim; }
    [[nodiscard]] std::string name() const override { return "remote:" + settings_.model; }
    [[nodiscard]] std::size_t requests_sent() const;
    HttpJsonClient& client() { return client_; }

protected:
    std::vector<Embedding> encode_checked(std::span<const std::string> texts) override;

private:
    RemoteEncoderSettings settings_;
    HttpJsonClient client_;
    EmbeddingCache cache_;
    mutable std::mutex stats_mu_;
    std::size_t requests_sent_ = 0;

    std::vector<Embedding> post_batch(std::span<const std::string> texts);
};

struct VectorEntry {
    std::string doc_id;
    std::vector<float> values;

    friend bool operator==(const VectorEntry&, const VectorEntry&) = default;
};

/// Exhaustive-scan vector store. Values are held as float32, the on-disk type,
/// so a saved index reloads bit-identically.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dim);

    /// Throws IntegrityError on a wrong dimension, non-finite values, a
    /// zero-norm vector or a duplicate id.
    void add(std::string doc_id, const Embedding& e);

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] const std::vector<VectorEntry>& entries() const { return entries_; }

    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);
    [[nodiscard]] std::string serialize() const;
    static VectorIndex deserialize(std::string_view bytes);

    friend bool operator==(const VectorIndex&, const VectorIndex&) = default;

private:
    std::size_t dim_;
    std::vector<VectorEntry> entries_;
    std::unordered_map<std::string, std::size_t> ids_;
};

/// Encodes every document's indexable text in batches of `batch_size`.
/// Entries are stored in ascending doc-id order. Encoder failures and
/// zero vectors are rethrown naming the offending doc id.
VectorIndex build_vector_index(Encoder& encoder, std::span<const Document> docs, std::size_t batch_size = 64);

/// Exact top-k by cosine similarity, ties by ascending doc id.
RankedList semantic_search(const VectorIndex& index, const Embedding& query, std::size_t k,
                           std::string query_id = {});

}  // namespace medrag
