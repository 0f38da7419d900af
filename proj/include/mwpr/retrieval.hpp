#pragma once

#include "mwpr/corpus.hpp"
#include "mwpr/embedding.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mwpr {

struct IndexProvenance {
    std::string provider_id;
    std::string pooler = "none";  // checkpoint fingerprint or "none"
};

struct ScoredHit {
    Problem problem;
    double score = 0.0;
};

struct TopkResult {
    std::vector<ScoredHit> hits;
    bool truncated = false;  // fewer than k entries were available
};

// Exact brute-force cosine index over a question-solution corpus. Entries are
// unit-norm pooled embeddings stored in corpus order; queries run through the
// same provider and optional pooler the index was built with. Immutable after
// build; concurrent queries are safe.
class RetrievalIndex {
public:
    static RetrievalIndex build(const std::vector<Problem>& corpus,
                                std::shared_ptr<EmbeddingProvider> provider,
                                std::optional<PoolerParams> pooler);

    // Top-k by cosine similarity, descending; ties broken by ascending corpus
    // position. With exclude_exact_question, entries whose question is
    // byte-equal to the query are skipped. Throws EmptyIndexError / BadKError.
    TopkResult topk(const std::string& query_text, std::size_t k, bool exclude_exact_question) const;

    TopkResult topk_embedded(const Embedding& query, std::size_t k,
                             const std::string* exclude_question = nullptr) const;

    Embedding embed_query(const std::string& query_text) const;

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const IndexProvenance& provenance() const { return provenance_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const Embedding& entry(std::size_t position) const { return embeddings_[position]; }
    const Problem& problem_at(std::size_t position) const;

    void save_json(const std::string& path) const;
    void save_binary(const std::string& path) const;

    // Reattaches a persisted index to its corpus and embedding pipeline. The
    // provider id must match the stored provenance. Format is sniffed from the
    // file header (JSON or packed binary).
    static RetrievalIndex load(const std::string& path, const std::vector<Problem>& corpus,
                               std::shared_ptr<EmbeddingProvider> provider,
                               std::optional<PoolerParams> pooler);

private:
    RetrievalIndex() = default;

    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<Embedding> embeddings_;
    std::vector<Problem> problems_;  // corpus order, parallel to ids_
    std::shared_ptr<EmbeddingProvider> provider_;
    std::optional<PoolerParams> pooler_;
    IndexProvenance provenance_;
};

// Upper-bound retriever: top-k by normalized-Levenshtein similarity between
// the query's canonical signature and each corpus signature. Tie-breaking
// matches RetrievalIndex::topk. Throws MissingSignatureError / BadKError.
TopkResult graph_oracle_topk(const std::vector<Problem>& corpus, const std::string& query_signature,
                             std::size_t k);

// Uniform random exemplars without replacement (the random baseline).
TopkResult random_exemplars(const std::vector<Problem>& corpus, std::size_t k, std::uint64_t seed);

}  // namespace mwpr
