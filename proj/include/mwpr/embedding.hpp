#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mwpr {

struct Embedding {
    std::vector<double> values;
    bool normalized = false;
};

// Trainable two-layer projection applied on top of frozen base embeddings.
// Matrices are row-major: w1[i * d_h + j] is W1[i][j]. Activation is tanh,
// the output is L2-normalized.
struct PoolerParams {
    std::size_t d_in = 0;
    std::size_t d_h = 0;
    std::size_t d_out = 0;
    std::vector<double> w1;  // d_in x d_h
    std::vector<double> b1;  // d_h
    std::vector<double> w2;  // d_h x d_out
    std::vector<double> b2;  // d_out

    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
};

double l2_norm(const std::vector<double>& values);
void l2_normalize_inplace(std::vector<double>& values);
bool all_finite(const std::vector<double>& values);

// Deterministic base featurizer: character {2,3}-gram counts with sign hashing
// into d buckets (FNV-1a), L2-normalized. Identical output across runs and
// platforms. Throws EmptyTextError; d must be >= 8.
Embedding embed_hashed(const std::string& text, std::size_t d);

// out = L2normalize(W2^T tanh(W1^T e + b1) + b2).
// Throws DimensionMismatchError or NonFiniteError.
Embedding pooler_forward(const Embedding& e, const PoolerParams& p);

// Throws DimensionMismatchError or ZeroVectorError.
double cosine_similarity(const Embedding& a, const Embedding& b);

// Identity-preserving initialization: unit diagonals plus small uniform noise,
// so an untrained pooler behaves like the base embedding. Deterministic under
// seed.
PoolerParams init_pooler(std::size_t d_in, std::size_t d_h, std::size_t d_out, std::uint64_t seed,
                         double noise_scale = 0.01);

// Stable fingerprint of a parameter set, used in index provenance.
std::string pooler_fingerprint(const PoolerParams& p);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string id() const = 0;
    virtual bool deterministic() const = 0;
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;

    Embedding embed_one(const std::string& text);
};

class HashedNgramProvider final : public EmbeddingProvider {
public:
    explicit HashedNgramProvider(std::size_t d);
    std::size_t dim() const override { return d_; }
    std::string id() const override;
    bool deterministic() const override { return true; }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

private:
    std::size_t d_;
};

struct EmbedEndpoint {
    std::string base_url;            // e.g. "http://127.0.0.1:8089"
    std::string path = "/v1/embeddings";
    std::string model;
    std::string api_key;             // falls back to EMBED_API_KEY
    std::size_t max_batch = 64;
    int timeout_seconds = 30;
    int max_retries = 3;
    std::size_t expected_dim = 0;    // 0 = accept whatever the service returns
};

// Client for the embeddings wire contract:
//   POST {"input": [texts], "model": m} -> {"data": [{"index": i, "embedding": [..]}]}
// Responses are reassembled in input order and L2-normalized on receipt.
// Transport failures are retried with exponential backoff (max_retries).
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(EmbedEndpoint endpoint);
    std::size_t dim() const override { return endpoint_.expected_dim; }
    std::string id() const override;
    bool deterministic() const override { return false; }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

private:
    EmbedEndpoint endpoint_;
};

// Memoizes deterministic providers; remote (non-deterministic) providers are
// passed through untouched. Cache keys are (provider id, text hash).
class CachingProvider final : public EmbeddingProvider {
public:
    explicit CachingProvider(std::shared_ptr<EmbeddingProvider> inner);
    std::size_t dim() const override { return inner_->dim(); }
    std::string id() const override { return inner_->id(); }
    bool deterministic() const override { return inner_->deterministic(); }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::unordered_map<std::uint64_t, Embedding> cache_;
};

}  // namespace mwpr
