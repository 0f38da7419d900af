#include "mwpr/embedding.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/rng.hpp"
#include "mwpr/util.hpp"

#include "json.hpp"

#include <cmath>
#include <cstring>

namespace mwpr {

double l2_norm(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

void l2_normalize_inplace(std::vector<double>& values) {
    double norm = l2_norm(values);
    if (norm == 0.0) throw ZeroVectorError();
    for (double& v : values) v /= norm;
}

bool all_finite(const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Embedding embed_hashed(const std::string& text, std::size_t d) {
    if (text.empty()) throw EmptyTextError();
    if (d < 8) throw DimensionMismatchError("hashed embedding dimension must be >= 8");

    // Boundary sentinels guarantee at least one n-gram for single-character texts.
    std::string padded;
    padded.reserve(text.size() + 2);
    padded.push_back('\x02');
    padded.append(text);
    padded.push_back('\x03');

    Embedding e;
    e.values.assign(d, 0.0);
    for (std::size_t n = 2; n <= 3; ++n) {
        if (padded.size() < n) continue;
        for (std::size_t i = 0; i + n <= padded.size(); ++i) {
            std::uint64_t h = fnv1a64(std::string_view(padded.data() + i, n),
                                      kFnvOffsetBasis ^ static_cast<std::uint64_t>(n));
            std::size_t bucket = static_cast<std::size_t>(h % d);
            double sign = (h >> 63) ? -1.0 : 1.0;
            e.values[bucket] += sign;
        }
    }
    double norm = l2_norm(e.values);
    if (norm == 0.0) {
        // All counts cancelled; fall back to a single deterministic bucket.
        e.values[static_cast<std::size_t>(fnv1a64(text) % d)] = 1.0;
        norm = 1.0;
    }
    for (double& v : e.values) v /= norm;
    e.normalized = true;
    return e;
}

Embedding pooler_forward(const Embedding& e, const PoolerParams& p) {
    if (e.values.size() != p.d_in) {
        throw DimensionMismatchError("pooler expects dimension " + std::to_string(p.d_in) +
                                     ", got " + std::to_string(e.values.size()));
    }
    if (p.w1.size() != p.d_in * p.d_h || p.b1.size() != p.d_h || p.w2.size() != p.d_h * p.d_out ||
        p.b2.size() != p.d_out) {
        throw DimensionMismatchError("pooler parameter shapes are inconsistent");
    }
    if (!all_finite(e.values) || !all_finite(p.w1) || !all_finite(p.b1) || !all_finite(p.w2) ||
        !all_finite(p.b2)) {
        throw NonFiniteError("pooler input or parameters contain non-finite values");
    }

    std::vector<double> hidden(p.d_h);
    for (std::size_t j = 0; j < p.d_h; ++j) {
        double z = p.b1[j];
        for (std::size_t i = 0; i < p.d_in; ++i) {
            z += p.w1[i * p.d_h + j] * e.values[i];
        }
        hidden[j] = std::tanh(z);
    }
    Embedding out;
    out.values.assign(p.d_out, 0.0);
    for (std::size_t k = 0; k < p.d_out; ++k) {
        double z = p.b2[k];
        for (std::size_t j = 0; j < p.d_h; ++j) {
            z += p.w2[j * p.d_out + k] * hidden[j];
        }
        out.values[k] = z;
    }
    double norm = l2_norm(out.values);
    if (norm == 0.0 || !std::isfinite(norm)) {
        throw NonFiniteError("pooler output cannot be normalized");
    }
    for (double& v : out.values) v /= norm;
    out.normalized = true;
    return out;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.values.size() != b.values.size()) {
        throw DimensionMismatchError("cosine similarity requires equal dimensions");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    double na = l2_norm(a.values);
    double nb = l2_norm(b.values);
    if (na == 0.0 || nb == 0.0) throw ZeroVectorError();
    return dot / (na * nb);
}

PoolerParams init_pooler(std::size_t d_in, std::size_t d_h, std::size_t d_out, std::uint64_t seed,
                         double noise_scale) {
    PoolerParams p;
    p.d_in = d_in;
    p.d_h = d_h;
    p.d_out = d_out;
    p.w1.assign(d_in * d_h, 0.0);
    p.b1.assign(d_h, 0.0);
    p.w2.assign(d_h * d_out, 0.0);
    p.b2.assign(d_out, 0.0);
    Rng rng(seed);
    for (std::size_t i = 0; i < d_in; ++i) {
        for (std::size_t j = 0; j < d_h; ++j) {
            p.w1[i * d_h + j] = (i == j ? 1.0 : 0.0) + rng.real(-noise_scale, noise_scale);
        }
    }
    for (std::size_t j = 0; j < d_h; ++j) {
        for (std::size_t k = 0; k < d_out; ++k) {
            p.w2[j * d_out + k] = (j == k ? 1.0 : 0.0) + rng.real(-noise_scale, noise_scale);
        }
    }
    return p;
}

std::string pooler_fingerprint(const PoolerParams& p) {
    std::uint64_t h = kFnvOffsetBasis;
    auto fold = [&h](const std::vector<double>& values) {
        for (double v : values) {
            char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            h = fnv1a64(std::string_view(bytes, sizeof(double)), h);
        }
    };
    h = fnv1a64(std::to_string(p.d_in) + ":" + std::to_string(p.d_h) + ":" + std::to_string(p.d_out), h);
    fold(p.w1);
    fold(p.b1);
    fold(p.w2);
    fold(p.b2);
    return hex64(h);
}

Embedding EmbeddingProvider::embed_one(const std::string& text) {
    return embed(std::vector<std::string>{text}).front();
}

HashedNgramProvider::HashedNgramProvider(std::size_t d) : d_(d) {
    if (d < 8) throw DimensionMismatchError("hashed embedding dimension must be >= 8");
}

std::string HashedNgramProvider::id() const { return "hashed:" + std::to_string(d_); }

std::vector<Embedding> HashedNgramProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) out.push_back(embed_hashed(text, d_));
    return out;
}

CachingProvider::CachingProvider(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}

std::vector<Embedding> CachingProvider::embed(const std::vector<std::string>& texts) {
    if (!inner_->deterministic()) {
        return inner_->embed(texts);
    }
    const std::uint64_t provider_tag = fnv1a64(inner_->id());
    std::vector<Embedding> out(texts.size());
    std::vector<std::size_t> missing;
    std::vector<std::string> missing_texts;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::uint64_t key = fnv1a64(texts[i], provider_tag);
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            out[i] = it->second;
        } else {
            missing.push_back(i);
            missing_texts.push_back(texts[i]);
        }
    }
    if (!missing.empty()) {
        std::vector<Embedding> fresh = inner_->embed(missing_texts);
        for (std::size_t j = 0; j < missing.size(); ++j) {
            std::uint64_t key = fnv1a64(missing_texts[j], provider_tag);
            cache_.emplace(key, fresh[j]);
            out[missing[j]] = std::move(fresh[j]);
        }
    }
    return out;
}

}  // namespace mwpr
