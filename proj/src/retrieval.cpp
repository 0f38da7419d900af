#include "mwpr/retrieval.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/expr.hpp"
#include "mwpr/rng.hpp"
#include "mwpr/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace mwpr {

using nlohmann::json;

namespace {

constexpr char kBinaryMagic[8] = {'M', 'W', 'P', 'R', 'I', 'D', 'X', '1'};

struct Candidate {
    double score;
    std::size_t position;
};

// Descending score, ascending corpus position on ties.
void sort_candidates(std::vector<Candidate>& candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.position < b.position;
    });
}

}  // namespace

RetrievalIndex RetrievalIndex::build(const std::vector<Problem>& corpus,
                                     std::shared_ptr<EmbeddingProvider> provider,
                                     std::optional<PoolerParams> pooler) {
    if (corpus.empty()) throw EmptyCorpusError();
    RetrievalIndex index;
    index.provider_ = std::move(provider);
    index.pooler_ = std::move(pooler);
    index.provenance_.provider_id = index.provider_->id();
    index.provenance_.pooler = index.pooler_ ? pooler_fingerprint(*index.pooler_) : "none";

    std::vector<std::string> questions;
    questions.reserve(corpus.size());
    for (const Problem& p : corpus) questions.push_back(p.question);
    std::vector<Embedding> base = index.provider_->embed(questions);

    index.ids_.reserve(corpus.size());
    index.embeddings_.reserve(corpus.size());
    index.problems_ = corpus;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        Embedding e = index.pooler_ ? pooler_forward(base[i], *index.pooler_) : std::move(base[i]);
        if (!e.normalized) {
            l2_normalize_inplace(e.values);
            e.normalized = true;
        }
        if (index.dim_ == 0) {
            index.dim_ = e.values.size();
        } else if (e.values.size() != index.dim_) {
            throw DimensionMismatchError("index entries have mixed dimensions");
        }
        index.ids_.push_back(corpus[i].id);
        index.embeddings_.push_back(std::move(e));
    }
    return index;
}

const Problem& RetrievalIndex::problem_at(std::size_t position) const { return problems_.at(position); }

Embedding RetrievalIndex::embed_query(const std::string& query_text) const {
    Embedding base = provider_->embed_one(query_text);
    Embedding e = pooler_ ? pooler_forward(base, *pooler_) : std::move(base);
    if (!e.normalized) {
        l2_normalize_inplace(e.values);
        e.normalized = true;
    }
    return e;
}

TopkResult RetrievalIndex::topk(const std::string& query_text, std::size_t k,
                                bool exclude_exact_question) const {
    return topk_embedded(embed_query(query_text), k, exclude_exact_question ? &query_text : nullptr);
}

TopkResult RetrievalIndex::topk_embedded(const Embedding& query, std::size_t k,
                                         const std::string* exclude_question) const {
    if (k < 1) throw BadKError("k must be at least 1");
    if (ids_.empty()) throw EmptyIndexError();
    std::vector<Candidate> candidates;
    candidates.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (exclude_question && problems_[i].question == *exclude_question) continue;
        candidates.push_back({cosine_similarity(query, embeddings_[i]), i});
    }
    sort_candidates(candidates);
    TopkResult result;
    result.truncated = candidates.size() < k;
    std::size_t take = std::min(k, candidates.size());
    result.hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        result.hits.push_back({problems_[candidates[i].position], candidates[i].score});
    }
    return result;
}

void RetrievalIndex::save_json(const std::string& path) const {
    json entries = json::array();
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        entries.push_back({{"id", ids_[i]}, {"embedding", embeddings_[i].values}});
    }
    json doc{{"dim", dim_},
             {"count", ids_.size()},
             {"provenance", {{"provider_id", provenance_.provider_id}, {"pooler", provenance_.pooler}}},
             {"entries", entries}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write index: " + path);
    out << doc.dump() << "\n";
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_string(std::ofstream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::string read_string(std::ifstream& in) {
    std::uint64_t size = read_u64(in);
    std::string s(size, '\0');
    in.read(s.data(), static_cast<std::streamsize>(size));
    return s;
}

}  // namespace

// Packed little-endian layout: magic, dim (u32), count (u64), provider id and
// pooler fingerprint (length-prefixed), then per entry the id and dim doubles.
void RetrievalIndex::save_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write index: " + path);
    out.write(kBinaryMagic, sizeof(kBinaryMagic));
    write_u32(out, static_cast<std::uint32_t>(dim_));
    write_u64(out, ids_.size());
    write_string(out, provenance_.provider_id);
    write_string(out, provenance_.pooler);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        write_string(out, ids_[i]);
        out.write(reinterpret_cast<const char*>(embeddings_[i].values.data()),
                  static_cast<std::streamsize>(dim_ * sizeof(double)));
    }
    if (!out) throw IoError("failed writing index: " + path);
}

RetrievalIndex RetrievalIndex::load(const std::string& path, const std::vector<Problem>& corpus,
                                    std::shared_ptr<EmbeddingProvider> provider,
                                    std::optional<PoolerParams> pooler) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index: " + path);
    char magic[sizeof(kBinaryMagic)] = {};
    in.read(magic, sizeof(magic));
    if (!in) throw IoError("index file is truncated: " + path);

    RetrievalIndex index;
    index.provider_ = std::move(provider);
    index.pooler_ = std::move(pooler);

    if (std::memcmp(magic, kBinaryMagic, sizeof(kBinaryMagic)) == 0) {
        index.dim_ = read_u32(in);
        std::uint64_t count = read_u64(in);
        index.provenance_.provider_id = read_string(in);
        index.provenance_.pooler = read_string(in);
        index.ids_.reserve(count);
        index.embeddings_.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            std::string id = read_string(in);
            Embedding e;
            e.values.resize(index.dim_);
            in.read(reinterpret_cast<char*>(e.values.data()),
                    static_cast<std::streamsize>(index.dim_ * sizeof(double)));
            e.normalized = true;
            index.ids_.push_back(std::move(id));
            index.embeddings_.push_back(std::move(e));
        }
        if (!in) throw IoError("index file is truncated: " + path);
    } else {
        in.seekg(0);
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw IoError("index file is neither packed binary nor JSON: " + path);
        index.dim_ = doc.at("dim").get<std::size_t>();
        index.provenance_.provider_id = doc.at("provenance").at("provider_id").get<std::string>();
        index.provenance_.pooler = doc.at("provenance").at("pooler").get<std::string>();
        for (const auto& entry : doc.at("entries")) {
            Embedding e;
            e.values = entry.at("embedding").get<std::vector<double>>();
            if (e.values.size() != index.dim_) {
                throw IoError("index entry dimension mismatch: " + path);
            }
            e.normalized = true;
            index.ids_.push_back(entry.at("id").get<std::string>());
            index.embeddings_.push_back(std::move(e));
        }
        std::size_t declared = doc.at("count").get<std::size_t>();
        if (declared != index.ids_.size()) {
            throw IoError("index entry count does not match header: " + path);
        }
    }

    if (index.provider_ && index.provider_->id() != index.provenance_.provider_id) {
        throw Error("index was built with provider '" + index.provenance_.provider_id +
                    "' but loaded with '" + index.provider_->id() + "'");
    }
    auto by_id = index_by_id(corpus);
    index.problems_.reserve(index.ids_.size());
    for (const std::string& id : index.ids_) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw Error("index references id '" + id + "' missing from the corpus");
        }
        index.problems_.push_back(*it->second);
    }
    return index;
}

TopkResult graph_oracle_topk(const std::vector<Problem>& corpus, const std::string& query_signature,
                             std::size_t k) {
    if (k < 1) throw BadKError("k must be at least 1");
    if (corpus.empty()) throw EmptyCorpusError();
    std::vector<Candidate> candidates;
    candidates.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        candidates.push_back({signature_similarity(query_signature, problem_signature(corpus[i])), i});
    }
    sort_candidates(candidates);
    TopkResult result;
    result.truncated = candidates.size() < k;
    std::size_t take = std::min(k, candidates.size());
    for (std::size_t i = 0; i < take; ++i) {
        result.hits.push_back({corpus[candidates[i].position], candidates[i].score});
    }
    return result;
}

TopkResult random_exemplars(const std::vector<Problem>& corpus, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw BadKError("k must be at least 1");
    if (corpus.empty()) throw EmptyCorpusError();
    std::vector<std::size_t> positions(corpus.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    Rng rng(seed);
    rng.shuffle(positions);
    TopkResult result;
    result.truncated = corpus.size() < k;
    std::size_t take = std::min(k, corpus.size());
    for (std::size_t i = 0; i < take; ++i) {
        result.hits.push_back({corpus[positions[i]], 0.0});
    }
    return result;
}

}  // namespace mwpr
