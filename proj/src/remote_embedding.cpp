#include "mwpr/embedding.hpp"

#include "mwpr/errors.hpp"
#include "http_support.hpp"

#include "json.hpp"

#include <cstdlib>

namespace mwpr {

using nlohmann::json;

namespace {

std::string resolve_api_key(const std::string& configured) {
    if (!configured.empty()) return configured;
    const char* env = std::getenv("EMBED_API_KEY");
    return env ? std::string(env) : std::string();
}

}  // namespace

RemoteEmbeddingProvider::RemoteEmbeddingProvider(EmbedEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    endpoint_.api_key = resolve_api_key(endpoint_.api_key);
    if (endpoint_.max_batch == 0) endpoint_.max_batch = 1;
}

std::string RemoteEmbeddingProvider::id() const {
    return "remote:" + endpoint_.base_url + endpoint_.path + ":" + endpoint_.model;
}

std::vector<Embedding> RemoteEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    std::size_t seen_dim = endpoint_.expected_dim;
    for (std::size_t start = 0; start < texts.size(); start += endpoint_.max_batch) {
        std::size_t end = std::min(texts.size(), start + endpoint_.max_batch);
        std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                       texts.begin() + static_cast<std::ptrdiff_t>(end));
        detail::HttpRequest request;
        request.base_url = endpoint_.base_url;
        request.path = endpoint_.path;
        request.body = json{{"input", chunk}, {"model", endpoint_.model}}.dump();
        request.bearer_token = endpoint_.api_key;
        request.timeout_seconds = endpoint_.timeout_seconds;
        request.max_retries = endpoint_.max_retries;
        std::string body = detail::post_json(request);

        json response = json::parse(body, nullptr, false);
        if (response.is_discarded() || !response.contains("data") || !response["data"].is_array()) {
            throw ServiceError(200, "malformed embeddings payload");
        }
        const auto& data = response["data"];
        if (data.size() != chunk.size()) {
            throw DimensionMismatchError("embedding service returned " + std::to_string(data.size()) +
                                         " vectors for " + std::to_string(chunk.size()) + " inputs");
        }
        std::vector<Embedding> batch(chunk.size());
        std::vector<bool> filled(chunk.size(), false);
        for (const auto& item : data) {
            if (!item.contains("index") || !item.contains("embedding")) {
                throw ServiceError(200, "embedding item missing index or embedding");
            }
            std::size_t idx = item["index"].get<std::size_t>();
            if (idx >= chunk.size() || filled[idx]) {
                throw ServiceError(200, "embedding indices are out of range or repeated");
            }
            Embedding e;
            e.values = item["embedding"].get<std::vector<double>>();
            l2_normalize_inplace(e.values);
            e.normalized = true;
            batch[idx] = std::move(e);
            filled[idx] = true;
        }
        for (const Embedding& e : batch) {
            if (seen_dim == 0) {
                seen_dim = e.values.size();
            } else if (e.values.size() != seen_dim) {
                throw DimensionMismatchError("embedding service returned dimension " +
                                             std::to_string(e.values.size()) + ", expected " +
                                             std::to_string(seen_dim));
            }
        }
        for (Embedding& e : batch) out.push_back(std::move(e));
    }
    return out;
}

}  // namespace mwpr
