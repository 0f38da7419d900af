#pragma once

#include <string>

namespace mwpr::detail {

struct HttpRequest {
    std::string base_url;
    std::string path;
    std::string body;          // JSON payload
    std::string bearer_token;  // empty = no Authorization header
    int timeout_seconds = 30;
    int max_retries = 3;
    bool retry_rate_limited = false;  // also retry 429 responses
};

// POSTs JSON and returns the response body. Retries transport failures (and
// optionally 429s) with exponential backoff, then throws TransportError,
// TimeoutError or ServiceError.
std::string post_json(const HttpRequest& request);

}  // namespace mwpr::detail
