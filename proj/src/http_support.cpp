#include "http_support.hpp"

#include "mwpr/errors.hpp"

#include "httplib.h"

#include <chrono>
#include <thread>

namespace mwpr::detail {

namespace {

bool is_timeout(httplib::Error err) {
    return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
           err == httplib::Error::Write;
}

std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 200;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

std::string post_json(const HttpRequest& request) {
    httplib::Client client(request.base_url);
    client.set_connection_timeout(request.timeout_seconds, 0);
    client.set_read_timeout(request.timeout_seconds, 0);
    client.set_write_timeout(request.timeout_seconds, 0);
    httplib::Headers headers;
    if (!request.bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + request.bearer_token);
    }

    int attempts = request.max_retries + 1;
    std::chrono::milliseconds backoff(100);
    httplib::Error last_error = httplib::Error::Success;
    int last_status = 0;
    std::string last_body;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(request.path, headers, request.body, "application/json");
        if (!res) {
            last_error = res.error();
            continue;  // transport failure: retry
        }
        if (res->status == 429 && request.retry_rate_limited) {
            last_status = res->status;
            last_body = res->body;
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw ServiceError(res->status, excerpt(res->body));
        }
        return res->body;
    }
    if (last_status != 0) {
        throw ServiceError(last_status, excerpt(last_body));
    }
    if (is_timeout(last_error)) {
        throw TimeoutError("request to " + request.base_url + request.path + " timed out");
    }
    throw TransportError("cannot reach " + request.base_url + request.path + ": " +
                         httplib::to_string(last_error));
}

}  // namespace mwpr::detail
