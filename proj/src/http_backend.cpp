#include "dynscale/http_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "dynscale/error.hpp"

namespace dynscale {
namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

Endpoint parse_endpoint(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::invalid_config, "endpoint '" + url + "' lacks a scheme");
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(ErrorCode::invalid_config, "endpoint scheme must be http or https");
    const auto path_begin = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_begin);
    e.path = path_begin == std::string::npos ? "/" : url.substr(path_begin);
    if (e.origin.size() <= scheme_end + 3) throw Error(ErrorCode::invalid_config, "endpoint '" + url + "' lacks a host");
    return e;
}

nlohmann::json build_chat_request(const std::string& model, const CompletionRequest& request)
{
    return {
        {"model", model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.params.temperature},
        {"max_tokens", request.params.max_output_tokens},
        {"seed", request.seed & 0x7fffffffffffffffULL},
    };
}

Completion parse_chat_response(const std::string& body)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw BackendFailure(FailureKind::fatal, std::string("malformed response: ") + e.what());
    }
    Completion c;
    try {
        const auto& msg = doc.at("choices").at(0).at("message");
        const auto& content = msg.at("content");
        c.text = content.is_string() ? content.get<std::string>() : std::string();
    } catch (const nlohmann::json::exception& e) {
        throw BackendFailure(FailureKind::fatal, std::string("response without choices[0].message.content: ") + e.what());
    }
    std::int64_t tokens = 0;
    if (doc.contains("usage") && doc["usage"].is_object() && doc["usage"].contains("completion_tokens") &&
        doc["usage"]["completion_tokens"].is_number_integer())
        tokens = doc["usage"]["completion_tokens"].get<std::int64_t>();
    // Rough 4-chars-per-token estimate when the server omits usage.
    if (tokens <= 0) tokens = static_cast<std::int64_t>(c.text.size() / 4);
    c.output_tokens = std::max<std::int64_t>(1, tokens);
    return c;
}

FailureKind classify_http_failure(int status, const std::string& body)
{
    if (status == 429) return FailureKind::rate_limited;
    if (status == 408 || status >= 500) return FailureKind::transient;
    if (status == 413) return FailureKind::prompt_too_long;
    if (status == 400) {
        const auto b = lower(body);
        if (b.find("context") != std::string::npos || b.find("too long") != std::string::npos ||
            b.find("maximum") != std::string::npos)
            return FailureKind::prompt_too_long;
    }
    return FailureKind::fatal;
}

HttpBackend::HttpBackend(HttpBackendConfig config)
    : Backend(BackendKind::http, config.concurrency_cap, config.retry), config_(std::move(config)),
      endpoint_(parse_endpoint(config_.endpoint))
{
    if (!config_.auth_env.empty()) {
        if (const char* v = std::getenv(config_.auth_env.c_str()); v && *v) token_ = v;
    }
}

Completion HttpBackend::attempt(const CompletionRequest& request, int)
{
    httplib::Client client(endpoint_.origin);
    const auto t = static_cast<time_t>(config_.timeout.count());
    client.set_connection_timeout(t, 0);
    client.set_read_timeout(t, 0);
    client.set_write_timeout(t, 0);
    httplib::Headers headers;
    if (token_) headers.emplace("Authorization", "Bearer " + *token_);

    const auto body = build_chat_request(config_.model, request).dump();
    auto res = client.Post(endpoint_.path, headers, body, "application/json");
    if (!res) throw BackendFailure(FailureKind::transient, "request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw BackendFailure(classify_http_failure(res->status, res->body),
                             "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    return parse_chat_response(res->body);
}

}  // namespace dynscale
