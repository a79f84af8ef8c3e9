#pragma once

// Chat-completion client. Wire format is the common
//   POST {model, messages:[{role:"user", content}], temperature, max_tokens, seed}
// -> {choices:[{message:{content}}], usage:{completion_tokens}}
// shape, with a bearer token read from an environment variable.

#include <chrono>
#include <optional>
#include <string>

#include "dynscale/backend.hpp"
#include "json.hpp"

namespace dynscale {

struct HttpBackendConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "default";
    /// Name of the environment variable holding the bearer token.
    std::string auth_env = "DYNSCALE_API_KEY";
    int concurrency_cap = 4;
    RetryPolicy retry;
    std::chrono::seconds timeout{300};

    bool operator==(const HttpBackendConfig&) const = default;
};

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint parse_endpoint(const std::string& url);

nlohmann::json build_chat_request(const std::string& model, const CompletionRequest& request);

/// Throws BackendFailure(fatal) on a malformed body.
Completion parse_chat_response(const std::string& body);

/// Maps an HTTP status + body to the failure the retry loop acts on.
FailureKind classify_http_failure(int status, const std::string& body);

class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    const HttpBackendConfig& config() const noexcept { return config_; }

protected:
    Completion attempt(const CompletionRequest& request, int attempt_index) override;

private:
    HttpBackendConfig config_;
    Endpoint endpoint_;
    std::optional<std::string> token_;
};

}  // namespace dynscale
