#pragma once

// Completion sources. A Backend turns prompts into completions, enforcing its
// own in-flight cap and retry policy; subclasses implement one attempt.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynscale/random.hpp"

namespace dynscale {

enum class BackendKind { http, simulator };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct DecodingParams {
    double temperature = 0.6;
    int max_output_tokens = 8192;

    bool operator==(const DecodingParams&) const = default;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds backoff_base{200};

    bool operator==(const RetryPolicy&) const = default;
};

struct CompletionRequest {
    std::string query_id;
    std::string prompt;
    DecodingParams params;
    std::uint64_t seed = 0;
};

enum class CompletionStatus { ok, unavailable, prompt_too_long };

struct Completion {
    CompletionStatus status = CompletionStatus::ok;
    std::string text;
    std::int64_t output_tokens = 0;
    int attempts = 0;
    std::string error;

    bool ok() const noexcept { return status == CompletionStatus::ok; }
};

enum class FailureKind { transient, rate_limited, prompt_too_long, fatal };

/// Thrown by a single attempt. transient and rate_limited are retried.
class BackendFailure : public std::runtime_error {
public:
    BackendFailure(FailureKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    FailureKind kind() const noexcept { return kind_; }

private:
    FailureKind kind_;
};

class Backend {
public:
    Backend(BackendKind kind, int concurrency_cap, RetryPolicy retry);
    virtual ~Backend() = default;

    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    BackendKind kind() const noexcept { return kind_; }
    int concurrency_cap() const noexcept { return cap_; }
    const RetryPolicy& retry_policy() const noexcept { return retry_; }

    /// Results are index-aligned with requests. Never throws for per-request
    /// failures; those come back with a non-ok status.
    std::vector<Completion> complete(std::span<const CompletionRequest> requests);

    /// n completions of one prompt; request i is seeded with seed.derive(i).
    std::vector<Completion> sample(const std::string& query_id, const std::string& prompt, int n,
                                   const DecodingParams& params, SeedStream seed);

    /// Highest number of simultaneously running attempts observed so far.
    int peak_in_flight() const noexcept { return peak_.load(); }
    std::int64_t attempts_made() const noexcept { return attempts_.load(); }

protected:
    /// One attempt. Throws BackendFailure on failure.
    virtual Completion attempt(const CompletionRequest& request, int attempt_index) = 0;

private:
    Completion complete_one(const CompletionRequest& request);

    BackendKind kind_;
    int cap_;
    RetryPolicy retry_;
    std::counting_semaphore<> slots_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
    std::atomic<std::int64_t> attempts_{0};
};

}  // namespace dynscale
