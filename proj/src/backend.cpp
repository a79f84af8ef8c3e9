#include "dynscale/backend.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "dynscale/error.hpp"

namespace dynscale {

std::string_view to_string(BackendKind kind)
{
    return kind == BackendKind::http ? "http" : "simulator";
}

BackendKind parse_backend_kind(std::string_view name)
{
    if (name == "http") return BackendKind::http;
    if (name == "simulator") return BackendKind::simulator;
    throw Error(ErrorCode::invalid_config, "unknown backend '" + std::string(name) + "'");
}

namespace {

int checked_cap(int cap)
{
    if (cap < 1) throw Error(ErrorCode::invalid_config, "concurrency_cap must be >= 1");
    return cap;
}

}  // namespace

Backend::Backend(BackendKind kind, int concurrency_cap, RetryPolicy retry)
    : kind_(kind), cap_(checked_cap(concurrency_cap)), retry_(retry), slots_(cap_)
{
    if (retry_.max_attempts < 1) throw Error(ErrorCode::invalid_config, "retry max_attempts must be >= 1");
}

Completion Backend::complete_one(const CompletionRequest& request)
{
    Completion last;
    last.status = CompletionStatus::unavailable;
    for (int a = 0; a < retry_.max_attempts; ++a) {
        if (a > 0 && retry_.backoff_base.count() > 0) {
            // Exponential backoff with up to 100% jitter.
            Rng jitter(SeedStream(request.seed).derive("backoff").derive(static_cast<std::uint64_t>(a)));
            const double scale = std::ldexp(1.0, a - 1) * (1.0 + jitter.uniform());
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
                static_cast<double>(retry_.backoff_base.count()) * scale));
        }
        slots_.acquire();
        const int now = in_flight_.fetch_add(1) + 1;
        int peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
        attempts_.fetch_add(1);
        try {
            Completion c = attempt(request, a);
            in_flight_.fetch_sub(1);
            slots_.release();
            c.status = CompletionStatus::ok;
            c.attempts = a + 1;
            return c;
        } catch (const BackendFailure& f) {
            in_flight_.fetch_sub(1);
            slots_.release();
            last.error = f.what();
            last.attempts = a + 1;
            if (f.kind() == FailureKind::prompt_too_long) {
                last.status = CompletionStatus::prompt_too_long;
                return last;
            }
            if (f.kind() == FailureKind::fatal) return last;
        } catch (...) {
            in_flight_.fetch_sub(1);
            slots_.release();
            throw;
        }
    }
    return last;
}

std::vector<Completion> Backend::complete(std::span<const CompletionRequest> requests)
{
    std::vector<Completion> out(requests.size());
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cap_), requests.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < requests.size(); ++i) out[i] = complete_one(requests[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1))
                        out[i] = complete_one(requests[i]);
                } catch (...) {
                    errors[w] = std::current_exception();
                    next.store(requests.size());
                }
            });
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::vector<Completion> Backend::sample(const std::string& query_id, const std::string& prompt, int n,
                                        const DecodingParams& params, SeedStream seed)
{
    if (n < 1) throw Error(ErrorCode::invalid_config, "sample requires n >= 1");
    std::vector<CompletionRequest> requests;
    requests.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        requests.push_back({query_id, prompt, params, seed.derive(static_cast<std::uint64_t>(i)).value()});
    return complete(requests);
}

}  // namespace dynscale
