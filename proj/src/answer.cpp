#include "dynscale/answer.hpp"

#include <algorithm>
#include <cctype>

#include "dynscale/error.hpp"

namespace dynscale {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s)
{
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

std::optional<std::string> normalize_choice(std::string_view raw, const AnswerDomain& domain)
{
    const std::string want = upper(trim(raw));
    for (const auto& label : domain.choices)
        if (upper(label) == want) return want;
    return std::nullopt;
}

std::optional<std::string> normalize_integer(std::string_view raw)
{
    std::string_view s = trim(raw);
    bool negative = false;
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    std::string digits;
    for (char c : s) {
        if (is_digit(c))
            digits.push_back(c);
        else if (c != ',' || digits.empty())
            return std::nullopt;
    }
    if (digits.empty()) return std::nullopt;
    const auto nz = digits.find_first_not_of('0');
    digits = nz == std::string::npos ? "0" : digits.substr(nz);
    if (negative && digits != "0") digits.insert(digits.begin(), '-');
    return digits;
}

std::optional<std::string> normalize_free_text(std::string_view raw)
{
    std::string out;
    bool pending_space = false;
    for (char c : trim(raw)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
    if (out.empty()) return std::nullopt;
    return out;
}

// Narrows a regex capture to the answer token before strict normalization.
std::string_view candidate(std::string_view capture, AnswerKind kind)
{
    switch (kind) {
    case AnswerKind::multiple_choice: {
        std::size_t b = 0;
        while (b < capture.size() && !is_alnum(capture[b])) ++b;
        // Skip markup commands such as \boxed{ or \text{.
        if (b > 0 && capture[b - 1] == '\\') {
            while (b < capture.size() && is_alnum(capture[b])) ++b;
            while (b < capture.size() && !is_alnum(capture[b])) ++b;
        }
        std::size_t e = b;
        while (e < capture.size() && is_alnum(capture[e])) ++e;
        return capture.substr(b, e - b);
    }
    case AnswerKind::integer: {
        std::size_t b = 0;
        while (b < capture.size() && !is_digit(capture[b])) ++b;
        if (b == capture.size()) return {};
        std::size_t start = (b > 0 && (capture[b - 1] == '-' || capture[b - 1] == '+')) ? b - 1 : b;
        std::size_t e = b;
        while (e < capture.size() && (is_digit(capture[e]) || capture[e] == ',')) ++e;
        while (e > b && capture[e - 1] == ',') --e;
        return capture.substr(start, e - start);
    }
    case AnswerKind::free_text: {
        const auto nl = capture.find('\n');
        return capture.substr(0, nl);
    }
    }
    return capture;
}

}  // namespace

std::optional<std::string> normalize_answer(std::string_view raw, const AnswerDomain& domain)
{
    switch (domain.kind) {
    case AnswerKind::multiple_choice: return normalize_choice(raw, domain);
    case AnswerKind::integer: return normalize_integer(raw);
    case AnswerKind::free_text: return normalize_free_text(raw);
    }
    return std::nullopt;
}

PatternTable::PatternTable(std::vector<ExtractionPattern> patterns) : patterns_(std::move(patterns))
{
    compiled_.reserve(patterns_.size());
    for (const auto& p : patterns_) {
        auto flags = std::regex::ECMAScript;
        if (p.case_insensitive) flags |= std::regex::icase;
        try {
            compiled_.emplace_back(p.regex, flags);
        } catch (const std::regex_error& e) {
            throw Error(ErrorCode::invalid_config, "pattern '" + p.name + "': " + e.what());
        }
        if (compiled_.back().mark_count() < 1)
            throw Error(ErrorCode::invalid_config, "pattern '" + p.name + "' has no capture group");
    }
}

std::optional<CanonicalAnswer> PatternTable::extract(std::string_view text, const AnswerDomain& domain) const
{
    struct Hit {
        int tier;
        std::ptrdiff_t position;
        std::string value;
    };
    std::optional<Hit> best;
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
        const auto& p = patterns_[i];
        if (std::find(p.kinds.begin(), p.kinds.end(), domain.kind) == p.kinds.end()) continue;
        if (best && p.tier > best->tier) continue;
        const char* first = text.data();
        const char* last = text.data() + text.size();
        for (std::cregex_iterator it(first, last, compiled_[i]), end; it != end; ++it) {
            const auto& m = *it;
            const std::string_view capture(m[1].first, static_cast<std::size_t>(m[1].length()));
            auto value = normalize_answer(candidate(capture, domain.kind), domain);
            if (!value) continue;
            const auto pos = m.position(1);
            if (!best || p.tier < best->tier || pos > best->position) best = Hit{p.tier, pos, std::move(*value)};
        }
    }
    if (!best) return std::nullopt;
    return CanonicalAnswer{std::move(best->value), domain.kind};
}

std::vector<ExtractionPattern> default_extraction_patterns()
{
    using K = AnswerKind;
    const std::vector<K> all{K::multiple_choice, K::integer, K::free_text};
    return {
        {"answer_colon", R"((?:final\s+)?answer\s*:\s*([^\n]*))", all, 0, true},
        {"boxed", R"(\\boxed\{([^{}]*)\})", all, 0, true},
        {"answer_is", R"(answer\s+is\s+([^\n]*))", all, 1, true},
        {"trailing_choice", R"((?:^|[^A-Za-z0-9\\])\(?([A-Z])\)?[\s.!*]*$)", {K::multiple_choice}, 1, false},
        {"final_integer", R"((-?\d[\d,]*))", {K::integer}, 1, false},
    };
}

std::shared_ptr<const PatternTable> default_pattern_table()
{
    static const auto table = std::make_shared<const PatternTable>(default_extraction_patterns());
    return table;
}

std::optional<CanonicalAnswer> extract_answer(std::string_view text, const AnswerDomain& domain)
{
    return default_pattern_table()->extract(text, domain);
}

std::int64_t AnswerCounts::count_of(std::string_view answer) const
{
    for (const auto& [value, count] : counts)
        if (value == answer) return count;
    return 0;
}

AnswerCounts answer_counts(std::span<const ResponseRecord> responses)
{
    AnswerCounts out;
    for (const auto& r : responses) {
        if (!r.extracted_answer) continue;
        auto it = std::find_if(out.counts.begin(), out.counts.end(),
                               [&](const auto& entry) { return entry.first == *r.extracted_answer; });
        if (it == out.counts.end())
            out.counts.emplace_back(*r.extracted_answer, 1);
        else
            ++it->second;
        ++out.n;
    }
    return out;
}

std::optional<std::string> majority_vote(std::span<const ResponseRecord> responses)
{
    const auto counts = answer_counts(responses);
    if (counts.counts.empty()) return std::nullopt;
    // counts are in first-occurrence order, so the first maximum is the tie winner.
    auto best = counts.counts.begin();
    for (auto it = counts.counts.begin(); it != counts.counts.end(); ++it)
        if (it->second > best->second) best = it;
    return best->first;
}

}  // namespace dynscale
