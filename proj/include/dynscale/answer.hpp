#pragma once

// Answer canonicalization, pattern-driven extraction and majority voting.

#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dynscale/types.hpp"

namespace dynscale {

/// Canonical form of a raw answer string, or nullopt when the string is not a
/// valid answer for the domain. Idempotent on its own outputs.
///   multiple_choice: surrounding markup stripped, uppercased, must be a listed label
///   integer:         whitespace, sign '+', thousands separators and leading zeros removed
///   free_text:       lowercased, whitespace collapsed, trailing period removed
std::optional<std::string> normalize_answer(std::string_view raw, const AnswerDomain& domain);

struct ExtractionPattern {
    std::string name;
    /// ECMAScript regex with exactly one capture group holding the answer.
    std::string regex;
    std::vector<AnswerKind> kinds;
    /// Lower tiers win; within a tier the last match in the text wins.
    int tier = 0;
    bool case_insensitive = true;
};

/// Compiled, immutable extraction table.
class PatternTable {
public:
    explicit PatternTable(std::vector<ExtractionPattern> patterns);

    const std::vector<ExtractionPattern>& patterns() const noexcept { return patterns_; }

    std::optional<CanonicalAnswer> extract(std::string_view text, const AnswerDomain& domain) const;

private:
    std::vector<ExtractionPattern> patterns_;
    std::vector<std::regex> compiled_;
};

/// The shipped table:
///   tier 0  answer_colon      "Answer: X" (also "Final answer: X")
///   tier 0  boxed             \boxed{X}
///   tier 1  trailing_choice   a standalone choice letter at the end of the text (multiple_choice)
///   tier 1  final_integer     the last integer in the text (integer)
std::vector<ExtractionPattern> default_extraction_patterns();
std::shared_ptr<const PatternTable> default_pattern_table();

std::optional<CanonicalAnswer> extract_answer(std::string_view text, const AnswerDomain& domain);

/// Multiplicity of each extracted answer, in order of first occurrence.
struct AnswerCounts {
    std::vector<std::pair<std::string, std::int64_t>> counts;
    std::int64_t n = 0;

    std::int64_t count_of(std::string_view answer) const;
};

AnswerCounts answer_counts(std::span<const ResponseRecord> responses);

/// Most frequent extracted answer; ties go to the answer sampled first.
std::optional<std::string> majority_vote(std::span<const ResponseRecord> responses);

}  // namespace dynscale
