#pragma once

// Query-set files: JSON Lines, one object per line.
//   {"id": "q1", "prompt": "...", "answer_domain": "multiple_choice" | "integer" | "free_text",
//    "choices": ["A", "B", "C", "D"],   (multiple_choice only, required there)
//    "gold_answer": "B"}                 (optional, must already be canonical)
// Blank lines are skipped; unknown keys are rejected.

#include <filesystem>
#include <istream>
#include <ostream>

#include "dynscale/types.hpp"

namespace dynscale {

QuerySet read_query_set(std::istream& in, const std::string& source = "<stream>");
QuerySet load_query_set(const std::filesystem::path& path);
void write_query_set(std::ostream& out, const QuerySet& queries);

}  // namespace dynscale
