#pragma once

// Markers emitted by the prompt templates. The simulator keys its
// conditioning behavior off these instead of reading natural language.

#include <string_view>

namespace dynscale::markers {

inline constexpr std::string_view chain_open = "<earlier_attempts>";
inline constexpr std::string_view chain_close = "</earlier_attempts>";
inline constexpr std::string_view attempt_open = "<attempt>";
inline constexpr std::string_view attempt_close = "</attempt>";
inline constexpr std::string_view previous_open = "<previous_response>";
inline constexpr std::string_view previous_close = "</previous_response>";

}  // namespace dynscale::markers
