#pragma once

// Response grammar for trajectory answers:
//
//   response = { any } "<think>" reasoning "</think>" { any }
//              "<answer>" body "</answer>" { any }
//   body     = ws "[" ws [ point { ws "," ws point } ] ws "]" ws
//   point    = "{" ws key ws ":" ws number ws "," ws key ws ":" ws number ws "}"
//   key      = "'x'" | "'y'" | "\"x\"" | "\"y\""      (each exactly once)
//   number   = [ "+" | "-" ] ( digits [ "." { digit } ] | "." digits )
//              [ ( "e" | "E" ) [ "+" | "-" ] digits ]
//
// Text outside the two blocks is tolerated and flagged as stray.

#include "planlab/geometry.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace planlab {

enum class FormatFailure {
  MissingThink,
  MissingAnswer,
  BadCoordinateSyntax,
  WrongPointCount,
  NonFiniteValue,
};

std::string_view to_string(FormatFailure failure);

struct FormatVerdict {
  std::optional<FormatFailure> failure;
  // Non-whitespace text outside the think/answer blocks. Never fatal.
  bool stray_text = false;

  bool valid() const { return !failure.has_value(); }
};

struct ParsedResponse {
  std::string reasoning;
  Trajectory trajectory;
  std::string raw;
};

struct ParseOutcome {
  FormatVerdict verdict;
  std::optional<ParsedResponse> response;

  bool valid() const { return verdict.valid(); }
};

struct ParseOptions {
  std::size_t expected_n = 20;
  // Whitespace-only reasoning counts as a missing think block.
  bool require_reasoning = false;
};

// Never throws on malformed text; the first failure in document order wins.
ParseOutcome parse_response(std::string_view text, const ParseOptions& options = {});

// Canonical single-quoted form with two decimals per coordinate. Throws
// std::invalid_argument if the reasoning contains any of the four tags.
std::string serialize_response(std::string_view reasoning, const Trajectory& trajectory);

inline double format_reward(const FormatVerdict& verdict) {
  return verdict.valid() ? 1.0 : 0.0;
}

}  // namespace planlab
