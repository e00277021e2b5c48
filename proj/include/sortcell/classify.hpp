#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sortcell/garment.hpp"

namespace sortcell::classify {

// One chat-completion request: a system message and a single user message
// carrying >= 1 image.
struct ChatRequest {
  std::string model_name;
  std::string system_prompt;
  std::string user_prompt;
  std::vector<std::string> images;  // raw PNG bytes; base64 only on the wire
};

// Byte-stable classification prompt.
ChatRequest build_prompt();

struct RawResponse {
  std::string text;
  double latency_s = 0;
  std::string model_name;
  std::string request_id;
};

struct ParsedLabel {
  enum class Kind { Valid, NotAClass, MultiWord, EmptyText, Transport };
  Kind kind = Kind::NotAClass;
  std::optional<GarmentClass> label;  // set iff kind == Valid

  bool valid() const { return kind == Kind::Valid; }
  std::string to_string() const;
  static std::optional<ParsedLabel> from_string(std::string_view s);

  static ParsedLabel make_valid(GarmentClass c) {
    return {Kind::Valid, c};
  }
  static ParsedLabel invalid(Kind k) { return {k, std::nullopt}; }

  bool operator==(const ParsedLabel&) const = default;
};

struct ParseOptions {
  // When set, trailing .,!?;: are stripped before matching ("sock." parses
  // as sock). Off by default: only responses exactly matching a class name
  // count.
  bool lenient_punctuation = false;
};

// Total: every string maps to exactly one label. Case-insensitive match
// against the six canonical class words; any internal whitespace rejects the
// response as multi-word.
ParsedLabel parse_text(std::string_view text, const ParseOptions& opts = {});
ParsedLabel parse_response(const RawResponse& raw, const ParseOptions& opts = {});

std::string base64_encode(std::string_view bytes);

// Image handed to a backend. declared_class carries the scene ground truth
// for profile mocks; live backends only read the bytes.
struct ImagePayload {
  std::string request_id;
  std::string png_bytes;
  std::string declared_class;
};

}  // namespace sortcell::classify
