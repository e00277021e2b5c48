#include "sortcell/classify.hpp"

#include <algorithm>
#include <cctype>

namespace sortcell::classify {

namespace {

constexpr std::string_view kSystemPrompt = "You are an intelligent robotic arm.";

constexpr std::string_view kUserPrompt =
    "Do you spot a clothing item on the table? "
    "If yes: Classify them in the classes: "
    "shirt, sock, underwear or trousers. "
    "Do you see something else instead? respond with other. "
    "Is the table empty? respond with empty. "
    "Your response is a single word - either "
    "shirt, sock, underwear, trousers, other or empty";

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

ChatRequest build_prompt() {
  ChatRequest req;
  req.system_prompt = kSystemPrompt;
  req.user_prompt = kUserPrompt;
  return req;
}

std::string ParsedLabel::to_string() const {
  switch (kind) {
    case Kind::Valid: return "valid:" + std::string(sortcell::to_string(*label));
    case Kind::NotAClass: return "invalid:not_a_class";
    case Kind::MultiWord: return "invalid:multi_word";
    case Kind::EmptyText: return "invalid:empty_text";
    case Kind::Transport: return "invalid:transport";
  }
  return "invalid:not_a_class";
}

std::optional<ParsedLabel> ParsedLabel::from_string(std::string_view s) {
  if (s.rfind("valid:", 0) == 0) {
    const auto cls = class_from_string(s.substr(6));
    if (!cls) return std::nullopt;
    return make_valid(*cls);
  }
  if (s == "invalid:not_a_class") return invalid(Kind::NotAClass);
  if (s == "invalid:multi_word") return invalid(Kind::MultiWord);
  if (s == "invalid:empty_text") return invalid(Kind::EmptyText);
  if (s == "invalid:transport") return invalid(Kind::Transport);
  return std::nullopt;
}

ParsedLabel parse_text(std::string_view text, const ParseOptions& opts) {
  size_t begin = 0, end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  std::string_view word = text.substr(begin, end - begin);

  if (word.empty()) return ParsedLabel::invalid(ParsedLabel::Kind::EmptyText);
  if (std::any_of(word.begin(), word.end(), is_space))
    return ParsedLabel::invalid(ParsedLabel::Kind::MultiWord);

  std::string folded(word);
  std::transform(folded.begin(), folded.end(), folded.begin(), [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  });
  if (opts.lenient_punctuation) {
    while (!folded.empty() &&
           std::string_view(".,!?;:").find(folded.back()) != std::string_view::npos)
      folded.pop_back();
    if (folded.empty()) return ParsedLabel::invalid(ParsedLabel::Kind::EmptyText);
  }

  const auto cls = class_from_string(folded);
  if (!cls) return ParsedLabel::invalid(ParsedLabel::Kind::NotAClass);
  return ParsedLabel::make_valid(*cls);
}

ParsedLabel parse_response(const RawResponse& raw, const ParseOptions& opts) {
  return parse_text(raw.text, opts);
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kTable[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const uint32_t v = (static_cast<uint8_t>(bytes[i]) << 16) |
                       (static_cast<uint8_t>(bytes[i + 1]) << 8) |
                       static_cast<uint8_t>(bytes[i + 2]);
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += kTable[v & 63];
  }
  const size_t rest = bytes.size() - i;
  if (rest == 1) {
    const uint32_t v = static_cast<uint8_t>(bytes[i]) << 16;
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const uint32_t v = (static_cast<uint8_t>(bytes[i]) << 16) |
                       (static_cast<uint8_t>(bytes[i + 1]) << 8);
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

}  // namespace sortcell::classify
