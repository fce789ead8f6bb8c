#include "storyreel/structured_parse.hpp"

#include <optional>

#include "storyreel/errors.hpp"

namespace storyreel {

namespace {

constexpr std::size_t kMaxCandidates = 256;

constexpr std::string_view kLeftDq = "\xE2\x80\x9C";   // U+201C
constexpr std::string_view kRightDq = "\xE2\x80\x9D";  // U+201D

struct Fenced {
  std::size_t offset;
  std::string_view body;
};

std::vector<Fenced> find_fenced_blocks(std::string_view text) {
  std::vector<Fenced> out;
  std::size_t pos = 0;
  while (out.size() < kMaxCandidates) {
    std::size_t open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    std::size_t body_start = text.find('\n', open + 3);
    if (body_start == std::string_view::npos) break;
    ++body_start;
    std::size_t close = text.find("```", body_start);
    if (close == std::string_view::npos) break;
    out.push_back({body_start, text.substr(body_start, close - body_start)});
    pos = close + 3;
  }
  return out;
}

std::optional<json> strict_parse(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

// Length of the balanced bracketed region starting at text[start], or npos.
// Strings delimited by '"' (or curly double quotes) are skipped.
std::size_t balanced_length(std::string_view text, std::size_t start) {
  std::vector<char> closers;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"' || text.substr(i, 3) == kRightDq || text.substr(i, 3) == kLeftDq) {
        in_string = false;
        if (c != '"') i += 2;
      }
      continue;
    }
    if (c == '"' || text.substr(i, 3) == kLeftDq || text.substr(i, 3) == kRightDq) {
      in_string = true;
      if (c != '"') i += 2;
    } else if (c == '{') {
      closers.push_back('}');
    } else if (c == '[') {
      closers.push_back(']');
    } else if (c == '}' || c == ']') {
      if (closers.empty() || closers.back() != c) return std::string_view::npos;
      closers.pop_back();
      if (closers.empty()) return i - start + 1;
    }
  }
  return std::string_view::npos;
}

std::string printable_excerpt(std::string_view text, std::size_t limit = 160) {
  std::string out;
  for (std::size_t i = 0; i < text.size() && i < limit; ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (c == '\n') {
      out += "\\n";
    } else if (c < 0x20 || c >= 0x7F) {
      static constexpr char kHex[] = "0123456789abcdef";
      out += "\\x";
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  if (text.size() > limit) out += "...";
  return out;
}

std::size_t parse_error_byte(std::string_view text) {
  try {
    json discarded = json::parse(text.begin(), text.end());
    static_cast<void>(discarded);
  } catch (const json::parse_error& e) {
    return e.byte;
  } catch (const json::exception&) {
  }
  return 0;
}

}  // namespace

bool ExpectedShape::accepts(const json& value, std::string* why) const {
  auto fail = [&](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  if (root == Root::object && !value.is_object()) return fail("expected an object");
  if (root == Root::array && !value.is_array()) return fail("expected an array");
  if (value.is_object()) {
    for (const auto& key : required_keys)
      if (!value.contains(key)) return fail("missing key '" + key + "'");
  }
  return true;
}

std::string repair_json_text(std::string_view text) {
  std::string quoted;
  quoted.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text.substr(i, 3) == kLeftDq || text.substr(i, 3) == kRightDq) {
      quoted.push_back('"');
      i += 3;
    } else {
      quoted.push_back(text[i++]);
    }
  }
  std::string out;
  out.reserve(quoted.size());
  bool in_string = false;
  for (std::size_t i = 0; i < quoted.size(); ++i) {
    char c = quoted[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < quoted.size()) {
        out.push_back(quoted[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < quoted.size() && (quoted[j] == ' ' || quoted[j] == '\n' || quoted[j] == '\t' || quoted[j] == '\r'))
        ++j;
      if (j < quoted.size() && (quoted[j] == '}' || quoted[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

ParseResult parse_structured(std::string_view completion, const ExpectedShape& shape) {
  std::string last_reason;
  auto fenced = find_fenced_blocks(completion);

  for (const auto& block : fenced) {
    if (auto j = strict_parse(block.body)) {
      if (shape.accepts(*j, &last_reason)) return {std::move(*j), 1};
    }
  }

  std::size_t tried = 0;
  std::size_t first_open = std::string_view::npos;
  std::size_t first_error_at = std::string_view::npos;
  auto try_region = [&](std::string_view region, std::size_t offset) -> std::optional<json> {
    std::string repaired = repair_json_text(region);
    if (auto j = strict_parse(repaired)) {
      if (shape.accepts(*j, &last_reason)) return j;
    } else if (first_error_at == std::string_view::npos) {
      first_error_at = offset + parse_error_byte(repaired);
    }
    return std::nullopt;
  };

  for (const auto& block : fenced) {
    if (auto j = try_region(block.body, block.offset)) return {std::move(*j), 2};
  }
  for (std::size_t i = 0; i < completion.size() && tried < kMaxCandidates; ++i) {
    char c = completion[i];
    if (c != '{' && c != '[') continue;
    if (first_open == std::string_view::npos) first_open = i;
    ++tried;
    std::size_t len = balanced_length(completion, i);
    if (len == std::string_view::npos) continue;
    if (auto j = try_region(completion.substr(i, len), i)) return {std::move(*j), 2};
  }

  std::string diag = "no structured value found";
  if (first_open == std::string_view::npos && fenced.empty()) {
    diag += " (no fenced block and no bracket in " + std::to_string(completion.size()) + " bytes)";
  } else {
    if (first_open != std::string_view::npos) diag += "; first bracket at offset " + std::to_string(first_open);
    if (first_error_at != std::string_view::npos)
      diag += "; first syntax error near offset " + std::to_string(first_error_at);
    if (!last_reason.empty()) diag += "; last candidate rejected: " + last_reason;
  }
  diag += "; raw: \"" + printable_excerpt(completion) + "\"";
  throw Error(Errc::ParseFailed, diag);
}

}  // namespace storyreel
