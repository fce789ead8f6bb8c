#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace storyreel {

using json = nlohmann::json;

// Minimal shape contract for a model's structured answer: the root kind and
// the keys an object root must carry.
struct ExpectedShape {
  enum class Root { object, array, any };
  Root root = Root::object;
  std::vector<std::string> required_keys;

  bool accepts(const json& value, std::string* why = nullptr) const;
};

struct ParseResult {
  json value;
  int tier = 0;  // 1 = fenced strict, 2 = lenient extraction
};

// Three tiers: (1) strict parse of a fenced ``` block; (2) lenient extraction of
// the first balanced {...} / [...] region that parses after repairing smart
// quotes and trailing commas; (3) Errc::ParseFailed carrying offsets and an
// excerpt of the raw text. Total over arbitrary bytes.
ParseResult parse_structured(std::string_view completion, const ExpectedShape& shape);

// Exposed for tests: replaces U+201C/U+201D with '"' and drops commas that
// directly precede a closing bracket (outside string literals).
std::string repair_json_text(std::string_view text);

}  // namespace storyreel
