#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace storyreel {

using TemplateVars = std::map<std::string, std::string>;

// Text with `{name}` placeholders; `{{` and `}}` are literal braces. Leading
// lines starting with "#!" are metadata ("#! version: 2") and are not rendered.
class PromptTemplate {
 public:
  // Throws Config when the text uses a placeholder outside `allowed`, or the
  // braces are unbalanced.
  static PromptTemplate parse(std::string id, std::string_view text, const std::set<std::string>& allowed);

  // Throws Validation naming the first placeholder without a binding.
  std::string render(const TemplateVars& vars) const;

  const std::string& id() const { return id_; }
  int version() const { return version_; }
  const std::set<std::string>& placeholders() const { return placeholders_; }

 private:
  struct Piece {
    bool is_var = false;
    std::string text;
  };
  std::string id_;
  int version_ = 1;
  std::vector<Piece> pieces_;
  std::set<std::string> placeholders_;
};

// Every template the pipeline renders, loaded from `<dir>/<id>.txt`.
class TemplateSet {
 public:
  static TemplateSet load(const std::filesystem::path& dir);

  const PromptTemplate& get(std::string_view id) const;

  // Template ids and the placeholders each may use.
  static const std::map<std::string, std::set<std::string>>& catalog();

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace storyreel
