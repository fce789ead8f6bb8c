#include "storyreel/prompt_template.hpp"

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"

namespace storyreel {

PromptTemplate PromptTemplate::parse(std::string id, std::string_view text, const std::set<std::string>& allowed) {
  PromptTemplate t;
  t.id_ = std::move(id);

  while (text.starts_with("#!")) {
    auto eol = text.find('\n');
    std::string_view meta = text.substr(2, eol == std::string_view::npos ? std::string_view::npos : eol - 2);
    auto colon = meta.find(':');
    if (colon != std::string_view::npos) {
      std::string key(meta.substr(0, colon));
      std::erase(key, ' ');
      if (key == "version") t.version_ = std::stoi(std::string(meta.substr(colon + 1)));
    }
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
  }

  std::string literal;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      literal.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      literal.push_back('}');
      ++i;
    } else if (c == '{') {
      auto close = text.find('}', i);
      if (close == std::string_view::npos)
        throw Error(Errc::Config, "template '" + t.id_ + "': unterminated placeholder at offset " + std::to_string(i));
      std::string name(text.substr(i + 1, close - i - 1));
      if (!allowed.contains(name))
        throw Error(Errc::Config, "template '" + t.id_ + "': unknown placeholder {" + name + "}");
      if (!literal.empty()) t.pieces_.push_back({false, std::move(literal)});
      literal.clear();
      t.pieces_.push_back({true, name});
      t.placeholders_.insert(name);
      i = close;
    } else if (c == '}') {
      throw Error(Errc::Config, "template '" + t.id_ + "': stray '}' at offset " + std::to_string(i));
    } else {
      literal.push_back(c);
    }
  }
  if (!literal.empty()) t.pieces_.push_back({false, std::move(literal)});
  return t;
}

std::string PromptTemplate::render(const TemplateVars& vars) const {
  std::string out;
  for (const auto& p : pieces_) {
    if (!p.is_var) {
      out += p.text;
      continue;
    }
    auto it = vars.find(p.text);
    if (it == vars.end())
      throw Error(Errc::Validation, "template '" + id_ + "': placeholder {" + p.text + "} is unbound");
    out += it->second;
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& TemplateSet::catalog() {
  static const std::map<std::string, std::set<std::string>> kCatalog = {
      {"system", {}},
      {"themes", {"count", "genres"}},
      {"overview", {"theme", "genre"}},
      {"style", {"theme", "overview"}},
      {"characters", {"theme", "overview", "min_characters", "max_characters"}},
      {"chapters", {"theme", "overview", "count"}},
      {"threads", {"overview", "chapter_index", "chapter_title", "chapter_summary", "previous_recap", "count"}},
      {"frames",
       {"overview", "chapter_index", "chapter_summary", "thread_index", "thread_summary", "previous_recap", "count",
        "character_names"}},
      {"repair", {"violation"}},
      {"qa_overview", {"overview", "count"}},
      {"qa_plot", {"aspect", "overview", "story_outline", "count"}},
      {"qa_temporal", {"overview", "event_sets", "count"}},
      {"judge", {"aspect", "question", "ground_truth", "answer_1", "answer_2"}},
      {"judge_force", {}},
  };
  return kCatalog;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(Errc::Config, "template directory not found: " + dir.string());
  TemplateSet set;
  for (const auto& [id, allowed] : catalog()) {
    auto path = dir / (id + ".txt");
    if (!std::filesystem::exists(path)) throw Error(Errc::Config, "missing template file: " + path.string());
    set.templates_.emplace(id, PromptTemplate::parse(id, read_file(path), allowed));
  }
  return set;
}

const PromptTemplate& TemplateSet::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(Errc::Config, "no template '" + std::string(id) + "'");
  return it->second;
}

}  // namespace storyreel
