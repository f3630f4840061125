#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aesaudit/core.hpp"

namespace aesaudit {

// One task's prompt template, parsed from a template file. The body holds
// the literal placeholder "[demographic]".
struct PromptTemplate {
    Task task = Task::Perception;
    std::string template_version;
    std::string body;
    std::string response_format_line;
    std::vector<std::string> notes;
};

struct RenderedPrompt {
    std::string text;
    Task task = Task::Perception;
    std::optional<Identity> identity;
    std::string template_version;
};

// Loads the three task templates plus the demographic phrase table.
// Templates are data files; the built-in copies exist so the library works
// without a template directory and are kept in sync with templates/ by a
// unit test.
class PromptLibrary {
public:
    static PromptLibrary builtin();
    static PromptLibrary load(const std::string& dir);

    const PromptTemplate& get(Task task) const;

    // Deterministic natural-language phrase for an identity, e.g.
    // "female viewer", "22 to 25 year old viewer".
    const std::string& demographic_phrase(const Identity& identity) const;

    // Renders the task template. With an identity, "[demographic]" is
    // replaced by its phrase; without, the leading "As a [demographic], "
    // clause is removed and the sentence re-capitalized.
    RenderedPrompt build_prompt(Task task,
                                const std::optional<Identity>& identity) const;

private:
    std::map<Task, PromptTemplate> templates_;
    std::map<Identity, std::string> phrases_;
};

// Parses a single template file (front-matter line, then sections).
PromptTemplate parse_template_text(const std::string& text);

}  // namespace aesaudit
