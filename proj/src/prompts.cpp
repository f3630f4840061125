#include "aesaudit/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace aesaudit {

namespace {

constexpr const char* kPlaceholder = "[demographic]";
constexpr const char* kLeadClause = "As a [demographic], ";

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Built-in copies of templates/*.txt, byte-identical to the files.
const char* builtin_template(Task t) {
    switch (t) {
        case Task::Perception:
            return R"(task=perception template_version=v1
## Task
As a [demographic], please analyze the provided image based on the following image assessment task:
Aesthetic perception: evaluate the image based on low-level elements like technical quality, color balance, lighting, sharpness, exposure, contrast, and overall visual impact. Choose one of the following: "positive", "normal", "negative".

## Response Format
perception: positive/normal/negative

## Note
- Do not indicate that you use additional information/context in your answer; only use it implicitly.
- Choose only one word from the available options.
)";
        case Task::Assessment:
            return R"(task=assessment template_version=v1
## Task
As a [demographic], please analyze the provided image based on the following image assessment task:
Aesthetic assessment: evaluate the aesthetic appeal of the image, focusing on elements like composition, color harmony, visual balance, and overall attractiveness. Choose one of the following: "positive", "normal", "negative".

## Response Format
aesthetic: positive/normal/negative

## Note
- Do not indicate that you use additional information/context in your answer; only use it implicitly.
- Choose only one word from the available options.
)";
        case Task::Empathy:
            return R"(task=empathy template_version=v1
## Task
As a [demographic], please analyze the provided image based on the following image assessment task:
Aesthetic empathy: analyze the emotion the image evokes or conveys to you. Choose one of the following: "amusement", "excitement", "contentment", "awe", "disgust", "sadness", "fear", "neutral".

## Response Format
empathy: amusement/excitement/contentment/awe/disgust/sadness/fear/neutral

## Note
- Do not indicate that you use additional information/context in your answer; only use it implicitly.
- Choose only one word from the available options.
)";
    }
    throw DataError("unknown task");
}

std::map<Identity, std::string> builtin_phrases() {
    std::map<Identity, std::string> out;
    for (const Identity& g : identity_grid()) {
        std::string phrase;
        switch (g.category) {
            case IdentityCategory::Age: {
                // "22-25" -> "22 to 25 year old viewer"
                std::string b = g.bin_name();
                size_t dash = b.find('-');
                phrase = b.substr(0, dash) + " to " + b.substr(dash + 1) +
                         " year old viewer";
                break;
            }
            case IdentityCategory::Gender:
                phrase = g.bin_name() + " viewer";
                break;
            case IdentityCategory::Education:
                phrase = g.bin_name() + "-educated viewer";
                break;
        }
        out[g] = phrase;
    }
    return out;
}

std::string capitalize_first(std::string s) {
    for (char& c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) {
            c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            break;
        }
    return s;
}

}  // namespace

PromptTemplate parse_template_text(const std::string& text) {
    size_t nl = text.find('\n');
    if (nl == std::string::npos)
        throw DataError("template missing front-matter line");
    std::string front = text.substr(0, nl);
    PromptTemplate tpl;
    std::istringstream fs(front);
    std::string tok;
    while (fs >> tok) {
        size_t eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "task") {
            auto t = task_from_string(val);
            if (!t) throw DataError("template declares unknown task: " + val);
            tpl.task = *t;
        } else if (key == "template_version") {
            tpl.template_version = val;
        }
    }
    if (tpl.template_version.empty())
        throw DataError("template missing template_version");

    // body = everything after the front-matter line, verbatim
    tpl.body = text.substr(nl + 1);

    // pull out the response-format line and the notes for inspection
    std::istringstream body(tpl.body);
    std::string line;
    enum { None, Format, Note } section = None;
    while (std::getline(body, line)) {
        if (line.rfind("## Response Format", 0) == 0) {
            section = Format;
            continue;
        }
        if (line.rfind("## Note", 0) == 0) {
            section = Note;
            continue;
        }
        if (line.rfind("## ", 0) == 0) {
            section = None;
            continue;
        }
        if (trim(line).empty()) continue;
        if (section == Format && tpl.response_format_line.empty())
            tpl.response_format_line = trim(line);
        else if (section == Note)
            tpl.notes.push_back(trim(line));
    }
    if (tpl.response_format_line.empty())
        throw DataError("template missing '## Response Format' section");
    return tpl;
}

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    for (Task t : kAllTasks)
        lib.templates_[t] = parse_template_text(builtin_template(t));
    lib.phrases_ = builtin_phrases();
    return lib;
}

PromptLibrary PromptLibrary::load(const std::string& dir) {
    PromptLibrary lib;
    for (Task t : kAllTasks) {
        std::string path = dir + "/" + to_string(t) + ".txt";
        PromptTemplate tpl = parse_template_text(read_file(path));
        if (tpl.task != t)
            throw DataError(path + " declares task '" + to_string(tpl.task) +
                            "'");
        lib.templates_[t] = std::move(tpl);
    }
    std::ifstream in(dir + "/demographic_phrases.tsv");
    if (!in) throw FileNotFound(dir + "/demographic_phrases.tsv");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string cat, bin, phrase;
        if (!std::getline(ls, cat, '\t') || !std::getline(ls, bin, '\t') ||
            !std::getline(ls, phrase))
            throw DataError("bad phrase table line: " + line);
        auto id = identity_from_strings(cat, bin);
        if (!id) throw DataError("phrase table: unknown identity " + cat + "/" + bin);
        lib.phrases_[*id] = trim(phrase);
    }
    if (lib.phrases_.size() != identity_grid().size())
        throw DataError("phrase table incomplete: " +
                        std::to_string(lib.phrases_.size()) + " of 12 entries");
    return lib;
}

const PromptTemplate& PromptLibrary::get(Task task) const {
    return templates_.at(task);
}

const std::string& PromptLibrary::demographic_phrase(
    const Identity& identity) const {
    return phrases_.at(identity);
}

RenderedPrompt PromptLibrary::build_prompt(
    Task task, const std::optional<Identity>& identity) const {
    const PromptTemplate& tpl = templates_.at(task);
    std::string text = tpl.body;
    if (identity) {
        size_t pos = text.find(kPlaceholder);
        if (pos == std::string::npos)
            throw DataError("template for " + to_string(task) +
                            " has no [demographic] placeholder");
        text.replace(pos, std::string(kPlaceholder).size(),
                     demographic_phrase(*identity));
    } else {
        size_t pos = text.find(kLeadClause);
        if (pos == std::string::npos)
            throw DataError("template for " + to_string(task) +
                            " has no leading demographic clause");
        std::string tail = text.substr(pos + std::string(kLeadClause).size());
        text = text.substr(0, pos) + capitalize_first(tail);
    }
    return RenderedPrompt{std::move(text), task, identity,
                          tpl.template_version};
}

}  // namespace aesaudit
