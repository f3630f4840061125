#include "aesaudit/core.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace aesaudit {

using nlohmann::json;

namespace {

const std::vector<OutputLabel> kTriLevel = {
    OutputLabel::Positive, OutputLabel::Normal, OutputLabel::Negative};

const std::vector<OutputLabel> kEmotions = {
    OutputLabel::Amusement, OutputLabel::Excitement, OutputLabel::Contentment,
    OutputLabel::Awe,       OutputLabel::Disgust,    OutputLabel::Sadness,
    OutputLabel::Fear,      OutputLabel::Neutral};

const std::vector<std::string> kAgeBins = {"18-21", "22-25", "26-29", "30-34",
                                           "35-40"};
const std::vector<std::string> kGenderBins = {"male", "female"};
const std::vector<std::string> kEducationBins = {
    "junior high school", "technical secondary school", "senior high school",
    "university", "junior college"};

}  // namespace

const std::vector<OutputLabel>& label_set(Task task) {
    return task == Task::Empathy ? kEmotions : kTriLevel;
}

int label_index(Task task, OutputLabel label) {
    const auto& set = label_set(task);
    auto it = std::find(set.begin(), set.end(), label);
    if (it == set.end())
        throw InvalidLabelForTask("label '" + to_string(label) +
                                  "' is not in the label set of task '" +
                                  to_string(task) + "'");
    return static_cast<int>(it - set.begin());
}

bool label_in_task(Task task, OutputLabel label) {
    const auto& set = label_set(task);
    return std::find(set.begin(), set.end(), label) != set.end();
}

const std::vector<std::string>& category_bins(IdentityCategory category) {
    switch (category) {
        case IdentityCategory::Age: return kAgeBins;
        case IdentityCategory::Gender: return kGenderBins;
        case IdentityCategory::Education: return kEducationBins;
    }
    throw DataError("unknown identity category");
}

const std::string& Identity::bin_name() const {
    return category_bins(category).at(static_cast<size_t>(bin));
}

std::string Identity::key() const {
    return to_string(category) + "/" + bin_name();
}

const std::vector<Identity>& identity_grid() {
    static const std::vector<Identity> grid = [] {
        std::vector<Identity> g;
        for (IdentityCategory c : kAllCategories)
            for (int b = 0; b < static_cast<int>(category_bins(c).size()); ++b)
                g.push_back(Identity{c, b});
        return g;
    }();
    return grid;
}

std::vector<Identity> identities_in(IdentityCategory category) {
    std::vector<Identity> out;
    for (const Identity& g : identity_grid())
        if (g.category == category) out.push_back(g);
    return out;
}

// --- string forms ----------------------------------------------------------

std::string to_string(Task t) {
    switch (t) {
        case Task::Perception: return "perception";
        case Task::Assessment: return "assessment";
        case Task::Empathy: return "empathy";
    }
    return "?";
}

std::string to_string(OutputLabel l) {
    switch (l) {
        case OutputLabel::Positive: return "positive";
        case OutputLabel::Normal: return "normal";
        case OutputLabel::Negative: return "negative";
        case OutputLabel::Amusement: return "amusement";
        case OutputLabel::Excitement: return "excitement";
        case OutputLabel::Contentment: return "contentment";
        case OutputLabel::Awe: return "awe";
        case OutputLabel::Disgust: return "disgust";
        case OutputLabel::Sadness: return "sadness";
        case OutputLabel::Fear: return "fear";
        case OutputLabel::Neutral: return "neutral";
    }
    return "?";
}

std::string to_string(IdentityCategory c) {
    switch (c) {
        case IdentityCategory::Age: return "age";
        case IdentityCategory::Gender: return "gender";
        case IdentityCategory::Education: return "education";
    }
    return "?";
}

std::string to_string(ImageType m) {
    switch (m) {
        case ImageType::Portrait: return "portrait";
        case ImageType::Animal: return "animal";
        case ImageType::Plant: return "plant";
        case ImageType::Scene: return "scene";
        case ImageType::Building: return "building";
        case ImageType::StillLife: return "still life";
        case ImageType::NightScene: return "night scene";
        case ImageType::Indoor: return "indoor";
        case ImageType::Others: return "others";
    }
    return "?";
}

std::string to_string(Dataset d) {
    switch (d) {
        case Dataset::PARA: return "para";
        case Dataset::LAPIS: return "lapis";
        case Dataset::Custom: return "custom";
    }
    return "?";
}

std::string to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::Ok: return "ok";
        case ParseStatus::Fuzzy: return "fuzzy";
        case ParseStatus::Unparseable: return "unparseable";
    }
    return "?";
}

namespace {

template <typename Enum>
std::optional<Enum> enum_from_string(const std::string& s,
                                     std::initializer_list<Enum> values) {
    std::string low = lowercase(trim(s));
    for (Enum v : values)
        if (to_string(v) == low) return v;
    return std::nullopt;
}

}  // namespace

std::optional<Task> task_from_string(const std::string& s) {
    return enum_from_string(s, {Task::Perception, Task::Assessment,
                                Task::Empathy});
}

std::optional<OutputLabel> label_from_string(const std::string& s) {
    return enum_from_string(
        s, {OutputLabel::Positive, OutputLabel::Normal, OutputLabel::Negative,
            OutputLabel::Amusement, OutputLabel::Excitement,
            OutputLabel::Contentment, OutputLabel::Awe, OutputLabel::Disgust,
            OutputLabel::Sadness, OutputLabel::Fear, OutputLabel::Neutral});
}

std::optional<IdentityCategory> category_from_string(const std::string& s) {
    return enum_from_string(s, {IdentityCategory::Age, IdentityCategory::Gender,
                                IdentityCategory::Education});
}

std::optional<ImageType> image_type_from_string(const std::string& s) {
    return enum_from_string(
        s, {ImageType::Portrait, ImageType::Animal, ImageType::Plant,
            ImageType::Scene, ImageType::Building, ImageType::StillLife,
            ImageType::NightScene, ImageType::Indoor, ImageType::Others});
}

std::optional<Dataset> dataset_from_string(const std::string& s) {
    return enum_from_string(s, {Dataset::PARA, Dataset::LAPIS,
                                Dataset::Custom});
}

std::optional<ParseStatus> parse_status_from_string(const std::string& s) {
    return enum_from_string(s, {ParseStatus::Ok, ParseStatus::Fuzzy,
                                ParseStatus::Unparseable});
}

std::optional<Identity> identity_from_strings(const std::string& category,
                                              const std::string& bin) {
    auto cat = category_from_string(category);
    if (!cat) return std::nullopt;
    // Accept the en-dash the age bins are often printed with.
    std::string b = lowercase(trim(bin));
    size_t pos;
    while ((pos = b.find("–")) != std::string::npos)
        b.replace(pos, 3, "-");
    const auto& bins = category_bins(*cat);
    for (int i = 0; i < static_cast<int>(bins.size()); ++i)
        if (bins[static_cast<size_t>(i)] == b) return Identity{*cat, i};
    return std::nullopt;
}

const std::string& response_keyword(Task t) {
    static const std::string kPerception = "perception";
    static const std::string kAesthetic = "aesthetic";
    static const std::string kEmpathy = "empathy";
    switch (t) {
        case Task::Perception: return kPerception;
        case Task::Assessment: return kAesthetic;
        case Task::Empathy: return kEmpathy;
    }
    return kPerception;
}

// --- record validation -----------------------------------------------------

ResponseRecord validate_response(const ResponseRecord& record) {
    if (record.model_id.empty()) throw MissingField("model_id is empty");
    if (record.image_id.empty()) throw MissingField("image_id is empty");
    bool has_label = record.parsed_label.has_value();
    bool should_have = record.parse_status != ParseStatus::Unparseable;
    if (should_have && !has_label)
        throw MissingField("parse_status is " + to_string(record.parse_status) +
                           " but parsed_label is absent");
    if (!should_have && has_label)
        throw MissingField("parsed_label present on unparseable record");
    if (has_label && !label_in_task(record.task, *record.parsed_label))
        throw InvalidLabelForTask("label '" + to_string(*record.parsed_label) +
                                  "' not valid for task '" +
                                  to_string(record.task) + "'");
    return record;
}

// --- JSON ------------------------------------------------------------------

void to_json(json& j, const Identity& v) {
    j = json{{"category", to_string(v.category)}, {"bin", v.bin_name()}};
}

void from_json(const json& j, Identity& v) {
    auto id = identity_from_strings(j.at("category").get<std::string>(),
                                    j.at("bin").get<std::string>());
    if (!id)
        throw DataError("unknown identity: " + j.dump());
    v = *id;
}

void to_json(json& j, const ImageRecord& v) {
    j = json{{"image_id", v.image_id},
             {"path_or_uri", v.path_or_uri},
             {"image_type", to_string(v.image_type)},
             {"dataset", to_string(v.dataset)}};
}

void from_json(const json& j, ImageRecord& v) {
    v.image_id = j.at("image_id").get<std::string>();
    v.path_or_uri = j.value("path_or_uri", "");
    std::string mt = j.value("image_type", "others");
    v.image_type = image_type_from_string(mt).value_or(ImageType::Others);
    v.dataset =
        dataset_from_string(j.value("dataset", "custom")).value_or(Dataset::Custom);
}

void to_json(json& j, const ResponseRecord& v) {
    j = json{{"model_id", v.model_id},
             {"image_id", v.image_id},
             {"task", to_string(v.task)},
             {"raw_text", v.raw_text},
             {"parse_status", to_string(v.parse_status)},
             {"timestamp", v.timestamp}};
    j["identity"] = v.identity ? json(*v.identity) : json(nullptr);
    j["parsed_label"] =
        v.parsed_label ? json(to_string(*v.parsed_label)) : json(nullptr);
}

void from_json(const json& j, ResponseRecord& v) {
    v.model_id = j.at("model_id").get<std::string>();
    v.image_id = j.at("image_id").get<std::string>();
    auto t = task_from_string(j.at("task").get<std::string>());
    if (!t) throw DataError("unknown task in record: " + j.dump());
    v.task = *t;
    if (j.contains("identity") && !j["identity"].is_null())
        v.identity = j["identity"].get<Identity>();
    else
        v.identity.reset();
    v.raw_text = j.value("raw_text", "");
    if (j.contains("parsed_label") && !j["parsed_label"].is_null()) {
        auto l = label_from_string(j["parsed_label"].get<std::string>());
        if (!l) throw DataError("unknown label in record: " + j.dump());
        v.parsed_label = *l;
    } else {
        v.parsed_label.reset();
    }
    auto st = parse_status_from_string(j.value("parse_status", "unparseable"));
    v.parse_status = st.value_or(ParseStatus::Unparseable);
    v.timestamp = j.value("timestamp", "");
}

void to_json(json& j, const AnnotationRecord& v) {
    j = json{{"image_id", v.image_id}, {"annotator_id", v.annotator_id}};
    for (const auto& [k, val] : v.demographics) j[k] = val;
    if (v.perception_score) j["perception_score"] = *v.perception_score;
    if (v.assessment_score) j["assessment_score"] = *v.assessment_score;
    if (v.emotion) j["emotion"] = to_string(*v.emotion);
}

void from_json(const json& j, AnnotationRecord& v) {
    v.image_id = j.at("image_id").get<std::string>();
    v.annotator_id = j.value("annotator_id", "");
    v.demographics.clear();
    for (const char* key : {"age", "gender", "education"})
        if (j.contains(key) && !j[key].is_null()) {
            std::string raw = j[key].is_string()
                                  ? j[key].get<std::string>()
                                  : j[key].dump();
            v.demographics.emplace_back(key, raw);
        }
    if (j.contains("perception_score") && !j["perception_score"].is_null())
        v.perception_score = j["perception_score"].get<double>();
    if (j.contains("assessment_score") && !j["assessment_score"].is_null())
        v.assessment_score = j["assessment_score"].get<double>();
    if (j.contains("emotion") && !j["emotion"].is_null()) {
        auto l = label_from_string(j["emotion"].get<std::string>());
        if (!l) throw DataError("unknown emotion: " + j.dump());
        v.emotion = *l;
    }
}

std::vector<ResponseRecord> read_response_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    std::vector<ResponseRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line).get<ResponseRecord>());
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " +
                            e.what());
        }
    }
    return out;
}

void write_response_jsonl(const std::string& path,
                          const std::vector<ResponseRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& r : records) out << json(r).dump() << "\n";
}

std::string utc_now_iso8601() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return s;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace aesaudit
