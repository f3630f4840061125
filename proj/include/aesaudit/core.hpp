#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aesaudit/errors.hpp"

namespace aesaudit {

// ---------------------------------------------------------------------------
// Closed vocabularies
// ---------------------------------------------------------------------------

enum class Task { Perception, Assessment, Empathy };

inline constexpr Task kAllTasks[] = {Task::Perception, Task::Assessment,
                                     Task::Empathy};

enum class OutputLabel {
    // Perception / Assessment set, canonical order
    Positive,
    Normal,
    Negative,
    // Empathy set, canonical order
    Amusement,
    Excitement,
    Contentment,
    Awe,
    Disgust,
    Sadness,
    Fear,
    Neutral,
};

enum class IdentityCategory { Age, Gender, Education };

inline constexpr IdentityCategory kAllCategories[] = {
    IdentityCategory::Age, IdentityCategory::Gender,
    IdentityCategory::Education};

enum class ImageType {
    Portrait,
    Animal,
    Plant,
    Scene,
    Building,
    StillLife,
    NightScene,
    Indoor,
    Others,
};

inline constexpr int kNumImageTypes = 9;

enum class Dataset { PARA, LAPIS, Custom };

enum class ParseStatus { Ok, Fuzzy, Unparseable };

// One demographic identity: a category plus a bin index into that
// category's canonical bin list (age 5, gender 2, education 5).
struct Identity {
    IdentityCategory category;
    int bin = 0;

    auto operator<=>(const Identity&) const = default;

    // Canonical lowercase bin name, e.g. "22-25", "female", "university".
    const std::string& bin_name() const;
    // "age/22-25" style key used in tables and file names.
    std::string key() const;
};

// ---------------------------------------------------------------------------
// Vocabulary accessors
// ---------------------------------------------------------------------------

// Closed label set for a task, in canonical (paper listing) order.
const std::vector<OutputLabel>& label_set(Task task);

// Index of a label within its task's canonical order; throws
// InvalidLabelForTask if the label is not in the task's set.
int label_index(Task task, OutputLabel label);

bool label_in_task(Task task, OutputLabel label);

// All 12 identities: 5 age bins, then gender, then 5 education bins.
const std::vector<Identity>& identity_grid();

std::vector<Identity> identities_in(IdentityCategory category);

const std::vector<std::string>& category_bins(IdentityCategory category);

// ---------------------------------------------------------------------------
// String forms (lowercase canonical; used verbatim in JSONL and CSV)
// ---------------------------------------------------------------------------

std::string to_string(Task t);
std::string to_string(OutputLabel l);
std::string to_string(IdentityCategory c);
std::string to_string(ImageType m);
std::string to_string(Dataset d);
std::string to_string(ParseStatus s);

std::optional<Task> task_from_string(const std::string& s);
std::optional<OutputLabel> label_from_string(const std::string& s);
std::optional<IdentityCategory> category_from_string(const std::string& s);
std::optional<ImageType> image_type_from_string(const std::string& s);
std::optional<Dataset> dataset_from_string(const std::string& s);
std::optional<ParseStatus> parse_status_from_string(const std::string& s);
std::optional<Identity> identity_from_strings(const std::string& category,
                                              const std::string& bin);

// Keyword on the response-format line of each task's prompt
// ("perception", "aesthetic", "empathy").
const std::string& response_keyword(Task t);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct ImageRecord {
    std::string image_id;
    std::string path_or_uri;
    ImageType image_type = ImageType::Others;
    Dataset dataset = Dataset::Custom;
};

struct ResponseRecord {
    std::string model_id;
    std::string image_id;
    Task task = Task::Perception;
    std::optional<Identity> identity;  // absent = default prompt
    std::string raw_text;
    std::optional<OutputLabel> parsed_label;
    ParseStatus parse_status = ParseStatus::Unparseable;
    std::string timestamp;  // UTC, ISO 8601
};

struct AnnotationRecord {
    std::string image_id;
    std::string annotator_id;
    // category name -> raw value as found in the dataset export
    std::vector<std::pair<std::string, std::string>> demographics;
    std::optional<double> perception_score;
    std::optional<double> assessment_score;
    std::optional<OutputLabel> emotion;  // Empathy set
};

// Enforces the ResponseRecord invariants and returns the (unchanged)
// record. Throws MissingField or InvalidLabelForTask.
ResponseRecord validate_response(const ResponseRecord& record);

// ---------------------------------------------------------------------------
// JSON / JSONL
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const Identity& v);
void from_json(const nlohmann::json& j, Identity& v);
void to_json(nlohmann::json& j, const ImageRecord& v);
void from_json(const nlohmann::json& j, ImageRecord& v);
void to_json(nlohmann::json& j, const ResponseRecord& v);
void from_json(const nlohmann::json& j, ResponseRecord& v);
void to_json(nlohmann::json& j, const AnnotationRecord& v);
void from_json(const nlohmann::json& j, AnnotationRecord& v);

std::vector<ResponseRecord> read_response_jsonl(const std::string& path);
void write_response_jsonl(const std::string& path,
                          const std::vector<ResponseRecord>& records);

// Current time as ISO 8601 UTC ("2025-01-01T00:00:00Z").
std::string utc_now_iso8601();

std::string lowercase(std::string s);
std::string trim(const std::string& s);

}  // namespace aesaudit
