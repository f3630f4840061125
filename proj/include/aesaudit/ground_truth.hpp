#pragma once

#include <map>
#include <string>
#include <vector>

#include "aesaudit/core.hpp"

namespace aesaudit {

struct ScoreScale {
    double r = 1.0;  // lowest score in the dataset
    double R = 5.0;  // highest score

    ScoreScale() = default;
    ScoreScale(double lo, double hi);
};

// Maps a score in [r, R] onto negative/normal/positive via three
// equal-width intervals. s = r closes into the first (negative) interval.
OutputLabel discretize(double s, const ScoreScale& scale);

struct GroupPreferenceLabel {
    std::string image_id;
    Identity group{IdentityCategory::Gender, 0};
    Task task = Task::Perception;
    OutputLabel label = OutputLabel::Normal;
    int support = 1;  // number of annotators aggregated
    bool ambiguous = false;
};

void to_json(nlohmann::json& j, const GroupPreferenceLabel& v);
void from_json(const nlohmann::json& j, GroupPreferenceLabel& v);

std::vector<GroupPreferenceLabel> read_ground_truth_jsonl(
    const std::string& path);
void write_ground_truth_jsonl(const std::string& path,
                              const std::vector<GroupPreferenceLabel>& labels);

// Counts of raw demographic values that mapped to no declared bin.
struct ExclusionCounts {
    std::map<std::string, int64_t> by_category;  // category name -> count
};

// Maps raw demographic strings onto identities, one per category at most.
// Raw ages are accepted as numbers ("23") or bin strings ("22-25");
// gender and education go through a small alias table.
std::vector<Identity> bin_annotator(
    const std::vector<std::pair<std::string, std::string>>& demographics,
    ExclusionCounts* exclusions = nullptr);

// Group-level ground truth for one (image, group, task). Numeric tasks:
// mean score then discretize; Empathy: majority vote, ties broken by
// canonical label order with ambiguous=true.
GroupPreferenceLabel group_label(const std::string& image_id,
                                 const Identity& group, Task task,
                                 const std::vector<AnnotationRecord>& annotations,
                                 const ScoreScale& scale);

// All (image, group, task) labels derivable from an annotation table.
// Groups with no annotators for a cell are simply absent.
std::vector<GroupPreferenceLabel> build_group_labels(
    const std::vector<AnnotationRecord>& annotations, const ScoreScale& scale,
    ExclusionCounts* exclusions = nullptr);

// Annotation ingestion. CSV columns: image_id, annotator_id, age, gender,
// education, perception_score, assessment_score, emotion (header row
// required, any order). JSONL uses the same field names.
std::vector<AnnotationRecord> read_annotations_csv(const std::string& path);
std::vector<AnnotationRecord> read_annotations_jsonl(const std::string& path);
std::vector<AnnotationRecord> read_annotations(const std::string& path);

}  // namespace aesaudit
