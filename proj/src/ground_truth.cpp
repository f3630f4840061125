#include "aesaudit/ground_truth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace aesaudit {

using nlohmann::json;

ScoreScale::ScoreScale(double lo, double hi) : r(lo), R(hi) {
    if (!(r < R)) throw DataError("score scale requires r < R");
}

OutputLabel discretize(double s, const ScoreScale& scale) {
    if (std::isnan(s) || s < scale.r || s > scale.R)
        throw ScoreOutOfRange("score " + std::to_string(s) +
                              " outside [" + std::to_string(scale.r) + ", " +
                              std::to_string(scale.R) + "]");
    double width = scale.R - scale.r;
    // strict-left / closed-right thirds; s = r closes into the first interval
    if (s <= scale.r + width / 3.0) return OutputLabel::Negative;
    if (s <= scale.r + 2.0 * width / 3.0) return OutputLabel::Normal;
    return OutputLabel::Positive;
}

void to_json(json& j, const GroupPreferenceLabel& v) {
    j = json{{"image_id", v.image_id},
             {"group", v.group},
             {"task", to_string(v.task)},
             {"label", to_string(v.label)},
             {"support", v.support},
             {"ambiguous", v.ambiguous}};
}

void from_json(const json& j, GroupPreferenceLabel& v) {
    v.image_id = j.at("image_id").get<std::string>();
    v.group = j.at("group").get<Identity>();
    v.task = task_from_string(j.at("task").get<std::string>()).value();
    auto l = label_from_string(j.at("label").get<std::string>());
    if (!l) throw DataError("unknown label in ground truth: " + j.dump());
    v.label = *l;
    v.support = j.value("support", 1);
    v.ambiguous = j.value("ambiguous", false);
}

std::vector<GroupPreferenceLabel> read_ground_truth_jsonl(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    std::vector<GroupPreferenceLabel> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(json::parse(line).get<GroupPreferenceLabel>());
    }
    return out;
}

void write_ground_truth_jsonl(const std::string& path,
                              const std::vector<GroupPreferenceLabel>& labels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& l : labels) out << json(l).dump() << "\n";
}

namespace {

// Alias table for raw demographic exports (versioned data; extend here
// when a dataset export uses new spellings).
const std::map<std::string, std::string> kGenderAliases = {
    {"m", "male"},   {"male", "male"},     {"man", "male"},
    {"f", "female"}, {"female", "female"}, {"woman", "female"},
};

const std::map<std::string, std::string> kEducationAliases = {
    {"junior high school", "junior high school"},
    {"junior high", "junior high school"},
    {"junior", "junior high school"},
    {"technical secondary school", "technical secondary school"},
    {"technical secondary", "technical secondary school"},
    {"tech", "technical secondary school"},
    {"senior high school", "senior high school"},
    {"senior high", "senior high school"},
    {"senior", "senior high school"},
    {"university", "university"},
    {"junior college", "junior college"},
    {"college", "junior college"},
};

std::optional<Identity> bin_age(const std::string& raw) {
    std::string v = lowercase(trim(raw));
    // bin string like "22-25" or "22_25"
    std::string norm = v;
    std::replace(norm.begin(), norm.end(), '_', '-');
    if (auto id = identity_from_strings("age", norm)) return id;
    // plain number
    try {
        size_t used = 0;
        int age = std::stoi(v, &used);
        if (used != v.size()) return std::nullopt;
        const auto& bins = category_bins(IdentityCategory::Age);
        for (int i = 0; i < static_cast<int>(bins.size()); ++i) {
            const std::string& b = bins[static_cast<size_t>(i)];
            size_t dash = b.find('-');
            int lo = std::stoi(b.substr(0, dash));
            int hi = std::stoi(b.substr(dash + 1));
            if (age >= lo && age <= hi) return Identity{IdentityCategory::Age, i};
        }
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

std::optional<Identity> bin_category(IdentityCategory cat,
                                     const std::string& raw) {
    if (cat == IdentityCategory::Age) return bin_age(raw);
    std::string v = lowercase(trim(raw));
    const auto& aliases = cat == IdentityCategory::Gender ? kGenderAliases
                                                          : kEducationAliases;
    auto it = aliases.find(v);
    if (it == aliases.end()) return std::nullopt;
    return identity_from_strings(to_string(cat), it->second);
}

}  // namespace

std::vector<Identity> bin_annotator(
    const std::vector<std::pair<std::string, std::string>>& demographics,
    ExclusionCounts* exclusions) {
    std::vector<Identity> out;
    for (const auto& [key, raw] : demographics) {
        auto cat = category_from_string(key);
        if (!cat) continue;
        if (trim(raw).empty()) continue;
        if (auto id = bin_category(*cat, raw)) {
            out.push_back(*id);
        } else if (exclusions) {
            ++exclusions->by_category[to_string(*cat)];
        }
    }
    return out;
}

GroupPreferenceLabel group_label(const std::string& image_id,
                                 const Identity& group, Task task,
                                 const std::vector<AnnotationRecord>& annotations,
                                 const ScoreScale& scale) {
    GroupPreferenceLabel out;
    out.image_id = image_id;
    out.group = group;
    out.task = task;

    std::vector<double> scores;
    std::map<OutputLabel, int> votes;
    for (const AnnotationRecord& a : annotations) {
        if (a.image_id != image_id) continue;
        auto ids = bin_annotator(a.demographics);
        if (std::find(ids.begin(), ids.end(), group) == ids.end()) continue;
        switch (task) {
            case Task::Perception:
                if (a.perception_score) scores.push_back(*a.perception_score);
                break;
            case Task::Assessment:
                if (a.assessment_score) scores.push_back(*a.assessment_score);
                break;
            case Task::Empathy:
                if (a.emotion) ++votes[*a.emotion];
                break;
        }
    }

    if (task == Task::Empathy) {
        if (votes.empty())
            throw NoAnnotatorsInGroup("no emotion annotations from '" +
                                      group.key() + "' for image '" + image_id +
                                      "'");
        int best = 0, total = 0;
        for (const auto& [label, n] : votes) {
            best = std::max(best, n);
            total += n;
        }
        // first label in canonical order among the top-voted wins
        int tied = 0;
        for (OutputLabel l : label_set(Task::Empathy)) {
            auto it = votes.find(l);
            if (it != votes.end() && it->second == best) {
                if (tied == 0) out.label = l;
                ++tied;
            }
        }
        out.ambiguous = tied > 1;
        out.support = total;
        return out;
    }

    if (scores.empty())
        throw NoAnnotatorsInGroup("no " + to_string(task) +
                                  " scores from '" + group.key() +
                                  "' for image '" + image_id + "'");
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    out.label = discretize(mean, scale);
    out.support = static_cast<int>(scores.size());
    return out;
}

std::vector<GroupPreferenceLabel> build_group_labels(
    const std::vector<AnnotationRecord>& annotations, const ScoreScale& scale,
    ExclusionCounts* exclusions) {
    // index annotations per image; note which groups have any annotator
    std::map<std::string, std::vector<AnnotationRecord>> by_image;
    for (const AnnotationRecord& a : annotations)
        by_image[a.image_id].push_back(a);

    std::vector<GroupPreferenceLabel> out;
    for (const auto& [image_id, anns] : by_image) {
        std::set<Identity> groups;
        for (const AnnotationRecord& a : anns)
            for (const Identity& g : bin_annotator(a.demographics, exclusions))
                groups.insert(g);
        for (const Identity& g : groups)
            for (Task t : kAllTasks) {
                try {
                    out.push_back(group_label(image_id, g, t, anns, scale));
                } catch (const NoAnnotatorsInGroup&) {
                    // group had no annotations carrying this task's field
                }
            }
    }
    return out;
}

// --- annotation ingestion ----------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    // plain comma split; the documented column values contain no commas
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::vector<AnnotationRecord> read_annotations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    std::string header;
    if (!std::getline(in, header))
        throw DataError(path + ": missing header row");
    std::vector<std::string> cols = split_csv_line(header);
    for (auto& c : cols) c = lowercase(c);
    auto col = [&](const std::string& name) -> int {
        auto it = std::find(cols.begin(), cols.end(), name);
        return it == cols.end() ? -1 : static_cast<int>(it - cols.begin());
    };
    int c_image = col("image_id"), c_annot = col("annotator_id");
    int c_age = col("age"), c_gender = col("gender"), c_edu = col("education");
    int c_perc = col("perception_score"), c_assess = col("assessment_score");
    int c_emo = col("emotion");
    if (c_image < 0) throw DataError(path + ": no image_id column");

    std::vector<AnnotationRecord> out;
    std::string line;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        auto field = [&](int idx) -> std::string {
            return idx >= 0 && idx < static_cast<int>(f.size())
                       ? f[static_cast<size_t>(idx)]
                       : "";
        };
        AnnotationRecord a;
        a.image_id = field(c_image);
        a.annotator_id = field(c_annot);
        for (auto [name, idx] : {std::pair<const char*, int>{"age", c_age},
                                 {"gender", c_gender},
                                 {"education", c_edu}})
            if (!field(idx).empty()) a.demographics.emplace_back(name, field(idx));
        try {
            if (!field(c_perc).empty())
                a.perception_score = std::stod(field(c_perc));
            if (!field(c_assess).empty())
                a.assessment_score = std::stod(field(c_assess));
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": bad numeric score");
        }
        if (!field(c_emo).empty()) {
            auto l = label_from_string(field(c_emo));
            if (!l || !label_in_task(Task::Empathy, *l))
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": bad emotion '" + field(c_emo) + "'");
            a.emotion = *l;
        }
        if (!a.perception_score && !a.assessment_score && !a.emotion)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": annotation carries no task field");
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<AnnotationRecord> read_annotations_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    std::vector<AnnotationRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line).get<AnnotationRecord>());
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " +
                            e.what());
        }
        const AnnotationRecord& a = out.back();
        if (!a.perception_score && !a.assessment_score && !a.emotion)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": annotation carries no task field");
    }
    return out;
}

std::vector<AnnotationRecord> read_annotations(const std::string& path) {
    if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl")
        return read_annotations_jsonl(path);
    return read_annotations_csv(path);
}

}  // namespace aesaudit
