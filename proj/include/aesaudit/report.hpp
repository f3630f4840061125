#pragma once

#include <map>
#include <string>
#include <vector>

#include "aesaudit/metrics.hpp"

namespace aesaudit {

struct TopAlignedCount {
    Task task = Task::Perception;
    IdentityCategory category = IdentityCategory::Gender;
    std::map<Identity, int> winner_counts;
    std::vector<std::string> tied_models;  // models whose argmax was a tie
};

// Per model, the identity with the highest AAS; ties go to the first
// identity in canonical order and are flagged.
TopAlignedCount top_aligned_counts(
    const std::map<std::string, SimilarityTable>& tables, Task task,
    IdentityCategory category);

struct GenderDeltaRow {
    std::string model_id;
    double delta_s_male = 0.0;
    double delta_s_female = 0.0;
    double delta = 0.0;  // delta_s_male - delta_s_female
    bool top3 = false;
    bool bottom3 = false;
};

// Rows from explicit delta columns (fixture input path).
std::vector<GenderDeltaRow> gender_delta_table(
    const std::vector<std::pair<std::string, std::pair<double, double>>>& deltas);

// Rows computed from per-model default/identity similarity tables.
std::vector<GenderDeltaRow> gender_delta_table(
    const std::vector<std::string>& models,
    const std::map<std::string, SimilarityTable>& default_tables,
    const std::map<std::string, SimilarityTable>& identity_tables);

// model x task IFD matrix with stable row and column order.
nlohmann::json export_heatmap_data(
    const std::map<std::string, std::map<Task, MetricReport>>& reports);

// Raw AAS values per model/category/identity for radar-style plots.
nlohmann::json export_radar_data(
    const std::map<std::string, SimilarityTable>& tables);

// CSV renderers (deterministic: fixed column order, fixed precision).
std::string render_ifd_csv(
    const std::map<std::string, std::map<Task, MetricReport>>& reports);
std::string render_nrd_csv(
    const std::map<std::string, std::map<Task, MetricReport>>& reports);
std::string render_aas_csv(const std::map<std::string, SimilarityTable>& tables);
std::string render_top_aligned_csv(const std::vector<TopAlignedCount>& counts);
std::string render_gender_delta_csv(const std::vector<GenderDeltaRow>& rows);

// Reads a bundle directory (see README for the layout) and writes the
// report files into out_dir: ifd.csv, nrd.csv, aas_<mode>.csv,
// top_aligned.csv, gender_delta.csv, heatmap.json, radar.json,
// provenance.json.
void generate_reports(const std::string& bundle_dir,
                      const std::string& out_dir);

std::string format_double(double v);

}  // namespace aesaudit
