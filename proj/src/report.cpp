#include "aesaudit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace aesaudit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr const char* kToolVersion = "aesaudit 0.1.0";
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

static std::string format4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

TopAlignedCount top_aligned_counts(
    const std::map<std::string, SimilarityTable>& tables, Task task,
    IdentityCategory category) {
    TopAlignedCount out;
    out.task = task;
    out.category = category;
    std::vector<Identity> ids = identities_in(category);
    for (const Identity& g : ids) out.winner_counts[g] = 0;

    for (const auto& [model, table] : tables) {
        if (table.task != task || table.category != category)
            throw IncompleteTable("table for '" + model +
                                  "' covers a different task or category");
        for (const Identity& g : ids)
            if (!table.AAS.count(g))
                throw IncompleteTable("table for '" + model +
                                      "' is missing identity " + g.key());
        // argmax in canonical identity order; ties flagged
        Identity winner = ids.front();
        double best = table.AAS.at(winner);
        bool tie = false;
        for (size_t i = 1; i < ids.size(); ++i) {
            double v = table.AAS.at(ids[i]);
            if (v > best) {
                best = v;
                winner = ids[i];
                tie = false;
            } else if (v == best) {
                tie = true;
            }
        }
        ++out.winner_counts[winner];
        if (tie) out.tied_models.push_back(model);
    }
    return out;
}

std::vector<GenderDeltaRow> gender_delta_table(
    const std::vector<std::pair<std::string, std::pair<double, double>>>&
        deltas) {
    std::vector<GenderDeltaRow> rows;
    for (const auto& [model, d] : deltas) {
        GenderDeltaRow row;
        row.model_id = model;
        row.delta_s_male = d.first;
        row.delta_s_female = d.second;
        row.delta = d.first - d.second;
        rows.push_back(row);
    }
    // top-3 / bottom-3 delta flags, matching the published table's shading
    std::vector<size_t> order(rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return rows[a].delta > rows[b].delta;
    });
    for (size_t i = 0; i < order.size() && i < 3; ++i)
        rows[order[i]].top3 = true;
    for (size_t i = 0; i < order.size() && i < 3; ++i)
        rows[order[order.size() - 1 - i]].bottom3 = true;
    return rows;
}

std::vector<GenderDeltaRow> gender_delta_table(
    const std::vector<std::string>& models,
    const std::map<std::string, SimilarityTable>& default_tables,
    const std::map<std::string, SimilarityTable>& identity_tables) {
    Identity male = *identity_from_strings("gender", "male");
    Identity female = *identity_from_strings("gender", "female");
    std::vector<std::pair<std::string, std::pair<double, double>>> deltas;
    for (const std::string& model : models) {
        auto dit = default_tables.find(model);
        auto iit = identity_tables.find(model);
        if (dit == default_tables.end() || iit == identity_tables.end())
            throw MissingMode("model '" + model +
                              "' lacks a table in one of the two modes");
        AlignmentDelta d =
            alignment_delta(dit->second, iit->second, male, female);
        deltas.emplace_back(model, std::make_pair(d.delta_g, d.delta_h));
    }
    return gender_delta_table(deltas);
}

json export_heatmap_data(
    const std::map<std::string, std::map<Task, MetricReport>>& reports) {
    json out;
    json models = json::array(), tasks = json::array();
    for (Task t : kAllTasks) tasks.push_back(to_string(t));
    json matrix = json::array();
    for (const auto& [model, by_task] : reports) {
        models.push_back(model);
        json row = json::array();
        for (Task t : kAllTasks) {
            auto it = by_task.find(t);
            row.push_back(it == by_task.end() ? json(nullptr)
                                              : json(it->second.ifd_value));
        }
        matrix.push_back(row);
    }
    out["models"] = models;
    out["tasks"] = tasks;
    out["ifd"] = matrix;
    return out;
}

json export_radar_data(const std::map<std::string, SimilarityTable>& tables) {
    json out = json::object();
    for (const auto& [key, table] : tables) {
        json entry;
        entry["task"] = to_string(table.task);
        entry["category"] = to_string(table.category);
        entry["mode"] = table.mode == AlignmentMode::DefaultAlignment
                            ? "default_alignment"
                            : "identity_alignment";
        json aas = json::object();
        for (const auto& [g, v] : table.AAS) aas[g.bin_name()] = v;
        entry["aas"] = aas;
        out[key] = entry;
    }
    return out;
}

// --- CSV ---------------------------------------------------------------------

std::string render_ifd_csv(
    const std::map<std::string, std::map<Task, MetricReport>>& reports) {
    std::string out = "model,task,ifd\n";
    for (const auto& [model, by_task] : reports)
        for (const auto& [task, report] : by_task)
            out += model + "," + to_string(task) + "," +
                   format_double(report.ifd_value) + "\n";
    return out;
}

std::string render_nrd_csv(
    const std::map<std::string, std::map<Task, MetricReport>>& reports) {
    std::string out = "model,task,category,nrd,empty_cells\n";
    for (const auto& [model, by_task] : reports)
        for (const auto& [task, report] : by_task)
            for (const auto& [cat, v] : report.nrd_value) {
                int empty = 0;
                auto it = report.nrd_empty_cells.find(cat);
                if (it != report.nrd_empty_cells.end()) empty = it->second;
                out += model + "," + to_string(task) + "," + to_string(cat) +
                       "," + format_double(v) + "," + std::to_string(empty) +
                       "\n";
            }
    return out;
}

std::string render_aas_csv(
    const std::map<std::string, SimilarityTable>& tables) {
    std::string out = "model,task,category,identity,s,aas,n_images\n";
    for (const auto& [model, table] : tables)
        for (const auto& [g, s] : table.S) {
            int n = 0;
            auto it = table.n_images.find(g);
            if (it != table.n_images.end()) n = it->second;
            out += model + "," + to_string(table.task) + "," +
                   to_string(table.category) + "," + g.bin_name() + "," +
                   format_double(s) + "," + format_double(table.AAS.at(g)) +
                   "," + std::to_string(n) + "\n";
        }
    return out;
}

std::string render_top_aligned_csv(const std::vector<TopAlignedCount>& counts) {
    std::string out = "task,category,identity,models\n";
    for (const TopAlignedCount& c : counts)
        for (const auto& [g, n] : c.winner_counts)
            out += to_string(c.task) + "," + to_string(c.category) + "," +
                   g.bin_name() + "," + std::to_string(n) + "\n";
    return out;
}

std::string render_gender_delta_csv(const std::vector<GenderDeltaRow>& rows) {
    std::string out = "model,delta_s_male,delta_s_female,delta,top3,bottom3\n";
    for (const GenderDeltaRow& r : rows)
        out += r.model_id + "," + format4(r.delta_s_male) + "," +
               format4(r.delta_s_female) + "," + format4(r.delta) + "," +
               (r.top3 ? "1" : "0") + "," + (r.bottom3 ? "1" : "0") + "\n";
    return out;
}

// --- bundle ------------------------------------------------------------------

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

}  // namespace

void generate_reports(const std::string& bundle_dir,
                      const std::string& out_dir) {
    fs::path bundle(bundle_dir);
    if (!fs::is_directory(bundle))
        throw FileNotFound(bundle_dir + " is not a directory");
    fs::create_directories(out_dir);

    std::map<std::string, std::map<Task, MetricReport>> metrics;
    // key "<model>|<task>|<category>" -> table, split by mode
    std::map<std::string, SimilarityTable> aas_default, aas_identity;
    std::vector<std::string> inputs;

    std::vector<fs::path> model_dirs;
    for (const auto& entry : fs::directory_iterator(bundle))
        if (entry.is_directory()) model_dirs.push_back(entry.path());
    std::sort(model_dirs.begin(), model_dirs.end());

    for (const fs::path& dir : model_dirs) {
        std::string model = dir.filename().string();
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(dir))
            if (f.path().extension() == ".json") files.push_back(f.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            std::string name = f.filename().string();
            inputs.push_back(model + "/" + name);
            if (name.rfind("metrics_", 0) == 0) {
                MetricReport r = read_json(f).get<MetricReport>();
                metrics[model][r.task] = std::move(r);
            } else if (name.rfind("similarity_", 0) == 0) {
                SimilarityTable t = read_json(f).get<SimilarityTable>();
                std::string key = model + "|" + to_string(t.task) + "|" +
                                  to_string(t.category);
                (t.mode == AlignmentMode::DefaultAlignment ? aas_default
                                                           : aas_identity)[key] =
                    std::move(t);
            }
        }
    }

    fs::path out(out_dir);
    write_file(out / "ifd.csv", render_ifd_csv(metrics));
    write_file(out / "nrd.csv", render_nrd_csv(metrics));
    write_file(out / "aas_default.csv", render_aas_csv(aas_default));
    write_file(out / "aas_identity.csv", render_aas_csv(aas_identity));
    write_file(out / "heatmap.json", export_heatmap_data(metrics).dump(2) + "\n");

    json radar;
    radar["default_alignment"] = export_radar_data(aas_default);
    radar["identity_alignment"] = export_radar_data(aas_identity);
    write_file(out / "radar.json", radar.dump(2) + "\n");

    // top-aligned counts per mode: group tables by (task, category)
    std::vector<TopAlignedCount> top_counts;
    for (const auto* mode_tables : {&aas_default, &aas_identity}) {
        std::map<std::pair<Task, IdentityCategory>,
                 std::map<std::string, SimilarityTable>>
            grouped;
        for (const auto& [key, table] : *mode_tables) {
            std::string model = key.substr(0, key.find('|'));
            grouped[{table.task, table.category}][model] = table;
        }
        for (const auto& [tc, tables] : grouped)
            top_counts.push_back(
                top_aligned_counts(tables, tc.first, tc.second));
    }
    write_file(out / "top_aligned.csv", render_top_aligned_csv(top_counts));

    // gender delta: explicit fixture input wins; otherwise derive from the
    // empathy gender tables when both modes are present
    fs::path delta_input = bundle / "gender_delta_input.csv";
    std::vector<GenderDeltaRow> delta_rows;
    if (fs::exists(delta_input)) {
        inputs.push_back("gender_delta_input.csv");
        std::ifstream in(delta_input);
        std::string line;
        std::getline(in, line);  // header
        std::vector<std::pair<std::string, std::pair<double, double>>> deltas;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            std::istringstream ss(line);
            std::string model, m, f;
            std::getline(ss, model, ',');
            std::getline(ss, m, ',');
            std::getline(ss, f, ',');
            deltas.emplace_back(trim(model),
                                std::make_pair(std::stod(m), std::stod(f)));
        }
        delta_rows = gender_delta_table(deltas);
    } else {
        std::map<std::string, SimilarityTable> d, i;
        std::vector<std::string> models;
        std::string suffix =
            "|" + to_string(Task::Empathy) + "|" + to_string(IdentityCategory::Gender);
        for (const auto& [key, table] : aas_default)
            if (key.size() > suffix.size() &&
                key.compare(key.size() - suffix.size(), suffix.size(),
                            suffix) == 0) {
                std::string model = key.substr(0, key.find('|'));
                d[model] = table;
                models.push_back(model);
            }
        for (const auto& [key, table] : aas_identity)
            if (key.size() > suffix.size() &&
                key.compare(key.size() - suffix.size(), suffix.size(),
                            suffix) == 0)
                i[key.substr(0, key.find('|'))] = table;
        std::vector<std::string> both;
        for (const std::string& m : models)
            if (i.count(m)) both.push_back(m);
        if (!both.empty()) delta_rows = gender_delta_table(both, d, i);
    }
    write_file(out / "gender_delta.csv", render_gender_delta_csv(delta_rows));

    json provenance;
    provenance["tool_version"] = kToolVersion;
    provenance["bundle_dir"] = bundle_dir;
    provenance["inputs"] = inputs;
    write_file(out / "provenance.json", provenance.dump(2) + "\n");
}

}  // namespace aesaudit
