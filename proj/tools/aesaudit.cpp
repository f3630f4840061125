// aesaudit: batch audit CLI for stereotype-bias and human-alignment
// measurement of multimodal model outputs on aesthetic assessment tasks.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aesaudit/core.hpp"
#include "aesaudit/ground_truth.hpp"
#include "aesaudit/harness.hpp"
#include "aesaudit/metrics.hpp"
#include "aesaudit/prompts.hpp"
#include "aesaudit/report.hpp"
#include "aesaudit/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aesaudit;

namespace {

PromptLibrary load_prompts(const std::string& template_dir) {
    return template_dir.empty() ? PromptLibrary::builtin()
                                : PromptLibrary::load(template_dir);
}

std::map<std::string, ImageType> load_image_types(const std::string& path) {
    std::map<std::string, ImageType> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ImageRecord img = json::parse(line).get<ImageRecord>();
        out[img.image_id] = img.image_type;
    }
    return out;
}

ScoreScale parse_scale(const std::string& s) {
    size_t comma = s.find(',');
    if (comma == std::string::npos)
        throw DataError("--scale expects 'r,R', got '" + s + "'");
    return ScoreScale(std::stod(s.substr(0, comma)),
                      std::stod(s.substr(comma + 1)));
}

int cmd_evaluate(const std::string& manifest_path) {
    RunManifest manifest = load_manifest(manifest_path);
    PromptLibrary prompts = load_prompts(manifest.template_dir);
    RunStats stats;
    std::vector<ResponseRecord> records =
        run_evaluation(manifest, prompts, &stats);
    std::printf("run %s: %zu records (ok %lld, fuzzy %lld, unparseable %lld, "
                "cache hits %lld, dispatched %lld, failed %lld)\n",
                manifest.run_id.c_str(), records.size(),
                static_cast<long long>(stats.ok),
                static_cast<long long>(stats.fuzzy),
                static_cast<long long>(stats.unparseable),
                static_cast<long long>(stats.cache_hits),
                static_cast<long long>(stats.dispatched),
                static_cast<long long>(stats.failed));
    if (stats.failed > 0) {
        std::fprintf(stderr,
                     "{\"error\":\"incomplete_run\",\"failed_jobs\":%lld}\n",
                     static_cast<long long>(stats.failed));
        return 1;
    }
    // completion marker gates downstream reporting on this run
    std::ofstream marker(manifest.cache_path + ".complete");
    marker << json{{"run_id", manifest.run_id},
                   {"records", records.size()}}
                  .dump()
           << "\n";
    return 0;
}

int cmd_ingest(const std::string& annotations_path, const std::string& scale,
               const std::string& out_path) {
    std::vector<AnnotationRecord> annotations =
        read_annotations(annotations_path);
    ExclusionCounts exclusions;
    std::vector<GroupPreferenceLabel> labels =
        build_group_labels(annotations, parse_scale(scale), &exclusions);
    write_ground_truth_jsonl(out_path, labels);
    std::printf("wrote %zu group labels to %s\n", labels.size(),
                out_path.c_str());
    for (const auto& [cat, n] : exclusions.by_category)
        std::printf("  excluded %lld annotator values in category %s\n",
                    static_cast<long long>(n), cat.c_str());
    return 0;
}

int cmd_metrics(const std::string& responses_path, bool strict,
                const std::string& images_path, const std::string& out_dir) {
    std::vector<ResponseRecord> records = read_response_jsonl(responses_path);
    std::map<std::string, ImageType> types = load_image_types(images_path);
    AdmissionPolicy policy =
        strict ? AdmissionPolicy::StrictOnly : AdmissionPolicy::IncludeFuzzy;
    std::string model_id = records.empty() ? "unknown" : records[0].model_id;

    for (Task t : kAllTasks) {
        bool has = false;
        for (const auto& r : records)
            if (r.task == t && r.identity) {
                has = true;
                break;
            }
        if (!has) continue;
        MetricReport report =
            compute_metric_report(records, types, t, policy, model_id);
        std::printf("%s IFD %s\n", to_string(t).c_str(),
                    format_double(report.ifd_value).c_str());
        for (const auto& [cat, v] : report.nrd_value)
            std::printf("%s NRD[%s] %s\n", to_string(t).c_str(),
                        to_string(cat).c_str(), format_double(v).c_str());
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            std::ofstream out(fs::path(out_dir) /
                              ("metrics_" + to_string(t) + ".json"));
            out << json(report).dump(2) << "\n";
        }
    }
    return 0;
}

int cmd_align(const std::string& responses_path,
              const std::string& ground_truth_path, const std::string& mode,
              bool strict, const std::string& out_dir) {
    if (mode != "default" && mode != "identity")
        throw DataError("--mode must be 'default' or 'identity'");
    AlignmentMode amode = mode == "identity" ? AlignmentMode::IdentityAlignment
                                             : AlignmentMode::DefaultAlignment;
    std::vector<ResponseRecord> records = read_response_jsonl(responses_path);
    std::vector<GroupPreferenceLabel> human =
        read_ground_truth_jsonl(ground_truth_path);

    for (Task t : kAllTasks) {
        // admitted model labels under the requested perspective
        std::map<std::string, OutputLabel> defaults;
        std::map<Identity, std::map<std::string, OutputLabel>> per_identity;
        for (const auto& r : records) {
            if (r.task != t || !r.parsed_label) continue;
            if (strict && r.parse_status != ParseStatus::Ok) continue;
            if (r.identity)
                per_identity[*r.identity][r.image_id] = *r.parsed_label;
            else
                defaults[r.image_id] = *r.parsed_label;
        }
        ModelLabels labels = amode == AlignmentMode::DefaultAlignment
                                 ? ModelLabels::defaults(defaults)
                                 : ModelLabels::per_identity(per_identity);
        if (amode == AlignmentMode::DefaultAlignment && defaults.empty())
            continue;
        if (amode == AlignmentMode::IdentityAlignment && per_identity.empty())
            continue;

        for (IdentityCategory cat : kAllCategories) {
            SimilarityTable table;
            try {
                table = similarity_table(labels, human, t, cat);
            } catch (const NoOverlap&) {
                continue;  // ground truth does not cover this slice
            } catch (const MissingIdentity&) {
                continue;
            }
            for (const auto& [g, s] : table.S)
                std::printf("%s %s S=%s AAS=%s (n=%d)\n", to_string(t).c_str(),
                            g.key().c_str(), format_double(s).c_str(),
                            format_double(table.AAS.at(g)).c_str(),
                            table.n_images.at(g));
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream out(fs::path(out_dir) /
                                  ("similarity_" + to_string(t) + "_" +
                                   to_string(cat) + "_" + mode + ".json"));
                out << json(table).dump(2) << "\n";
            }
        }
    }
    return 0;
}

int cmd_simulate(const std::string& spec_path, int n_images,
                 const std::string& out_dir, uint64_t seed_override,
                 bool has_seed) {
    std::ifstream in(spec_path);
    if (!in) throw FileNotFound("cannot open " + spec_path);
    json j;
    in >> j;
    BiasSpec spec = j.get<BiasSpec>();
    if (has_seed) spec.seed = seed_override;
    std::map<ImageType, double> type_dist;
    if (j.contains("type_distribution"))
        for (const auto& [key, val] : j["type_distribution"].items()) {
            auto m = image_type_from_string(key);
            if (!m) throw DataError("unknown image type '" + key + "'");
            type_dist[*m] = val.get<double>();
        }
    else
        type_dist[ImageType::Others] = 1.0;
    SyntheticCorpus corpus = generate_responses(spec, n_images, type_dist);
    fs::create_directories(out_dir);
    write_response_jsonl((fs::path(out_dir) / "responses.jsonl").string(),
                         corpus.records);
    std::ofstream images(fs::path(out_dir) / "images.jsonl");
    for (const auto& img : corpus.images) images << json(img).dump() << "\n";
    std::printf("wrote %zu records over %zu images to %s\n",
                corpus.records.size(), corpus.images.size(), out_dir.c_str());
    return 0;
}

int cmd_selftest(uint64_t seed) {
    // oracle equivalence on a quick randomized sweep plus the fixed
    // worked examples; the full sweep lives in the acceptance suite
    SplitMix64 root(seed);
    const std::map<ImageType, double> types = {{ImageType::Portrait, 0.5},
                                               {ImageType::Scene, 0.5}};
    for (int i = 0; i < 50; ++i) {
        for (Task task : kAllTasks) {
            BiasSpec spec;
            spec.task = task;
            spec.category = IdentityCategory::Gender;
            spec.epsilon = static_cast<double>(i % 5) * 0.1;
            spec.favored_label = label_set(task).front();
            spec.favored_identity = Identity{IdentityCategory::Gender, 0};
            spec.base_distribution.assign(
                label_set(task).size(), 1.0 / label_set(task).size());
            spec.seed = root.next();
            SyntheticCorpus corpus = generate_responses(spec, 10, types);
            auto lookup = corpus.image_type_lookup();
            CountTensor tensor = accumulate(corpus.records, lookup,
                                            AdmissionPolicy::IncludeFuzzy);
            double stream_ifd = ifd(proportions(tensor, task,
                                                EmptyIdentityPolicy::Lenient));
            double oracle_ifd = naive_ifd(corpus.records, task);
            if (std::abs(stream_ifd - oracle_ifd) > 1e-12)
                throw DataError("selftest: IFD mismatch");
            for (IdentityCategory cat : kAllCategories) {
                double stream_nrd = nrd(conditional_shares(tensor, task, cat));
                double oracle_nrd =
                    naive_nrd(corpus.records, lookup, task, cat);
                if (std::abs(stream_nrd - oracle_nrd) > 1e-12)
                    throw DataError("selftest: NRD mismatch");
            }
        }
    }
    // worked examples
    std::vector<double> p = {0.5, 0.5}, q = {1.0, 0.0};
    if (std::abs(js_divergence(p, q) - 0.31128) > 1e-5)
        throw DataError("selftest: JS fixture mismatch");
    if (discretize(2.0, ScoreScale(1, 5)) != OutputLabel::Negative ||
        discretize(4.0, ScoreScale(1, 5)) != OutputLabel::Positive ||
        discretize(50.0, ScoreScale(0, 100)) != OutputLabel::Normal)
        throw DataError("selftest: discretization fixture mismatch");
    std::printf("selftest ok\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stereotype-bias and alignment audit for aesthetic "
                 "assessment model outputs"};
    app.require_subcommand(1);

    std::string manifest_path;
    auto* evaluate = app.add_subcommand(
        "evaluate", "Run the prompt grid against a model endpoint");
    evaluate->add_option("manifest", manifest_path, "run manifest (JSON)")
        ->required();

    std::string annotations_path, scale = "1,5", gt_out = "ground_truth.jsonl";
    auto* ingest = app.add_subcommand(
        "ingest", "Derive per-group ground-truth labels from annotations");
    ingest->add_option("annotations", annotations_path, "CSV or JSONL file")
        ->required();
    ingest->add_option("--scale", scale, "score scale as r,R (default 1,5)");
    ingest->add_option("--out", gt_out, "output JSONL path");

    std::string responses_path, images_path, metrics_out;
    bool strict = false;
    auto* metrics_cmd =
        app.add_subcommand("metrics", "Compute IFD and NRD from responses");
    metrics_cmd->add_option("responses", responses_path, "responses.jsonl")
        ->required();
    metrics_cmd->add_flag("--strict", strict,
                          "admit only strict-format replies");
    metrics_cmd->add_option("--images", images_path,
                            "images.jsonl with image types");
    metrics_cmd->add_option("--out", metrics_out, "directory for report JSON");

    std::string align_responses, align_gt, align_mode = "default", align_out;
    bool align_strict = false;
    auto* align = app.add_subcommand(
        "align", "Score similarity against human group preferences");
    align->add_option("responses", align_responses, "responses.jsonl")
        ->required();
    align->add_option("ground_truth", align_gt, "ground_truth.jsonl")
        ->required();
    align->add_option("--mode", align_mode, "default or identity");
    align->add_flag("--strict", align_strict,
                    "admit only strict-format replies");
    align->add_option("--out", align_out, "directory for similarity JSON");

    std::string bundle_dir, report_out = "report";
    auto* report = app.add_subcommand(
        "report", "Render report tables and plot data from a bundle");
    report->add_option("bundle", bundle_dir, "bundle directory")->required();
    report->add_option("--out", report_out, "output directory");

    std::string spec_path, sim_out = "synthetic";
    int n_images = 100;
    uint64_t seed = 0;
    auto* simulate = app.add_subcommand(
        "simulate", "Generate a synthetic corpus with known bias");
    simulate->add_option("spec", spec_path, "bias spec (JSON)")->required();
    simulate->add_option("--n-images", n_images, "number of images");
    simulate->add_option("--out", sim_out, "output directory");
    auto* seed_opt = simulate->add_option("--seed", seed,
                                          "override the spec's seed");

    uint64_t selftest_seed = 20240801;
    auto* selftest =
        app.add_subcommand("selftest", "Run the oracle equivalence checks");
    selftest->add_option("--seed", selftest_seed, "randomization seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (evaluate->parsed()) return cmd_evaluate(manifest_path);
        if (ingest->parsed())
            return cmd_ingest(annotations_path, scale, gt_out);
        if (metrics_cmd->parsed())
            return cmd_metrics(responses_path, strict, images_path,
                               metrics_out);
        if (align->parsed())
            return cmd_align(align_responses, align_gt, align_mode,
                             align_strict, align_out);
        if (report->parsed()) {
            generate_reports(bundle_dir, report_out);
            std::printf("report written to %s\n", report_out.c_str());
            return 0;
        }
        if (simulate->parsed())
            return cmd_simulate(spec_path, n_images, sim_out, seed,
                                seed_opt->count() > 0);
        if (selftest->parsed()) return cmd_selftest(selftest_seed);
    } catch (const Error& e) {
        std::fprintf(stderr, "%s\n",
                     json{{"error", e.code()}, {"message", e.what()}}
                         .dump()
                         .c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n",
                     json{{"error", "internal"}, {"message", e.what()}}
                         .dump()
                         .c_str());
        return 1;
    }
    return 2;
}
