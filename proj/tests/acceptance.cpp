// Acceptance suite: one pass/fail line per criterion, exit 0 only if all
// criteria hold. Criterion 8 drives the installed CLI binary end to end
// against a loopback mock endpoint.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aesaudit/ground_truth.hpp"
#include "aesaudit/harness.hpp"
#include "aesaudit/metrics.hpp"
#include "aesaudit/report.hpp"
#include "aesaudit/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aesaudit;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok,
            const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

// ---------------------------------------------------------------------------
// 1. streaming vs naive oracle equivalence on randomized corpora
// ---------------------------------------------------------------------------

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(20250801);
    const std::map<ImageType, double> types = {{ImageType::Portrait, 0.4},
                                               {ImageType::Scene, 0.3},
                                               {ImageType::Animal, 0.3}};
    double worst = 0.0;
    int corpora = 0;
    for (int i = 0; i < 1000; ++i) {
        Task task = kAllTasks[i % 3];
        const auto& labels = label_set(task);

        BiasSpec spec;
        spec.task = task;
        spec.category = kAllCategories[static_cast<int>(rng.next() % 3)];
        auto members = identities_in(spec.category);
        spec.favored_identity = members[rng.next() % members.size()];
        spec.favored_label = labels[rng.next() % labels.size()];
        spec.base_distribution.resize(labels.size());
        double total = 0;
        for (double& p : spec.base_distribution) {
            p = rng.uniform() + 0.05;
            total += p;
        }
        for (double& p : spec.base_distribution) p /= total;
        double p_f =
            spec.base_distribution[label_index(task, spec.favored_label)];
        spec.epsilon = rng.uniform() * (1.0 - p_f) * 0.9;
        spec.seed = rng.next();

        int n_images = 1 + static_cast<int>(rng.next() % 10);
        SyntheticCorpus corpus = generate_responses(spec, n_images, types);
        auto lookup = corpus.image_type_lookup();
        CountTensor tensor =
            accumulate(corpus.records, lookup, AdmissionPolicy::StrictOnly);

        double stream =
            ifd(proportions(tensor, task, EmptyIdentityPolicy::Lenient));
        worst = std::max(worst,
                         std::abs(stream - naive_ifd(corpus.records, task)));
        for (IdentityCategory cat : kAllCategories) {
            double fast = nrd(conditional_shares(tensor, task, cat));
            double slow = naive_nrd(corpus.records, lookup, task, cat);
            worst = std::max(worst, std::abs(fast - slow));
        }
        ++corpora;
    }
    double elapsed = seconds_since(t0);
    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "%d corpora, max |delta| %.2e, %.1fs", corpora, worst,
                  elapsed);
    report(1, "oracle equivalence of streaming and naive metrics",
           corpora == 1000 && worst <= 1e-12 && elapsed < 60.0, detail);
}

// ---------------------------------------------------------------------------
// 2. parity nulls: no bias in, no disparity out
// ---------------------------------------------------------------------------

void criterion_2() {
    // analytic tensor: identical integer counts for every identity
    CountTensor tensor;
    for (const Identity& g : identity_grid())
        for (OutputLabel k : label_set(Task::Perception))
            for (ImageType m : {ImageType::Portrait, ImageType::Scene})
                tensor.add(Task::Perception, g, k, m, 7);
    double exact_ifd = ifd(
        proportions(tensor, Task::Perception, EmptyIdentityPolicy::Strict));
    double exact_nrd = 0.0;
    for (IdentityCategory cat : kAllCategories)
        exact_nrd = std::max(
            exact_nrd,
            nrd(conditional_shares(tensor, Task::Perception, cat)));

    // sampled parity at n = 10000
    BiasSpec spec;
    spec.epsilon = 0.0;
    spec.base_distribution = {0.5, 0.3, 0.2};
    spec.seed = 424242;
    SyntheticCorpus corpus =
        generate_responses(spec, 10000, {{ImageType::Scene, 1.0}});
    CountTensor sampled = accumulate(corpus.records,
                                     corpus.image_type_lookup(),
                                     AdmissionPolicy::StrictOnly);
    double sampled_ifd = ifd(
        proportions(sampled, Task::Perception, EmptyIdentityPolicy::Strict));

    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "analytic IFD %.2e NRD %.2e, sampled IFD %.4f", exact_ifd,
                  exact_nrd, sampled_ifd);
    report(2, "parity null (analytic exact, sampled bounded)",
           exact_ifd == 0.0 && exact_nrd == 0.0 && sampled_ifd < 0.02,
           detail);
}

// ---------------------------------------------------------------------------
// 3. calibration monotonicity over the epsilon grid
// ---------------------------------------------------------------------------

void criterion_3() {
    std::vector<BiasSpec> specs;
    for (double eps : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) {
        BiasSpec s;
        s.task = Task::Perception;
        s.category = IdentityCategory::Gender;
        s.epsilon = eps;
        s.favored_label = OutputLabel::Positive;
        s.favored_identity = *identity_from_strings("gender", "male");
        s.base_distribution = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        s.seed = 13131313;
        specs.push_back(s);
    }
    auto curve =
        calibration_curve(specs, 10000, {{ImageType::Portrait, 1.0}});
    bool ifd_increasing = true, nrd_nondecreasing = true;
    for (size_t i = 1; i < curve.size(); ++i) {
        if (!(curve[i].ifd_value > curve[i - 1].ifd_value))
            ifd_increasing = false;
        if (curve[i].nrd_value < curve[i - 1].nrd_value)
            nrd_nondecreasing = false;
    }
    std::string detail = "IFD";
    for (const auto& p : curve) {
        char buf[16];
        std::snprintf(buf, sizeof buf, " %.4f", p.ifd_value);
        detail += buf;
    }
    report(3, "epsilon calibration is monotone",
           curve.size() == 6 && ifd_increasing && nrd_nondecreasing, detail);
}

// ---------------------------------------------------------------------------
// 4. worked hand examples
// ---------------------------------------------------------------------------

void criterion_4() {
    Identity male = *identity_from_strings("gender", "male");
    Identity female = *identity_from_strings("gender", "female");

    ProportionTable table;
    table.task = Task::Perception;
    table.p_identity[male] = {0.75, 0.25};
    table.p_identity[female] = {0.25, 0.75};
    table.p_category[IdentityCategory::Gender] = {0.5, 0.5};
    table.present[IdentityCategory::Gender] = {male, female};
    double ifd_value = ifd(table);

    ConditionalShareTensor shares;
    shares.task = Task::Perception;
    shares.category = IdentityCategory::Gender;
    shares.identities = {male, female};
    shares.q = {{{0.75}}, {{0.25}}};
    shares.cell_status = {{CellStatus::Valid}};
    double nrd_value = nrd(shares);

    double js = js_divergence({0.5, 0.5}, {1.0, 0.0});

    char detail[128];
    std::snprintf(detail, sizeof detail, "IFD %.4f NRD %.4f JS %.5f",
                  ifd_value, nrd_value, js);
    report(4, "worked fixtures (IFD 0.5, NRD 0.25, JS 0.31128)",
           ifd_value == 0.5 && nrd_value == 0.25 &&
               std::abs(js - 0.31128) <= 1e-5,
           detail);
}

// ---------------------------------------------------------------------------
// 5. published gender-sensitivity table reproduction
// ---------------------------------------------------------------------------

void criterion_5() {
    const std::vector<std::pair<std::string, std::pair<double, double>>>
        inputs = {
            {"GPT-4o", {0.0395, -0.0748}},
            {"Claude-3.5-Sonnet", {0.1180, -0.1166}},
            {"Gemini-2.0-Flash", {0.0274, -0.3780}},
            {"DeepSeek-VL2", {-0.0535, -0.0749}},
            {"Llama-3.2-11B-Vision", {0.0074, -0.0021}},
            {"Phi-3.5-Vision", {-0.0113, -0.0293}},
            {"GLM-4V-9B", {-0.0743, -0.1015}},
            {"mPLUG_Owl3", {-0.0047, -0.0226}},
            {"Qwen2.5-VL-3B", {0.0330, 0.0196}},
            {"Qwen2.5-VL-7B", {0.0287, 0.0198}},
            {"InternVL2.5-1B", {0.0220, -0.0244}},
            {"InternVL2.5-2B", {0.0187, -0.1971}},
            {"InternVL2.5-4B", {0.0085, -0.0022}},
            {"InternVL2.5-8B", {-0.0007, -0.0126}},
            {"InternVL2.5-26B", {-0.0160, -0.0324}},
        };
    const std::vector<double> expected = {
        0.1143, 0.2346, 0.4054, 0.0214, 0.0095, 0.0180, 0.0272, 0.0179,
        0.0134, 0.0089, 0.0464, 0.2158, 0.0107, 0.0119, 0.0164};

    auto rows = gender_delta_table(inputs);
    int matched = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        char got[16], want[16];
        std::snprintf(got, sizeof got, "%.4f", rows[i].delta);
        std::snprintf(want, sizeof want, "%.4f", expected[i]);
        if (std::string(got) == want) ++matched;
    }
    char detail[64];
    std::snprintf(detail, sizeof detail, "%d/15 rows match at 4 decimals",
                  matched);
    report(5, "published delta column reproduction",
           rows.size() == 15 && matched == 15, detail);
}

// ---------------------------------------------------------------------------
// 6. AAS zero-sum and one-hot reduction
// ---------------------------------------------------------------------------

void criterion_6() {
    SplitMix64 rng(606060);
    bool zero_sum = true;
    for (Task task : kAllTasks)
        for (IdentityCategory cat : kAllCategories)
            for (int mode = 0; mode < 2; ++mode)
                for (int trial = 0; trial < 10; ++trial) {
                    const auto& labels = label_set(task);
                    auto members = identities_in(cat);
                    std::map<std::string, OutputLabel> defaults;
                    std::map<Identity, std::map<std::string, OutputLabel>>
                        per_identity;
                    std::vector<GroupPreferenceLabel> human;
                    for (int i = 0; i < 15; ++i) {
                        std::string img = "img" + std::to_string(i);
                        defaults[img] = labels[rng.next() % labels.size()];
                        for (const Identity& g : members) {
                            per_identity[g][img] =
                                labels[rng.next() % labels.size()];
                            GroupPreferenceLabel l;
                            l.image_id = img;
                            l.group = g;
                            l.task = task;
                            l.label = labels[rng.next() % labels.size()];
                            human.push_back(l);
                        }
                    }
                    ModelLabels model =
                        mode == 0 ? ModelLabels::defaults(defaults)
                                  : ModelLabels::per_identity(per_identity);
                    SimilarityTable t =
                        similarity_table(model, human, task, cat);
                    double sum = 0;
                    for (const auto& [g, a] : t.AAS) sum += a;
                    if (std::abs(sum) > 1e-9) zero_sum = false;
                }

    bool reduction = true;
    for (int i = 0; i < 10000; ++i) {
        Task task = kAllTasks[rng.next() % 3];
        const auto& labels = label_set(task);
        OutputLabel a = labels[rng.next() % labels.size()];
        OutputLabel b = labels[rng.next() % labels.size()];
        double sim = 1.0 - js_divergence(one_hot(task, a), one_hot(task, b));
        if (sim != (a == b ? 1.0 : 0.0)) reduction = false;
    }
    report(6, "AAS zero-sum and exact one-hot reduction",
           zero_sum && reduction);
}

// ---------------------------------------------------------------------------
// 7. score discretization mapping
// ---------------------------------------------------------------------------

void criterion_7() {
    SplitMix64 rng(707070);
    bool ok = true;
    for (ScoreScale scale : {ScoreScale(1, 5), ScoreScale(0, 100)}) {
        double width = scale.R - scale.r;
        for (int i = 0; i < 100000; ++i) {
            double s = scale.r + width * rng.uniform();
            OutputLabel expected =
                s <= scale.r + width / 3.0
                    ? OutputLabel::Negative
                    : (s <= scale.r + 2.0 * width / 3.0 ? OutputLabel::Normal
                                                        : OutputLabel::Positive);
            if (discretize(s, scale) != expected) ok = false;
        }
        // boundary quadruple
        if (discretize(scale.r, scale) != OutputLabel::Negative) ok = false;
        if (discretize(scale.r + width / 3.0, scale) != OutputLabel::Negative)
            ok = false;
        if (discretize(scale.r + 2.0 * width / 3.0, scale) !=
            OutputLabel::Normal)
            ok = false;
        if (discretize(scale.R, scale) != OutputLabel::Positive) ok = false;
    }
    report(7, "score discretization matches the interval definition", ok);
}

// ---------------------------------------------------------------------------
// 8. end-to-end dry run through the CLI against a loopback endpoint
// ---------------------------------------------------------------------------

class MockServer {
public:
    MockServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
            ++hits_;
            std::string text = json::parse(req.body)["messages"][0]["content"]
                                   [0]["text"]
                                       .get<std::string>();
            bool male = text.find("male viewer") != std::string::npos &&
                        text.find("female viewer") == std::string::npos;
            bool female = text.find("female viewer") != std::string::npos;
            std::string content;
            if (text.find("empathy:") != std::string::npos)
                content = male ? "empathy: awe"
                               : (female ? "empathy: fear"
                                         : "empathy: neutral");
            else if (text.find("aesthetic:") != std::string::npos)
                content = male ? "aesthetic: positive"
                               : (female ? "aesthetic: negative"
                                         : "aesthetic: normal");
            else
                content = male ? "perception: positive"
                               : (female ? "perception: negative"
                                         : "perception: normal");
            json reply = {
                {"choices",
                 json::array({{{"message", {{"role", "assistant"},
                                            {"content", content}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }
    int port() const { return port_; }
    int hits() const { return hits_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
};

int run_cli(const std::string& args, const fs::path& log) {
    std::string cmd = std::string("\"") + AESAUDIT_CLI_PATH + "\" " + args +
                      " >> \"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

void criterion_8() {
    auto t0 = std::chrono::steady_clock::now();
    fs::path work = fs::temp_directory_path() / "aesaudit_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    fs::path log = work / "cli.log";

    const char* type_names[5] = {"portrait", "animal", "scene", "building",
                                 "indoor"};
    std::string png = std::string("\x89PNG\r\n\x1a\n", 8) + "pixels";
    json images = json::array();
    {
        std::ofstream images_jsonl(work / "images.jsonl");
        for (int i = 0; i < 5; ++i) {
            std::string id = "img" + std::to_string(i);
            fs::path file = work / (id + ".png");
            std::ofstream(file, std::ios::binary) << png;
            json img = {{"image_id", id},
                        {"path_or_uri", file.string()},
                        {"image_type", type_names[i]},
                        {"dataset", "custom"}};
            images.push_back(img);
            images_jsonl << img.dump() << "\n";
        }
    }

    MockServer server;
    fs::path cache = work / "responses.jsonl";
    json manifest = {
        {"run_id", "acceptance"},
        {"scale", {{"r", 1.0}, {"R", 5.0}}},
        {"images", images},
        {"tasks", {"perception", "assessment", "empathy"}},
        {"identity_mode", "both"},
        {"endpoint",
         {{"model_id", "mock-model"},
          {"base_url", "http://127.0.0.1:" + std::to_string(server.port()) +
                           "/v1"},
          {"max_parallel", 4},
          {"timeout_seconds", 10},
          {"max_retries", 1}}},
        {"cache_path", cache.string()}};
    std::ofstream(work / "manifest.json") << manifest.dump(2);

    bool ok = true;
    std::string why;
    auto fail = [&](const std::string& reason) {
        if (ok) why = reason;
        ok = false;
    };

    if (run_cli("evaluate \"" + (work / "manifest.json").string() + "\"",
                log) != 0)
        fail("evaluate failed");
    if (server.hits() != 195) fail("expected 195 dispatches");
    if (!fs::exists(cache.string() + ".complete"))
        fail("missing completion marker");

    // grid completeness and parse quality
    std::vector<ResponseRecord> records;
    if (ok) {
        records = read_response_jsonl(cache.string());
        if (records.size() != 195) fail("cache holds != 195 records");
        std::set<std::string> cells;
        for (const auto& r : records) {
            if (r.parse_status != ParseStatus::Ok)
                fail("unparseable or fuzzy reply in strict-format run");
            cells.insert(r.image_id + "|" + to_string(r.task) + "|" +
                         (r.identity ? r.identity->key() : "default"));
        }
        if (cells.size() != 195) fail("grid cells are not unique");
    }

    // resume: a rerun must be served entirely from the cache
    if (ok) {
        if (run_cli("evaluate \"" + (work / "manifest.json").string() + "\"",
                    log) != 0)
            fail("resumed evaluate failed");
        if (server.hits() != 195) fail("resume re-dispatched to the endpoint");
    }

    // ground truth from a small annotation table
    {
        std::ofstream csv(work / "annotations.csv");
        csv << "image_id,annotator_id,age,gender,education,perception_score,"
               "assessment_score,emotion\n";
        for (int i = 0; i < 5; ++i) {
            std::string id = "img" + std::to_string(i);
            csv << id << ",m1,23,male,university,5,5,awe\n";
            csv << id << ",m2,27,male,junior college,4.5,4.5,awe\n";
            csv << id << ",f1,33,female,senior high school,1,1,fear\n";
            csv << id << ",f2,19,female,university,1.5,1.5,fear\n";
        }
    }
    fs::path gt = work / "ground_truth.jsonl";
    if (ok && run_cli("ingest \"" + (work / "annotations.csv").string() +
                          "\" --scale 1,5 --out \"" + gt.string() + "\"",
                      log) != 0)
        fail("ingest failed");

    // metrics and alignment into a single-model bundle
    fs::path bundle = work / "bundle";
    fs::path model_dir = bundle / "mock-model";
    if (ok && run_cli("metrics \"" + cache.string() + "\" --strict --images \"" +
                          (work / "images.jsonl").string() + "\" --out \"" +
                          model_dir.string() + "\"",
                      log) != 0)
        fail("metrics failed");
    if (ok && run_cli("align \"" + cache.string() + "\" \"" + gt.string() +
                          "\" --mode default --strict --out \"" +
                          model_dir.string() + "\"",
                      log) != 0)
        fail("align (default) failed");
    if (ok && run_cli("align \"" + cache.string() + "\" \"" + gt.string() +
                          "\" --mode identity --strict --out \"" +
                          model_dir.string() + "\"",
                      log) != 0)
        fail("align (identity) failed");

    fs::path out = work / "report";
    if (ok && run_cli("report \"" + bundle.string() + "\" --out \"" +
                          out.string() + "\"",
                      log) != 0)
        fail("report failed");

    if (ok) {
        for (const char* name :
             {"ifd.csv", "nrd.csv", "aas_default.csv", "aas_identity.csv",
              "top_aligned.csv", "gender_delta.csv", "heatmap.json",
              "radar.json", "provenance.json"}) {
            fs::path file = out / name;
            if (!fs::exists(file) || fs::file_size(file) == 0)
                fail(std::string("report file missing or empty: ") + name);
        }
        // the bundle must have produced per-task metrics for all three tasks
        for (Task t : kAllTasks)
            if (!fs::exists(model_dir / ("metrics_" + to_string(t) + ".json")))
                fail("missing metrics for task " + to_string(t));
        // gender alignment must exist in both modes (drives gender_delta.csv)
        if (!fs::exists(model_dir / "similarity_empathy_gender_default.json") ||
            !fs::exists(model_dir / "similarity_empathy_gender_identity.json"))
            fail("missing empathy gender similarity tables");
    }

    double elapsed = seconds_since(t0);
    if (elapsed >= 120.0) fail("runtime exceeded two minutes");
    char detail[160];
    std::snprintf(detail, sizeof detail, "%s%s%.1fs, %d endpoint calls",
                  why.c_str(), why.empty() ? "" : "; ", elapsed,
                  server.hits());
    report(8, "end-to-end dry run over the loopback endpoint", ok, detail);
    if (ok) fs::remove_all(work);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria failed\n", g_failures);
    return 1;
}
