#include "aesaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace aesaudit {

using nlohmann::json;

namespace {

constexpr double kNormTol = 1e-9;

int task_index(Task t) { return static_cast<int>(t); }

int max_labels(Task t) { return static_cast<int>(label_set(t).size()); }

}  // namespace

// --- CountTensor -----------------------------------------------------------

CountTensor::CountTensor() {
    for (Task t : kAllTasks) {
        size_t n = identity_grid().size() * static_cast<size_t>(max_labels(t)) *
                   kNumImageTypes;
        cells_[task_index(t)].assign(n, 0);
    }
}

int CountTensor::identity_index(const Identity& g) const {
    const auto& grid = identity_grid();
    auto it = std::find(grid.begin(), grid.end(), g);
    return static_cast<int>(it - grid.begin());
}

void CountTensor::add(Task task, const Identity& g, OutputLabel k, ImageType m,
                      int64_t n) {
    int gi = identity_index(g);
    int ki = label_index(task, k);
    int mi = static_cast<int>(m);
    int nO = max_labels(task);
    cells_[task_index(task)][static_cast<size_t>(
        (gi * nO + ki) * kNumImageTypes + mi)] += n;
}

int64_t CountTensor::at(Task task, const Identity& g, OutputLabel k,
                        ImageType m) const {
    int gi = identity_index(g);
    int ki = label_index(task, k);
    int mi = static_cast<int>(m);
    int nO = max_labels(task);
    return cells_[task_index(task)][static_cast<size_t>(
        (gi * nO + ki) * kNumImageTypes + mi)];
}

int64_t CountTensor::count(Task task, const Identity& g, OutputLabel k) const {
    int64_t total = 0;
    for (int m = 0; m < kNumImageTypes; ++m)
        total += at(task, g, k, static_cast<ImageType>(m));
    return total;
}

int64_t CountTensor::identity_total(Task task, const Identity& g) const {
    int64_t total = 0;
    for (OutputLabel k : label_set(task)) total += count(task, g, k);
    return total;
}

void CountTensor::merge(const CountTensor& other) {
    for (int t = 0; t < 3; ++t)
        for (size_t i = 0; i < cells_[t].size(); ++i)
            cells_[t][i] += other.cells_[t][i];
}

CountTensor accumulate(const std::vector<ResponseRecord>& records,
                       const std::map<std::string, ImageType>& image_types,
                       AdmissionPolicy policy, AdmissionStats* stats) {
    CountTensor tensor;
    AdmissionStats local;
    for (const ResponseRecord& r : records) {
        switch (r.parse_status) {
            case ParseStatus::Ok: ++local.ok; break;
            case ParseStatus::Fuzzy: ++local.fuzzy; break;
            case ParseStatus::Unparseable: ++local.unparseable; break;
        }
        bool admitted = r.parse_status == ParseStatus::Ok ||
                        (policy == AdmissionPolicy::IncludeFuzzy &&
                         r.parse_status == ParseStatus::Fuzzy);
        if (!admitted || !r.parsed_label) continue;
        if (!r.identity) {
            ++local.no_identity;
            continue;
        }
        ImageType m = ImageType::Others;
        auto it = image_types.find(r.image_id);
        if (it != image_types.end())
            m = it->second;
        else
            ++local.unknown_image;
        tensor.add(r.task, *r.identity, *r.parsed_label, m);
        ++local.admitted;
    }
    if (stats) *stats = local;
    return tensor;
}

// --- proportions / IFD -----------------------------------------------------

ProportionTable proportions(const CountTensor& tensor, Task task,
                            EmptyIdentityPolicy policy) {
    ProportionTable table;
    table.task = task;
    const auto& labels = label_set(task);
    for (IdentityCategory cat : kAllCategories) {
        std::vector<Identity> present;
        std::vector<int64_t> pooled(labels.size(), 0);
        for (const Identity& g : identities_in(cat)) {
            int64_t total = tensor.identity_total(task, g);
            if (total == 0) {
                if (policy == EmptyIdentityPolicy::Strict)
                    throw EmptyIdentity("identity '" + g.key() +
                                        "' has no admitted responses for task '" +
                                        to_string(task) + "'");
                continue;  // lenient: drop g from its category
            }
            present.push_back(g);
            std::vector<double> p(labels.size());
            for (size_t k = 0; k < labels.size(); ++k) {
                int64_t c = tensor.count(task, g, labels[k]);
                pooled[k] += c;
                p[k] = static_cast<double>(c) / static_cast<double>(total);
            }
            table.p_identity[g] = std::move(p);
        }
        if (present.empty()) continue;
        int64_t pooled_total = std::accumulate(pooled.begin(), pooled.end(),
                                               static_cast<int64_t>(0));
        std::vector<double> pc(labels.size());
        for (size_t k = 0; k < labels.size(); ++k)
            pc[k] = static_cast<double>(pooled[k]) /
                    static_cast<double>(pooled_total);
        table.p_category[cat] = std::move(pc);
        table.present[cat] = std::move(present);
    }
    return table;
}

double ifd(const ProportionTable& table) {
    size_t n_categories = table.p_category.size();
    if (n_categories == 0) return 0.0;
    size_t n_labels = table.p_category.begin()->second.size();
    double sum = 0.0;
    for (const auto& [cat, p_cat] : table.p_category) {
        for (const Identity& g : table.present.at(cat)) {
            const auto& p_g = table.p_identity.at(g);
            for (size_t k = 0; k < n_labels; ++k)
                sum += std::abs(p_g[k] - p_cat[k]);
        }
    }
    return sum / (static_cast<double>(n_categories) *
                  static_cast<double>(n_labels));
}

// --- conditional shares / NRD ----------------------------------------------

ConditionalShareTensor conditional_shares(const CountTensor& tensor, Task task,
                                          IdentityCategory category) {
    ConditionalShareTensor out;
    out.task = task;
    out.category = category;
    out.identities = identities_in(category);
    const auto& labels = label_set(task);
    size_t nG = out.identities.size();
    out.q.assign(nG, std::vector<std::vector<double>>(
                         labels.size(), std::vector<double>(kNumImageTypes, 0.0)));
    out.cell_status.assign(labels.size(),
                           std::vector<CellStatus>(kNumImageTypes,
                                                   CellStatus::Valid));
    for (size_t k = 0; k < labels.size(); ++k) {
        for (int m = 0; m < kNumImageTypes; ++m) {
            int64_t denom = 0;
            for (const Identity& g : out.identities)
                denom += tensor.at(task, g, labels[k], static_cast<ImageType>(m));
            if (denom == 0) {
                out.cell_status[k][static_cast<size_t>(m)] =
                    CellStatus::EmptyDenominator;
                ++out.empty_cells;
                continue;
            }
            for (size_t gi = 0; gi < nG; ++gi)
                out.q[gi][k][static_cast<size_t>(m)] =
                    static_cast<double>(tensor.at(task, out.identities[gi],
                                                  labels[k],
                                                  static_cast<ImageType>(m))) /
                    static_cast<double>(denom);
        }
    }
    return out;
}

double nrd(const ConditionalShareTensor& shares) {
    size_t nG = shares.identities.size();
    size_t nO = shares.cell_status.size();
    double uniform = 1.0 / static_cast<double>(nG);
    bool any_valid = false;
    double sum = 0.0;
    for (size_t k = 0; k < nO; ++k) {
        double inner = 0.0;
        for (size_t gi = 0; gi < nG; ++gi)
            for (size_t m = 0; m < shares.cell_status[k].size(); ++m) {
                if (shares.cell_status[k][m] == CellStatus::EmptyDenominator)
                    continue;
                any_valid = true;
                double d = shares.q[gi][k][m] - uniform;
                inner += d * d;
            }
        sum += std::sqrt(inner / static_cast<double>(nG));
    }
    if (!any_valid)
        throw AllCellsEmpty("no (label, image type) cell has any responses");
    return sum / static_cast<double>(nO);
}

// --- JS divergence / similarity ---------------------------------------------

double js_divergence(const std::vector<double>& p,
                     const std::vector<double>& q) {
    if (p.size() != q.size())
        throw DimensionMismatch("JS inputs have sizes " +
                                std::to_string(p.size()) + " and " +
                                std::to_string(q.size()));
    double sp = 0.0, sq = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0)
            throw InvalidDistribution("negative probability entry");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > kNormTol || std::abs(sq - 1.0) > kNormTol)
        throw InvalidDistribution("inputs are not normalized");
    auto kl_to_mid = [&](const std::vector<double>& e) {
        double kl = 0.0;
        for (size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0.0) continue;  // 0 * log(0/x) = 0
            double mid = 0.5 * (p[i] + q[i]);
            kl += e[i] * std::log2(e[i] / mid);
        }
        return kl;
    };
    return 0.5 * (kl_to_mid(p) + kl_to_mid(q));
}

std::vector<double> one_hot(Task task, OutputLabel label) {
    std::vector<double> v(label_set(task).size(), 0.0);
    v[static_cast<size_t>(label_index(task, label))] = 1.0;
    return v;
}

ModelLabels ModelLabels::defaults(std::map<std::string, OutputLabel> labels) {
    ModelLabels m;
    m.mode = AlignmentMode::DefaultAlignment;
    m.default_labels = std::move(labels);
    return m;
}

ModelLabels ModelLabels::per_identity(
    std::map<Identity, std::map<std::string, OutputLabel>> labels) {
    ModelLabels m;
    m.mode = AlignmentMode::IdentityAlignment;
    m.identity_labels = std::move(labels);
    return m;
}

SimilarityTable similarity_table(const ModelLabels& model,
                                 const std::vector<GroupPreferenceLabel>& human,
                                 Task task, IdentityCategory category,
                                 bool exclude_ambiguous) {
    SimilarityTable out;
    out.task = task;
    out.category = category;
    out.mode = model.mode;

    std::map<Identity, std::map<std::string, OutputLabel>> human_by_group;
    for (const GroupPreferenceLabel& h : human) {
        if (h.task != task || h.group.category != category) continue;
        if (exclude_ambiguous && h.ambiguous) continue;
        human_by_group[h.group][h.image_id] = h.label;
    }

    for (const Identity& g : identities_in(category)) {
        const std::map<std::string, OutputLabel>* model_map;
        if (model.mode == AlignmentMode::DefaultAlignment) {
            model_map = &model.default_labels;
        } else {
            auto it = model.identity_labels.find(g);
            if (it == model.identity_labels.end())
                throw MissingIdentity("no identity-conditioned labels for " +
                                      g.key());
            model_map = &it->second;
        }
        auto hit = human_by_group.find(g);
        double sum = 0.0;
        int n = 0;
        if (hit != human_by_group.end()) {
            for (const auto& [image_id, human_label] : hit->second) {
                auto mit = model_map->find(image_id);
                if (mit == model_map->end()) continue;
                sum += 1.0 - js_divergence(one_hot(task, mit->second),
                                           one_hot(task, human_label));
                ++n;
            }
        }
        if (n == 0)
            throw NoOverlap("identity '" + g.key() +
                            "' shares no images with the ground truth");
        out.S[g] = sum / n;
        out.n_images[g] = n;
    }

    double mean = 0.0;
    for (const auto& [g, s] : out.S) mean += s;
    mean /= static_cast<double>(out.S.size());
    out.S_bar = mean;
    for (const auto& [g, s] : out.S) out.AAS[g] = s - mean;
    return out;
}

AlignmentDelta alignment_delta(const SimilarityTable& default_table,
                               const SimilarityTable& identity_table,
                               const Identity& g, const Identity& h) {
    auto lookup = [](const SimilarityTable& t, const Identity& id) {
        auto it = t.S.find(id);
        if (it == t.S.end())
            throw MissingIdentity("similarity table has no entry for " +
                                  id.key());
        return it->second;
    };
    AlignmentDelta d;
    d.delta_g = lookup(identity_table, g) - lookup(default_table, g);
    d.delta_h = lookup(identity_table, h) - lookup(default_table, h);
    d.delta = d.delta_g - d.delta_h;
    return d;
}

// --- metric report -----------------------------------------------------------

MetricReport compute_metric_report(
    const std::vector<ResponseRecord>& records,
    const std::map<std::string, ImageType>& image_types, Task task,
    AdmissionPolicy policy, const std::string& model_id) {
    MetricReport report;
    report.model_id = model_id;
    report.task = task;
    std::vector<ResponseRecord> task_records;
    for (const auto& r : records)
        if (r.task == task) task_records.push_back(r);
    CountTensor tensor =
        accumulate(task_records, image_types, policy, &report.admission);
    ProportionTable table =
        proportions(tensor, task, EmptyIdentityPolicy::Lenient);
    report.ifd_value = ifd(table);
    report.n_categories = static_cast<int>(table.p_category.size());
    report.n_labels = static_cast<int>(label_set(task).size());
    for (IdentityCategory cat : kAllCategories) {
        ConditionalShareTensor shares = conditional_shares(tensor, task, cat);
        try {
            report.nrd_value[cat] = nrd(shares);
            report.nrd_empty_cells[cat] = shares.empty_cells;
        } catch (const AllCellsEmpty&) {
            // category had no responses at all; leave it out of the report
        }
    }
    return report;
}

// --- JSON --------------------------------------------------------------------

void to_json(json& j, const MetricReport& r) {
    j = json{{"model_id", r.model_id},
             {"task", to_string(r.task)},
             {"ifd", r.ifd_value},
             {"n_categories", r.n_categories},
             {"n_labels", r.n_labels}};
    json nrd_obj = json::object(), empty_obj = json::object();
    for (const auto& [cat, v] : r.nrd_value) nrd_obj[to_string(cat)] = v;
    for (const auto& [cat, v] : r.nrd_empty_cells)
        empty_obj[to_string(cat)] = v;
    j["nrd"] = nrd_obj;
    j["nrd_empty_cells"] = empty_obj;
    j["admission"] = json{{"ok", r.admission.ok},
                          {"fuzzy", r.admission.fuzzy},
                          {"unparseable", r.admission.unparseable},
                          {"admitted", r.admission.admitted},
                          {"no_identity", r.admission.no_identity},
                          {"unknown_image", r.admission.unknown_image}};
}

void from_json(const json& j, MetricReport& r) {
    r.model_id = j.at("model_id").get<std::string>();
    r.task = task_from_string(j.at("task").get<std::string>()).value();
    r.ifd_value = j.at("ifd").get<double>();
    r.n_categories = j.value("n_categories", 0);
    r.n_labels = j.value("n_labels", 0);
    r.nrd_value.clear();
    r.nrd_empty_cells.clear();
    for (const auto& [key, val] : j.at("nrd").items())
        r.nrd_value[category_from_string(key).value()] = val.get<double>();
    if (j.contains("nrd_empty_cells"))
        for (const auto& [key, val] : j["nrd_empty_cells"].items())
            r.nrd_empty_cells[category_from_string(key).value()] =
                val.get<int>();
    if (j.contains("admission")) {
        const auto& a = j["admission"];
        r.admission.ok = a.value("ok", 0);
        r.admission.fuzzy = a.value("fuzzy", 0);
        r.admission.unparseable = a.value("unparseable", 0);
        r.admission.admitted = a.value("admitted", 0);
        r.admission.no_identity = a.value("no_identity", 0);
        r.admission.unknown_image = a.value("unknown_image", 0);
    }
}

void to_json(json& j, const SimilarityTable& t) {
    j = json{{"task", to_string(t.task)},
             {"category", to_string(t.category)},
             {"mode", t.mode == AlignmentMode::DefaultAlignment
                          ? "default_alignment"
                          : "identity_alignment"},
             {"s_bar", t.S_bar}};
    json s = json::object(), aas = json::object(), n = json::object();
    for (const auto& [g, v] : t.S) s[g.bin_name()] = v;
    for (const auto& [g, v] : t.AAS) aas[g.bin_name()] = v;
    for (const auto& [g, v] : t.n_images) n[g.bin_name()] = v;
    j["s"] = s;
    j["aas"] = aas;
    j["n_images"] = n;
}

void from_json(const json& j, SimilarityTable& t) {
    t.task = task_from_string(j.at("task").get<std::string>()).value();
    t.category =
        category_from_string(j.at("category").get<std::string>()).value();
    t.mode = j.at("mode").get<std::string>() == "identity_alignment"
                 ? AlignmentMode::IdentityAlignment
                 : AlignmentMode::DefaultAlignment;
    t.S_bar = j.value("s_bar", 0.0);
    t.S.clear();
    t.AAS.clear();
    t.n_images.clear();
    for (const auto& [bin, v] : j.at("s").items()) {
        auto g = identity_from_strings(to_string(t.category), bin);
        if (!g) throw DataError("unknown bin '" + bin + "' in similarity table");
        t.S[*g] = v.get<double>();
    }
    for (const auto& [bin, v] : j.at("aas").items())
        t.AAS[*identity_from_strings(to_string(t.category), bin)] =
            v.get<double>();
    if (j.contains("n_images"))
        for (const auto& [bin, v] : j["n_images"].items())
            t.n_images[*identity_from_strings(to_string(t.category), bin)] =
                v.get<int>();
}

}  // namespace aesaudit
