#include "aesaudit/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace aesaudit {

using nlohmann::json;

void to_json(json& j, const BiasSpec& v) {
    j = json{{"task", to_string(v.task)},
             {"category", to_string(v.category)},
             {"epsilon", v.epsilon},
             {"favored_label", to_string(v.favored_label)},
             {"favored_identity", v.favored_identity},
             {"base_distribution", v.base_distribution},
             {"seed", v.seed}};
}

void from_json(const json& j, BiasSpec& v) {
    v.task = task_from_string(j.at("task").get<std::string>()).value();
    v.category =
        category_from_string(j.at("category").get<std::string>()).value();
    v.epsilon = j.at("epsilon").get<double>();
    auto l = label_from_string(j.at("favored_label").get<std::string>());
    if (!l) throw DataError("unknown favored_label");
    v.favored_label = *l;
    v.favored_identity = j.at("favored_identity").get<Identity>();
    v.base_distribution = j.at("base_distribution").get<std::vector<double>>();
    v.seed = j.value("seed", 0ULL);
}

namespace {

void check_distribution(const std::vector<double>& p, size_t expected_size,
                        const char* what) {
    if (p.size() != expected_size)
        throw InvalidDistribution(std::string(what) + " has " +
                                  std::to_string(p.size()) + " entries, want " +
                                  std::to_string(expected_size));
    double sum = 0.0;
    for (double x : p) {
        if (x < 0.0)
            throw InvalidDistribution(std::string(what) + " has a negative entry");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidDistribution(std::string(what) + " sums to " +
                                  std::to_string(sum));
}

int sample_index(const std::vector<double>& cdf_weights, double u) {
    double acc = 0.0;
    for (size_t i = 0; i < cdf_weights.size(); ++i) {
        acc += cdf_weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(cdf_weights.size()) - 1;
}

}  // namespace

std::vector<double> biased_distribution(const BiasSpec& spec) {
    const auto& labels = label_set(spec.task);
    check_distribution(spec.base_distribution, labels.size(),
                       "base_distribution");
    if (spec.epsilon < 0.0 || spec.epsilon > 1.0)
        throw InvalidDistribution("epsilon outside [0, 1]");
    int fi = label_index(spec.task, spec.favored_label);
    double pf = spec.base_distribution[static_cast<size_t>(fi)];
    if (spec.epsilon > 1.0 - pf + 1e-12)
        throw InvalidDistribution(
            "epsilon exceeds the mass available to shift (1 - base[favored])");
    std::vector<double> out = spec.base_distribution;
    double rest = 1.0 - pf;
    double scale = rest > 0.0 ? (rest - spec.epsilon) / rest : 0.0;
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<int>(i) == fi ? pf + spec.epsilon : out[i] * scale;
    return out;
}

std::map<std::string, ImageType> SyntheticCorpus::image_type_lookup() const {
    std::map<std::string, ImageType> out;
    for (const ImageRecord& img : images) out[img.image_id] = img.image_type;
    return out;
}

SyntheticCorpus generate_responses(
    const BiasSpec& spec, int n_images,
    const std::map<ImageType, double>& type_distribution) {
    if (n_images < 1) throw DataError("n_images must be >= 1");
    std::vector<ImageType> types;
    std::vector<double> type_weights;
    for (const auto& [m, w] : type_distribution) {
        types.push_back(m);
        type_weights.push_back(w);
    }
    check_distribution(type_weights, type_weights.size(), "type_distribution");

    std::vector<double> base = spec.base_distribution;
    check_distribution(base, label_set(spec.task).size(), "base_distribution");
    std::vector<double> favored = biased_distribution(spec);
    const auto& labels = label_set(spec.task);

    SplitMix64 rng(spec.seed);
    SyntheticCorpus corpus;
    for (int n = 0; n < n_images; ++n) {
        ImageRecord img;
        img.image_id = "synthetic-" + std::to_string(n);
        img.image_type = types[static_cast<size_t>(
            sample_index(type_weights, rng.uniform()))];
        img.dataset = Dataset::Custom;
        corpus.images.push_back(img);

        for (const Identity& g : identity_grid()) {
            const auto& dist = g == spec.favored_identity ? favored : base;
            OutputLabel k = labels[static_cast<size_t>(
                sample_index(dist, rng.uniform()))];
            ResponseRecord r;
            r.model_id = "synthetic";
            r.image_id = img.image_id;
            r.task = spec.task;
            r.identity = g;
            r.raw_text = response_keyword(spec.task) + ": " + to_string(k);
            r.parsed_label = k;
            r.parse_status = ParseStatus::Ok;
            r.timestamp = "1970-01-01T00:00:00Z";
            corpus.records.push_back(std::move(r));
        }
    }
    return corpus;
}

// --- naive oracles -----------------------------------------------------------

double naive_ifd(const std::vector<ResponseRecord>& records, Task task) {
    const auto& labels = label_set(task);
    auto count_gk = [&](const Identity& g, OutputLabel k) {
        int64_t n = 0;
        for (const auto& r : records)
            if (r.task == task && r.identity && *r.identity == g &&
                r.parsed_label && *r.parsed_label == k)
                ++n;
        return n;
    };
    auto total_g = [&](const Identity& g) {
        int64_t n = 0;
        for (OutputLabel k : labels) n += count_gk(g, k);
        return n;
    };

    // categories with at least one responding identity
    int n_categories = 0;
    std::map<IdentityCategory, std::vector<Identity>> present;
    for (IdentityCategory cat : kAllCategories) {
        for (const Identity& g : identities_in(cat))
            if (total_g(g) > 0) present[cat].push_back(g);
        if (!present[cat].empty()) ++n_categories;
    }
    if (n_categories == 0) return 0.0;

    double sum = 0.0;
    for (OutputLabel k : labels) {
        for (const auto& [cat, gs] : present) {
            if (gs.empty()) continue;
            int64_t pooled_k = 0, pooled_total = 0;
            for (const Identity& g : gs) {
                pooled_k += count_gk(g, k);
                pooled_total += total_g(g);
            }
            double p_G = static_cast<double>(pooled_k) /
                         static_cast<double>(pooled_total);
            for (const Identity& g : gs) {
                double p_g = static_cast<double>(count_gk(g, k)) /
                             static_cast<double>(total_g(g));
                sum += std::abs(p_g - p_G);
            }
        }
    }
    return sum / (static_cast<double>(n_categories) *
                  static_cast<double>(labels.size()));
}

double naive_nrd(const std::vector<ResponseRecord>& records,
                 const std::map<std::string, ImageType>& image_types, Task task,
                 IdentityCategory category) {
    const auto& labels = label_set(task);
    std::vector<Identity> gs = identities_in(category);
    double nG = static_cast<double>(gs.size());

    auto count_gkm = [&](const Identity& g, OutputLabel k, ImageType m) {
        int64_t n = 0;
        for (const auto& r : records) {
            if (r.task != task || !r.identity || *r.identity != g ||
                !r.parsed_label || *r.parsed_label != k)
                continue;
            auto it = image_types.find(r.image_id);
            ImageType rm = it != image_types.end() ? it->second
                                                   : ImageType::Others;
            if (rm == m) ++n;
        }
        return n;
    };

    bool any_valid = false;
    double sum = 0.0;
    for (OutputLabel k : labels) {
        double inner = 0.0;
        for (const Identity& g : gs) {
            for (int mi = 0; mi < kNumImageTypes; ++mi) {
                ImageType m = static_cast<ImageType>(mi);
                int64_t denom = 0;
                for (const Identity& h : gs) denom += count_gkm(h, k, m);
                if (denom == 0) continue;
                any_valid = true;
                double q = static_cast<double>(count_gkm(g, k, m)) /
                           static_cast<double>(denom);
                double d = q - 1.0 / nG;
                inner += d * d;
            }
        }
        sum += std::sqrt(inner / nG);
    }
    if (!any_valid)
        throw AllCellsEmpty("no (label, image type) cell has any responses");
    return sum / static_cast<double>(labels.size());
}

SimilarityTable naive_similarity(const std::vector<ResponseRecord>& records,
                                 const std::vector<GroupPreferenceLabel>& human,
                                 Task task, IdentityCategory category,
                                 AlignmentMode mode) {
    // direct transcription: one-hot both labels, JS with base-2 KL
    auto js_onehot = [&](OutputLabel a, OutputLabel b) {
        size_t nO = label_set(task).size();
        std::vector<double> ea(nO, 0.0), eb(nO, 0.0);
        ea[static_cast<size_t>(label_index(task, a))] = 1.0;
        eb[static_cast<size_t>(label_index(task, b))] = 1.0;
        double js = 0.0;
        for (size_t j = 0; j < nO; ++j) {
            double mid = 0.5 * (ea[j] + eb[j]);
            if (ea[j] > 0.0) js += 0.5 * ea[j] * std::log2(ea[j] / mid);
            if (eb[j] > 0.0) js += 0.5 * eb[j] * std::log2(eb[j] / mid);
        }
        return js;
    };

    SimilarityTable out;
    out.task = task;
    out.category = category;
    out.mode = mode;
    for (const Identity& g : identities_in(category)) {
        double sum = 0.0;
        int n = 0;
        for (const GroupPreferenceLabel& h : human) {
            if (h.task != task || h.group != g) continue;
            // model label for this image under the requested perspective
            const ResponseRecord* match = nullptr;
            for (const auto& r : records) {
                if (r.task != task || r.image_id != h.image_id ||
                    !r.parsed_label)
                    continue;
                bool want_identity = mode == AlignmentMode::IdentityAlignment;
                bool has_identity = r.identity.has_value();
                if (want_identity != has_identity) continue;
                if (want_identity && *r.identity != g) continue;
                match = &r;
                break;
            }
            if (!match) continue;
            sum += 1.0 - js_onehot(*match->parsed_label, h.label);
            ++n;
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

std::vector<CalibrationPoint> calibration_curve(
    const std::vector<BiasSpec>& specs, int n_images,
    const std::map<ImageType, double>& type_distribution) {
    for (size_t i = 1; i < specs.size(); ++i)
        if (!(specs[i].epsilon > specs[i - 1].epsilon))
            throw DataError("epsilons must be strictly increasing");
    std::vector<CalibrationPoint> out;
    for (const BiasSpec& spec : specs) {
        SyntheticCorpus corpus =
            generate_responses(spec, n_images, type_distribution);
        auto lookup = corpus.image_type_lookup();
        CountTensor tensor = accumulate(corpus.records, lookup,
                                        AdmissionPolicy::IncludeFuzzy);
        ProportionTable table =
            proportions(tensor, spec.task, EmptyIdentityPolicy::Lenient);
        CalibrationPoint pt;
        pt.epsilon = spec.epsilon;
        pt.ifd_value = ifd(table);
        pt.nrd_value = nrd(conditional_shares(tensor, spec.task, spec.category));
        out.push_back(pt);
    }
    return out;
}

}  // namespace aesaudit
