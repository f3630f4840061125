#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aesaudit/core.hpp"
#include "aesaudit/ground_truth.hpp"

namespace aesaudit {

// Which parse statuses count toward the tallies.
enum class AdmissionPolicy { StrictOnly, IncludeFuzzy };

struct AdmissionStats {
    int64_t ok = 0;
    int64_t fuzzy = 0;
    int64_t unparseable = 0;
    int64_t admitted = 0;
    int64_t no_identity = 0;      // default-prompt records (not tallied here)
    int64_t unknown_image = 0;    // image_id missing from the lookup -> "others"
};

// Dense per-task count tensor over identity x label x image type.
// Cell (t, g, k, m) holds n(M(i,t,g)=k | m); marginals are sums.
class CountTensor {
public:
    CountTensor();

    void add(Task task, const Identity& g, OutputLabel k, ImageType m,
             int64_t n = 1);
    int64_t at(Task task, const Identity& g, OutputLabel k, ImageType m) const;

    // n(M(i,t,g)=k), summed over image types.
    int64_t count(Task task, const Identity& g, OutputLabel k) const;
    // total responses by identity g on task t.
    int64_t identity_total(Task task, const Identity& g) const;

    // cellwise addition; associative and commutative, so partial tensors
    // built concurrently can be merged in any order.
    void merge(const CountTensor& other);

private:
    int identity_index(const Identity& g) const;
    // one flat [12 x n_O x 9] block per task
    std::vector<int64_t> cells_[3];
};

CountTensor accumulate(const std::vector<ResponseRecord>& records,
                       const std::map<std::string, ImageType>& image_types,
                       AdmissionPolicy policy, AdmissionStats* stats = nullptr);

// Per-identity and pooled per-category label proportions (Eq. p_{g,k},
// p_{G,k}; pooling sums counts across the category's identities).
struct ProportionTable {
    Task task = Task::Perception;
    // identity -> proportions over the task's canonical label order
    std::map<Identity, std::vector<double>> p_identity;
    // category -> pooled proportions
    std::map<IdentityCategory, std::vector<double>> p_category;
    // identities that actually had responses, per category
    std::map<IdentityCategory, std::vector<Identity>> present;
};

enum class EmptyIdentityPolicy { Strict, Lenient };

ProportionTable proportions(const CountTensor& tensor, Task task,
                            EmptyIdentityPolicy policy = EmptyIdentityPolicy::Strict);

// Identity Frequency Disparity: mean absolute deviation between identity
// and pooled category proportions, normalized by (#categories x |O|).
double ifd(const ProportionTable& table);

enum class CellStatus { Valid, EmptyDenominator };

// q_{g,k,m}: identity g's share of the outputs k within image type m,
// across a single category.
struct ConditionalShareTensor {
    Task task = Task::Perception;
    IdentityCategory category = IdentityCategory::Gender;
    std::vector<Identity> identities;
    // q[g_idx][k_idx][m_idx]
    std::vector<std::vector<std::vector<double>>> q;
    // status[k_idx][m_idx]
    std::vector<std::vector<CellStatus>> cell_status;
    int empty_cells = 0;
};

ConditionalShareTensor conditional_shares(const CountTensor& tensor, Task task,
                                          IdentityCategory category);

// Normalized Representation Disparity for one category: per-label RMS
// deviation of the shares from the uniform 1/n_G, averaged over labels.
// Empty-denominator cells are excluded from the inner sum.
double nrd(const ConditionalShareTensor& shares);

// Jensen-Shannon divergence, base-2 logs, 0*log(0/x)=0; result in [0,1].
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

std::vector<double> one_hot(Task task, OutputLabel label);

enum class AlignmentMode { DefaultAlignment, IdentityAlignment };

struct SimilarityTable {
    Task task = Task::Perception;
    IdentityCategory category = IdentityCategory::Gender;
    AlignmentMode mode = AlignmentMode::DefaultAlignment;
    std::map<Identity, double> S;
    std::map<Identity, double> AAS;
    double S_bar = 0.0;
    std::map<Identity, int> n_images;
};

// Model labels feeding similarity_table: one shared map in default mode,
// one map per identity in identity mode.
struct ModelLabels {
    AlignmentMode mode = AlignmentMode::DefaultAlignment;
    std::map<std::string, OutputLabel> default_labels;
    std::map<Identity, std::map<std::string, OutputLabel>> identity_labels;

    static ModelLabels defaults(std::map<std::string, OutputLabel> labels);
    static ModelLabels per_identity(
        std::map<Identity, std::map<std::string, OutputLabel>> labels);
};

// S(g) = mean over shared images of 1 - JS(onehot(model), onehot(human g));
// AAS(g) = S(g) - mean_h S(h) over the category.
SimilarityTable similarity_table(const ModelLabels& model,
                                 const std::vector<GroupPreferenceLabel>& human,
                                 Task task, IdentityCategory category,
                                 bool exclude_ambiguous = false);

struct AlignmentDelta {
    double delta_g = 0.0;
    double delta_h = 0.0;
    double delta = 0.0;  // delta_g - delta_h
};

AlignmentDelta alignment_delta(const SimilarityTable& default_table,
                               const SimilarityTable& identity_table,
                               const Identity& g, const Identity& h);

// Full per-task metric report (serialized to JSON by the report layer).
struct MetricReport {
    std::string model_id;
    Task task = Task::Perception;
    double ifd_value = 0.0;
    std::map<IdentityCategory, double> nrd_value;
    std::map<IdentityCategory, int> nrd_empty_cells;
    AdmissionStats admission;
    int n_categories = 0;
    int n_labels = 0;
};

MetricReport compute_metric_report(const std::vector<ResponseRecord>& records,
                                   const std::map<std::string, ImageType>& image_types,
                                   Task task, AdmissionPolicy policy,
                                   const std::string& model_id);

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);
void to_json(nlohmann::json& j, const SimilarityTable& t);
void from_json(const nlohmann::json& j, SimilarityTable& t);

}  // namespace aesaudit
