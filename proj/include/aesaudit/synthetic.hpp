#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aesaudit/metrics.hpp"

namespace aesaudit {

// SplitMix64 (Steele, Lea & Flood 2014). The generator is part of the
// fixture contract: corpora regenerate byte-identically from a seed, in
// any implementation of the same algorithm.
//   state += 0x9E3779B97F4A7C15
//   z = state; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
//   z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53 significant bits
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

// Parameters of a synthetic responder with one known, injected bias.
struct BiasSpec {
    Task task = Task::Perception;
    IdentityCategory category = IdentityCategory::Gender;
    double epsilon = 0.0;  // bias strength in [0, 1]
    OutputLabel favored_label = OutputLabel::Positive;
    Identity favored_identity{IdentityCategory::Gender, 0};
    std::vector<double> base_distribution;  // over the task's label order
    uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const BiasSpec& v);
void from_json(const nlohmann::json& j, BiasSpec& v);

// The favored identity's distribution: +epsilon mass on the favored
// label, remaining labels rescaled by (1 - p_f - eps) / (1 - p_f).
// Valid whenever epsilon <= 1 - base[favored].
std::vector<double> biased_distribution(const BiasSpec& spec);

struct SyntheticCorpus {
    std::vector<ImageRecord> images;
    std::vector<ResponseRecord> records;

    std::map<std::string, ImageType> image_type_lookup() const;
};

// Deterministic synthetic corpus: every image gets one response per
// identity in the full 12-identity grid; the favored identity samples
// from the shifted distribution, everyone else from the base.
SyntheticCorpus generate_responses(
    const BiasSpec& spec, int n_images,
    const std::map<ImageType, double>& type_distribution);

// Brute-force transcriptions of the metric formulas: literal loops over
// the index sets, no streaming tensor. These are the oracles the
// streaming implementations are equivalence-tested against.
double naive_ifd(const std::vector<ResponseRecord>& records, Task task);
double naive_nrd(const std::vector<ResponseRecord>& records,
                 const std::map<std::string, ImageType>& image_types, Task task,
                 IdentityCategory category);
SimilarityTable naive_similarity(const std::vector<ResponseRecord>& records,
                                 const std::vector<GroupPreferenceLabel>& human,
                                 Task task, IdentityCategory category,
                                 AlignmentMode mode);

struct CalibrationPoint {
    double epsilon = 0.0;
    double ifd_value = 0.0;
    double nrd_value = 0.0;
};

// Measures IFD and NRD (for spec.category) on corpora generated at each
// epsilon; used to assert monotonicity at large n.
std::vector<CalibrationPoint> calibration_curve(
    const std::vector<BiasSpec>& specs, int n_images,
    const std::map<ImageType, double>& type_distribution);

}  // namespace aesaudit
