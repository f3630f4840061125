#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "aesaudit/metrics.hpp"
#include "aesaudit/synthetic.hpp"

using namespace aesaudit;

namespace {

ResponseRecord rec(const std::string& image, Task task,
                   std::optional<Identity> identity, OutputLabel label,
                   ParseStatus status = ParseStatus::Ok) {
    ResponseRecord r;
    r.model_id = "m";
    r.image_id = image;
    r.task = task;
    r.identity = identity;
    r.parsed_label = label;
    r.parse_status = status;
    return r;
}

Identity male() { return *identity_from_strings("gender", "male"); }
Identity female() { return *identity_from_strings("gender", "female"); }

// n records per (identity, label) pair on one image
std::vector<ResponseRecord> gender_fixture(int male_pos, int male_nor,
                                           int female_pos, int female_nor) {
    std::vector<ResponseRecord> out;
    auto push = [&](Identity g, OutputLabel k, int n) {
        for (int i = 0; i < n; ++i)
            out.push_back(rec("img", Task::Perception, g, k));
    };
    push(male(), OutputLabel::Positive, male_pos);
    push(male(), OutputLabel::Normal, male_nor);
    push(female(), OutputLabel::Positive, female_pos);
    push(female(), OutputLabel::Normal, female_nor);
    return out;
}

const std::map<std::string, ImageType> kOneImage = {
    {"img", ImageType::Scene}};

}  // namespace

TEST_CASE("accumulate admits by parse status and tracks exclusions") {
    std::vector<ResponseRecord> records = {
        rec("img", Task::Perception, male(), OutputLabel::Positive),
        rec("img", Task::Perception, male(), OutputLabel::Positive,
            ParseStatus::Fuzzy),
        rec("img", Task::Perception, std::nullopt, OutputLabel::Positive),
    };
    ResponseRecord bad;
    bad.model_id = "m";
    bad.image_id = "img";
    bad.task = Task::Perception;
    bad.identity = male();
    bad.parse_status = ParseStatus::Unparseable;
    records.push_back(bad);

    AdmissionStats strict;
    CountTensor a =
        accumulate(records, kOneImage, AdmissionPolicy::StrictOnly, &strict);
    CHECK(a.count(Task::Perception, male(), OutputLabel::Positive) == 1);
    CHECK(strict.admitted == 1);
    CHECK(strict.fuzzy == 1);
    CHECK(strict.unparseable == 1);
    CHECK(strict.no_identity == 1);

    AdmissionStats loose;
    CountTensor b =
        accumulate(records, kOneImage, AdmissionPolicy::IncludeFuzzy, &loose);
    CHECK(b.count(Task::Perception, male(), OutputLabel::Positive) == 2);
    CHECK(loose.admitted == 2);
}

TEST_CASE("unknown image ids land in the others type") {
    std::vector<ResponseRecord> records = {
        rec("mystery", Task::Perception, male(), OutputLabel::Positive)};
    AdmissionStats stats;
    CountTensor t =
        accumulate(records, kOneImage, AdmissionPolicy::StrictOnly, &stats);
    CHECK(t.at(Task::Perception, male(), OutputLabel::Positive,
               ImageType::Others) == 1);
    CHECK(stats.unknown_image == 1);
}

TEST_CASE("tensor merge equals one-pass accumulation") {
    BiasSpec spec;
    spec.epsilon = 0.3;
    spec.base_distribution = {0.5, 0.3, 0.2};
    spec.seed = 42;
    SyntheticCorpus corpus =
        generate_responses(spec, 20, {{ImageType::Scene, 1.0}});
    auto types = corpus.image_type_lookup();

    CountTensor whole =
        accumulate(corpus.records, types, AdmissionPolicy::StrictOnly);
    std::vector<ResponseRecord> front(corpus.records.begin(),
                                      corpus.records.begin() + 100);
    std::vector<ResponseRecord> back(corpus.records.begin() + 100,
                                     corpus.records.end());
    CountTensor merged = accumulate(front, types, AdmissionPolicy::StrictOnly);
    merged.merge(accumulate(back, types, AdmissionPolicy::StrictOnly));

    for (const Identity& g : identity_grid())
        for (OutputLabel k : label_set(spec.task))
            CHECK(merged.count(spec.task, g, k) ==
                  whole.count(spec.task, g, k));
}

TEST_CASE("pooled category proportions sum the raw counts") {
    CountTensor t = accumulate(gender_fixture(3, 1, 1, 3), kOneImage,
                               AdmissionPolicy::StrictOnly);
    ProportionTable table =
        proportions(t, Task::Perception, EmptyIdentityPolicy::Lenient);
    const auto& male_p = table.p_identity.at(male());
    CHECK(male_p[0] == doctest::Approx(0.75));
    CHECK(male_p[1] == doctest::Approx(0.25));
    CHECK(male_p[2] == 0.0);
    // (3 + 1) / (4 + 4), not the mean of 0.75 and 0.25 weighted wrongly
    CHECK(table.p_category.at(IdentityCategory::Gender)[0] == 0.5);
    // age and education saw no responses at all
    CHECK(table.present.count(IdentityCategory::Age) == 0);
}

TEST_CASE("empty identities: strict throws, lenient drops") {
    // one age bin responded, the other four did not
    Identity young = *identity_from_strings("age", "18-21");
    std::vector<ResponseRecord> records = {
        rec("img", Task::Perception, young, OutputLabel::Positive),
        rec("img", Task::Perception, male(), OutputLabel::Positive),
        rec("img", Task::Perception, female(), OutputLabel::Normal)};
    CountTensor t =
        accumulate(records, kOneImage, AdmissionPolicy::StrictOnly);
    CHECK_THROWS_AS(
        proportions(t, Task::Perception, EmptyIdentityPolicy::Strict),
        EmptyIdentity);
    ProportionTable lenient =
        proportions(t, Task::Perception, EmptyIdentityPolicy::Lenient);
    CHECK(lenient.present.at(IdentityCategory::Age).size() == 1);
    CHECK(lenient.present.at(IdentityCategory::Gender).size() == 2);
}

TEST_CASE("frequency disparity on the two-label worked fixture is 0.5") {
    ProportionTable table;
    table.task = Task::Perception;
    table.p_identity[male()] = {0.75, 0.25};
    table.p_identity[female()] = {0.25, 0.75};
    table.p_category[IdentityCategory::Gender] = {0.5, 0.5};
    table.present[IdentityCategory::Gender] = {male(), female()};
    CHECK(ifd(table) == 0.5);
}

TEST_CASE("frequency disparity through the full pipeline") {
    // male 7:1 positive:normal, female the mirror image; with three labels
    // the deviations are 0.375 four times over one category -> exactly 0.5
    CountTensor t = accumulate(gender_fixture(7, 1, 1, 7), kOneImage,
                               AdmissionPolicy::StrictOnly);
    ProportionTable table =
        proportions(t, Task::Perception, EmptyIdentityPolicy::Lenient);
    CHECK(ifd(table) == 0.5);

    // identical distributions give zero disparity
    CountTensor even = accumulate(gender_fixture(4, 4, 4, 4), kOneImage,
                                  AdmissionPolicy::StrictOnly);
    CHECK(ifd(proportions(even, Task::Perception,
                          EmptyIdentityPolicy::Lenient)) == 0.0);
}

TEST_CASE("disparities are invariant to count scaling") {
    for (int scale : {1, 3, 10}) {
        CountTensor t =
            accumulate(gender_fixture(7 * scale, 1 * scale, 1 * scale,
                                      7 * scale),
                       kOneImage, AdmissionPolicy::StrictOnly);
        CHECK(ifd(proportions(t, Task::Perception,
                              EmptyIdentityPolicy::Lenient)) == 0.5);
        CHECK(nrd(conditional_shares(t, Task::Perception,
                                     IdentityCategory::Gender)) ==
              nrd(conditional_shares(
                  accumulate(gender_fixture(7, 1, 1, 7), kOneImage,
                             AdmissionPolicy::StrictOnly),
                  Task::Perception, IdentityCategory::Gender)));
    }
}

TEST_CASE("conditional shares normalize within each (label, type) cell") {
    CountTensor t = accumulate(gender_fixture(3, 1, 1, 3), kOneImage,
                               AdmissionPolicy::StrictOnly);
    ConditionalShareTensor shares =
        conditional_shares(t, Task::Perception, IdentityCategory::Gender);
    REQUIRE(shares.identities.size() == 2);
    int scene = static_cast<int>(ImageType::Scene);
    CHECK(shares.q[0][0][scene] == doctest::Approx(0.75));  // male, positive
    CHECK(shares.q[1][0][scene] == doctest::Approx(0.25));
    // negative was never produced: empty denominator, excluded
    CHECK(shares.cell_status[2][scene] == CellStatus::EmptyDenominator);
    CHECK(shares.empty_cells > 0);
}

TEST_CASE("representation disparity on the worked fixture is 0.25") {
    ConditionalShareTensor shares;
    shares.task = Task::Perception;
    shares.category = IdentityCategory::Gender;
    shares.identities = {male(), female()};
    shares.q = {{{0.75}}, {{0.25}}};
    shares.cell_status = {{CellStatus::Valid}};
    // sqrt(0.5 * (0.25^2 + 0.25^2)) = 0.25, exactly representable
    CHECK(nrd(shares) == 0.25);
}

TEST_CASE("representation disparity errors when every cell is empty") {
    CountTensor empty;
    ConditionalShareTensor shares =
        conditional_shares(empty, Task::Perception, IdentityCategory::Gender);
    CHECK_THROWS_AS(nrd(shares), AllCellsEmpty);
}

TEST_CASE("divergence fixtures") {
    CHECK(js_divergence({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == 0.0);
    CHECK(js_divergence({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(1.0));
    CHECK(js_divergence({0.5, 0.5}, {1.0, 0.0}) ==
          doctest::Approx(0.31128).epsilon(1e-4));
    CHECK_THROWS_AS(js_divergence({1.0}, {0.5, 0.5}), DimensionMismatch);
    CHECK_THROWS_AS(js_divergence({0.9, 0.0}, {0.5, 0.5}),
                    InvalidDistribution);
}

TEST_CASE("divergence is symmetric and bounded on random inputs") {
    SplitMix64 rng(3);
    for (int i = 0; i < 500; ++i) {
        int n = 2 + static_cast<int>(rng.next() % 7);
        std::vector<double> p(n), q(n);
        double sp = 0, sq = 0;
        for (int j = 0; j < n; ++j) {
            p[j] = rng.uniform() + 1e-6;
            q[j] = rng.uniform() + 1e-6;
            sp += p[j];
            sq += q[j];
        }
        for (int j = 0; j < n; ++j) {
            p[j] /= sp;
            q[j] /= sq;
        }
        double d = js_divergence(p, q);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0 + 1e-12);
        CHECK(d == doctest::Approx(js_divergence(q, p)).epsilon(1e-12));
    }
}

TEST_CASE("one-hot divergence reduces to the equality indicator") {
    for (Task t : kAllTasks)
        for (OutputLabel a : label_set(t))
            for (OutputLabel b : label_set(t)) {
                double sim = 1.0 - js_divergence(one_hot(t, a), one_hot(t, b));
                CHECK(sim == (a == b ? 1.0 : 0.0));
            }
}

namespace {

GroupPreferenceLabel gt(const std::string& image, Identity g, Task task,
                        OutputLabel label) {
    GroupPreferenceLabel l;
    l.image_id = image;
    l.group = g;
    l.task = task;
    l.label = label;
    return l;
}

}  // namespace

TEST_CASE("similarity table on the worked example") {
    // male agrees on 3/5 images, female on 2/5
    std::map<std::string, OutputLabel> model;
    std::vector<GroupPreferenceLabel> human;
    for (int i = 0; i < 5; ++i) {
        std::string img = "img" + std::to_string(i);
        model[img] = OutputLabel::Positive;
        human.push_back(gt(img, male(), Task::Perception,
                           i < 3 ? OutputLabel::Positive
                                 : OutputLabel::Negative));
        human.push_back(gt(img, female(), Task::Perception,
                           i < 2 ? OutputLabel::Positive
                                 : OutputLabel::Normal));
    }
    SimilarityTable t =
        similarity_table(ModelLabels::defaults(model), human,
                         Task::Perception, IdentityCategory::Gender);
    CHECK(t.S.at(male()) == doctest::Approx(0.6));
    CHECK(t.S.at(female()) == doctest::Approx(0.4));
    CHECK(t.S_bar == doctest::Approx(0.5));
    CHECK(t.AAS.at(male()) == doctest::Approx(0.1));
    CHECK(t.AAS.at(female()) == doctest::Approx(-0.1));
    CHECK(t.n_images.at(male()) == 5);
}

TEST_CASE("similarity errors") {
    std::map<std::string, OutputLabel> model = {
        {"imgA", OutputLabel::Positive}};
    std::vector<GroupPreferenceLabel> human = {
        gt("imgB", male(), Task::Perception, OutputLabel::Positive),
        gt("imgB", female(), Task::Perception, OutputLabel::Positive)};
    CHECK_THROWS_AS(
        similarity_table(ModelLabels::defaults(model), human,
                         Task::Perception, IdentityCategory::Gender),
        NoOverlap);

    // identity mode requires labels for every group in the category
    std::map<Identity, std::map<std::string, OutputLabel>> only_male;
    only_male[male()] = {{"imgB", OutputLabel::Positive}};
    CHECK_THROWS_AS(
        similarity_table(ModelLabels::per_identity(only_male), human,
                         Task::Perception, IdentityCategory::Gender),
        MissingIdentity);
}

TEST_CASE("ambiguous ground truth can be excluded") {
    std::map<std::string, OutputLabel> model = {
        {"img0", OutputLabel::Awe}, {"img1", OutputLabel::Awe}};
    std::vector<GroupPreferenceLabel> human;
    for (Identity g : {male(), female()}) {
        human.push_back(gt("img0", g, Task::Empathy, OutputLabel::Awe));
        GroupPreferenceLabel amb = gt("img1", g, Task::Empathy,
                                      OutputLabel::Fear);
        amb.ambiguous = true;
        human.push_back(amb);
    }
    SimilarityTable with = similarity_table(
        ModelLabels::defaults(model), human, Task::Empathy,
        IdentityCategory::Gender, /*exclude_ambiguous=*/false);
    SimilarityTable without = similarity_table(
        ModelLabels::defaults(model), human, Task::Empathy,
        IdentityCategory::Gender, /*exclude_ambiguous=*/true);
    CHECK(with.S.at(male()) == doctest::Approx(0.5));
    CHECK(without.S.at(male()) == doctest::Approx(1.0));
    CHECK(without.n_images.at(male()) == 1);
}

TEST_CASE("alignment scores are zero-sum within a category") {
    SplitMix64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<std::string, OutputLabel> model;
        std::vector<GroupPreferenceLabel> human;
        const auto& labels = label_set(Task::Empathy);
        for (int i = 0; i < 20; ++i) {
            std::string img = "img" + std::to_string(i);
            model[img] = labels[rng.next() % labels.size()];
            for (const Identity& g :
                 identities_in(IdentityCategory::Education))
                human.push_back(gt(img, g, Task::Empathy,
                                   labels[rng.next() % labels.size()]));
        }
        SimilarityTable t =
            similarity_table(ModelLabels::defaults(model), human,
                             Task::Empathy, IdentityCategory::Education);
        double sum = 0;
        for (const auto& [g, a] : t.AAS) sum += a;
        CHECK(std::abs(sum) < 1e-9);
    }
}

TEST_CASE("alignment delta composes the two modes") {
    SimilarityTable def, ident;
    def.S[male()] = 0.6;
    def.S[female()] = 0.5;
    ident.S[male()] = 0.8;
    ident.S[female()] = 0.55;
    AlignmentDelta d = alignment_delta(def, ident, male(), female());
    CHECK(d.delta_g == doctest::Approx(0.2));
    CHECK(d.delta_h == doctest::Approx(0.05));
    CHECK(d.delta == doctest::Approx(0.15));
}

TEST_CASE("streaming metrics match the literal transcriptions") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        BiasSpec spec;
        spec.task = Task::Empathy;
        spec.category = IdentityCategory::Education;
        spec.epsilon = 0.25;
        spec.favored_label = OutputLabel::Awe;
        spec.favored_identity = *identity_from_strings("education",
                                                       "university");
        spec.base_distribution = {0.2, 0.1, 0.1, 0.2, 0.1, 0.1, 0.1, 0.1};
        spec.seed = seed;
        SyntheticCorpus corpus = generate_responses(
            spec, 15, {{ImageType::Portrait, 0.5}, {ImageType::Animal, 0.5}});
        auto types = corpus.image_type_lookup();

        CountTensor t =
            accumulate(corpus.records, types, AdmissionPolicy::StrictOnly);
        double fast_ifd = ifd(proportions(t, spec.task,
                                          EmptyIdentityPolicy::Lenient));
        CHECK(fast_ifd ==
              doctest::Approx(naive_ifd(corpus.records, spec.task))
                  .epsilon(1e-12));
        for (IdentityCategory c : kAllCategories) {
            double fast = nrd(conditional_shares(t, spec.task, c));
            CHECK(fast == doctest::Approx(naive_nrd(corpus.records, types,
                                                    spec.task, c))
                              .epsilon(1e-12));
        }
    }
}

TEST_CASE("metric report rolls everything up") {
    BiasSpec spec;
    spec.epsilon = 0.2;
    spec.base_distribution = {0.4, 0.4, 0.2};
    spec.seed = 9;
    SyntheticCorpus corpus =
        generate_responses(spec, 10, {{ImageType::Scene, 1.0}});
    MetricReport r = compute_metric_report(
        corpus.records, corpus.image_type_lookup(), Task::Perception,
        AdmissionPolicy::StrictOnly, "synthetic");
    CHECK(r.model_id == "synthetic");
    CHECK(r.n_categories == 3);
    CHECK(r.n_labels == 3);
    CHECK(r.ifd_value > 0.0);
    CHECK(r.nrd_value.size() == 3);
    CHECK(r.admission.admitted == 12 * 10);

    nlohmann::json j = r;
    MetricReport back = j.get<MetricReport>();
    CHECK(back.ifd_value == r.ifd_value);
    CHECK(back.nrd_value == r.nrd_value);
}
