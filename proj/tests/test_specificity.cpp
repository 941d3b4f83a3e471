#include <gtest/gtest.h>

#include <cmath>

#include "committee_audit/specificity.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace ca = committee_audit;

namespace {
std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }
} // namespace

TEST(CosineDistance, HandValues) {
    const std::vector<double> v{0.3, 0.7}, a{1, 0}, b{0, 1}, h{0.5, 0.5};
    EXPECT_EQ(ca::cosine_distance(v, v), 0.0);
    EXPECT_EQ(ca::cosine_distance(a, b), 1.0);
    EXPECT_NEAR(ca::cosine_distance(h, a), 1.0 - 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(ca::cosine_distance(h, a), 0.29289, 1e-5);
}

TEST(Silhouette, SeparatedOneHotClusters) {
    auto t = fixtures::make_trace(3, 1, 1, {"A", "B"},
                                  {{0, {1, 0, 0}}, {0, {1, 0, 0}}, {1, {0, 1, 0}}, {1, {0, 1, 0}}, {1, {0, 1, 0}}});
    const auto s = ca::silhouette_scores(t, 0);
    for (double x : s.silhouette) EXPECT_EQ(x, 1.0);
    EXPECT_EQ(s.domain_score, (std::vector<double>{1.0, 1.0}));
}

TEST(Silhouette, IdenticalSamplesAreZero) {
    const std::vector<double> v{0.2, 0.8};
    auto t = fixtures::make_trace(2, 1, 1, {"A", "B", "C"}, {{0, v}, {0, v}, {1, v}, {1, v}, {2, v}});
    const auto s = ca::silhouette_scores(t, 0);
    for (double x : s.silhouette) EXPECT_EQ(x, 0.0);
}

TEST(Silhouette, SingletonDomainScoresZero) {
    auto t = fixtures::make_trace(2, 1, 1, {"A", "B"}, {{0, {1, 0}}, {1, {0, 1}}, {1, {0.1, 0.9}}});
    const auto s = ca::silhouette_scores(t, 0);
    EXPECT_EQ(s.silhouette[0], 0.0);
    EXPECT_GT(s.silhouette[1], 0.0);
}

TEST(Silhouette, MatchesQuadraticOracle) {
    ca::SplitMix64 rng(3);
    std::vector<std::pair<std::uint32_t, std::vector<double>>> samples;
    for (std::uint32_t d = 0; d < 3; ++d)
        for (int i = 0; i < 20; ++i) samples.push_back({d, fixtures::random_simplex(rng, 8)});
    const auto t = fixtures::make_trace(8, 1, 2, {"a", "b", "c"}, samples);
    const auto s = ca::silhouette_scores(t, 0);
    std::vector<std::vector<double>> x;
    std::vector<std::uint32_t> lab;
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        x.push_back(vec(t.vector(i, 0)));
        lab.push_back(t.samples[i].domain_id);
    }
    const auto ref = oracle::silhouette(x, lab, 3);
    ASSERT_EQ(s.silhouette.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(s.silhouette[i], ref[i], 1e-9);
}

TEST(Silhouette, Preconditions) {
    auto one = fixtures::make_trace(2, 1, 1, {"A"}, {{0, {1, 0}}, {0, {0, 1}}});
    EXPECT_THROW(ca::silhouette_scores(one, 0), ca::PreconditionError);
    auto gap = fixtures::make_trace(2, 1, 1, {"A", "B"}, {{0, {1, 0}}});
    EXPECT_THROW(ca::silhouette_scores(gap, 0), ca::PreconditionError);
    auto two = fixtures::make_trace(2, 1, 1, {"A", "B"}, {{0, {1, 0}}, {1, {0, 1}}});
    EXPECT_THROW(ca::silhouette_scores(two, 1), ca::PreconditionError);
}

TEST(Silhouette, SubsetIsSeededAndSized) {
    auto spec = fixtures::planted_spec();
    spec.samples_per_domain = 30;
    spec.num_layers = 1;
    const auto t = ca::generate(spec);
    ca::SilhouetteOptions o;
    o.max_samples = 100;
    o.seed = 5;
    const auto a = ca::silhouette_scores(t, 0, o);
    const auto b = ca::silhouette_scores(t, 0, o);
    EXPECT_EQ(a.sample_index.size(), 100u);
    EXPECT_EQ(a.sample_index, b.sample_index);
    EXPECT_EQ(a.silhouette, b.silhouette);
}

TEST(FilterDomains, Thresholds) {
    ca::SpecificityScores s;
    s.layers.resize(1);
    s.layers[0].domain_score = {0.3, -0.1, 0.05};
    EXPECT_EQ(ca::filter_domains(s, 0, 0.0), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(ca::filter_domains(s, 0, -1.0).size(), 3u);
    EXPECT_TRUE(ca::filter_domains(s, 0, std::nextafter(1.0, 2.0)).empty());
    s.layers[0].domain_score[1] = 1.0;
    EXPECT_EQ(ca::filter_domains(s, 0, 1.0), (std::vector<std::size_t>{1}));
    EXPECT_THROW(ca::filter_domains(s, 1, 0.0), ca::PreconditionError);
}
