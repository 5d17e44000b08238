#include <gtest/gtest.h>

#include <random>

#include "../support/backend_builder.hpp"
#include "../support/fraction.hpp"
#include "wheatai/disease/disease.hpp"
#include "wheatai/error.hpp"

using namespace wheatai;
using namespace wheatai::disease;
using wheatai::testing::BackendBuilder;
using wheatai::testing::Fraction;
using wheatai::testing::make_det;

namespace {

SpikeFHBRecord rec(std::size_t index, std::size_t total, std::size_t diseased) {
    return SpikeFHBRecord{index, total, diseased, std::nullopt};
}

bool same(const Rational& r, const Fraction& f) {
    using boost::multiprecision::denominator;
    using boost::multiprecision::numerator;
    return numerator(r) == static_cast<long long>(f.num) && denominator(r) == static_cast<long long>(f.den);
}

// Spikelets laid out on a row, none overlapping.
std::vector<Detection> spikelets(int healthy, int diseased) {
    std::vector<Detection> out;
    for (int i = 0; i < healthy + diseased; ++i) {
        out.push_back(make_det(10 + 12 * i, 20, 8, 8, 0, i < healthy ? "healthy" : "diseased", 0.9));
    }
    return out;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::io_error;
}

}  // namespace

TEST(FhbSingleSpike, Severity) {
    const auto backend = BackendBuilder().image("s", 200, 60).detections("fhb_spike_single", spikelets(6, 4)).build();
    const auto r = fhb_single_spike("s", backend, {});
    EXPECT_EQ(r.total_spikelets, 10u);
    EXPECT_EQ(r.diseased_spikelets, 4u);
    EXPECT_EQ(*r.severity(), Rational(2, 5));
}

TEST(FhbSingleSpike, AllHealthyAndEmpty) {
    const auto healthy = BackendBuilder().image("s", 200, 60).detections("fhb_spike_single", spikelets(5, 0)).build();
    EXPECT_EQ(*fhb_single_spike("s", healthy, {}).severity(), 0);
    const auto empty = BackendBuilder().image("s", 200, 60).detections("fhb_spike_single", {}).build();
    EXPECT_EQ(code_of([&] { fhb_single_spike("s", empty, {}); }), ErrorCode::no_spikelets);
}

TEST(FhbSingleSpike, MatchesMetricsOfSingleton) {
    const auto backend = BackendBuilder().image("s", 200, 60).detections("fhb_spike_single", spikelets(3, 4)).build();
    const auto r = fhb_single_spike("s", backend, {});
    const std::vector<SpikeFHBRecord> one{r};
    const auto s = fhb_metrics(one);
    ASSERT_TRUE(s);
    EXPECT_EQ(s->severity_all, *r.severity());
    EXPECT_EQ(s->severity_infected, *r.severity());
}

TEST(FhbMetrics, Examples) {
    const std::vector<SpikeFHBRecord> r{rec(0, 4, 0), rec(1, 4, 2), rec(2, 8, 2), rec(3, 5, 0)};
    const auto s = fhb_metrics(r);
    ASSERT_TRUE(s);
    EXPECT_EQ(s->n_assessed, 4u);
    EXPECT_EQ(s->n_infected, 2u);
    EXPECT_EQ(s->incidence, Rational(1, 2));
    EXPECT_EQ(s->severity_infected, Rational(3, 8));
    EXPECT_EQ(s->severity_all, Rational(3, 16));
    EXPECT_EQ(s->index, Rational(3, 16));
}

TEST(FhbMetrics, AllZeroAndEmpty) {
    const std::vector<SpikeFHBRecord> zeros{rec(0, 3, 0), rec(1, 7, 0)};
    const auto s = fhb_metrics(zeros);
    ASSERT_TRUE(s);
    EXPECT_EQ(s->incidence, 0);
    EXPECT_EQ(s->severity_infected, 0);
    EXPECT_EQ(s->severity_all, 0);
    EXPECT_EQ(s->index, 0);
    EXPECT_FALSE(fhb_metrics({}));
}

TEST(FhbMetrics, MatchesBruteForceFractions) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + trial % 17;
        std::vector<SpikeFHBRecord> records;
        for (int i = 0; i < n; ++i) {
            const int total = std::uniform_int_distribution<int>(1, 40)(rng);
            const int diseased = rng() % 3 == 0 ? 0 : std::uniform_int_distribution<int>(0, total)(rng);
            records.push_back(rec(i, total, diseased));
        }
        Fraction sum_all, sum_inf;
        int infected = 0;
        for (const auto& r : records) {
            const Fraction sev(r.diseased_spikelets, r.total_spikelets);
            sum_all = sum_all + sev;
            if (r.diseased_spikelets > 0) {
                ++infected;
                sum_inf = sum_inf + sev;
            }
        }
        const Fraction incidence(infected, n);
        const Fraction sev_inf = infected ? sum_inf / Fraction(infected) : Fraction(0);
        const auto s = fhb_metrics(records);
        ASSERT_TRUE(s);
        EXPECT_TRUE(same(s->incidence, incidence));
        EXPECT_TRUE(same(s->severity_all, sum_all / Fraction(n)));
        EXPECT_TRUE(same(s->severity_infected, sev_inf));
        EXPECT_TRUE(same(s->index, incidence * sev_inf));
        EXPECT_LE(0, s->index);
        EXPECT_LE(s->index, s->incidence);
        EXPECT_LE(s->incidence, 1);
        if (s->n_infected > 0) EXPECT_LE(s->severity_all, s->severity_infected);
    }
}

TEST(PaddedCrop, PaddedAndClamped) {
    EXPECT_EQ(geom::padded_crop(geom::OrientedBox(100, 100, 40, 20, 0), 0.1, 500, 500), (CropRect{76, 88, 124, 112}));
    EXPECT_EQ(geom::padded_crop(geom::OrientedBox(5, 5, 40, 20, 0), 0.1, 500, 500), (CropRect{0, 0, 29, 17}));
    const CropRect outside = geom::padded_crop(geom::OrientedBox(-100, -100, 10, 10, 0), 0.1, 50, 50);
    EXPECT_EQ(outside.width(), 0);
}

namespace {

// 5 spikes; verdicts keep 0, 2, 4; crop severities 1/5, 0, 1/2.
BackendBuilder field_fixture() {
    BackendBuilder b;
    b.image("plot7_a", 1000, 400);
    std::vector<Detection> spikes;
    for (int i = 0; i < 5; ++i) spikes.push_back(make_det(100 + 180 * i, 200, 40, 150, 0, "spike", 0.9));
    b.detections("spike", spikes);
    for (std::size_t i = 0; i < 5; ++i) {
        b.verdict("spike_view", i, i % 2 == 0, i == 2 ? infer::View::lateral : infer::View::frontal);
    }
    b.crop("fhb_spikelet", 0, spikelets(4, 1));
    b.crop("fhb_spikelet", 2, spikelets(6, 0));
    b.crop("fhb_spikelet", 4, spikelets(2, 2));
    return b;
}

}  // namespace

TEST(FhbField, ConstructedFixture) {
    const auto backend = field_fixture().build();
    const auto r = fhb_field_pipeline("plot7_a", backend, {});
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_EQ(r.records[0].spike_index, 0u);
    EXPECT_EQ(r.records[1].view, infer::View::lateral);
    ASSERT_TRUE(r.summary);
    EXPECT_EQ(r.summary->incidence, Rational(2, 3));
    EXPECT_EQ(r.summary->severity_infected, Rational(7, 20));
    EXPECT_EQ(r.summary->index, Rational(7, 30));
    EXPECT_NEAR(to_double(r.summary->index), 0.2333333, 1e-6);
    EXPECT_TRUE(r.warnings.empty());
    EXPECT_EQ(r.crops.at(0), (CropRect{76, 110, 124, 290}));
}

TEST(FhbField, AllDiscardedHasNoSummary) {
    auto b = field_fixture();
    for (std::size_t i = 0; i < 5; ++i) b.verdict("spike_view", i, false);
    const auto r = fhb_field_pipeline("plot7_a", b.build(), {});
    EXPECT_TRUE(r.records.empty());
    EXPECT_FALSE(r.summary);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_EQ(r.warnings[0].code, "no_assessable_spikes");
}

TEST(FhbField, SingleFullyDiseasedSpike) {
    auto b = field_fixture();
    for (std::size_t i = 0; i < 5; ++i) b.verdict("spike_view", i, i == 4);
    b.crop("fhb_spikelet", 4, spikelets(0, 5));
    const auto r = fhb_field_pipeline("plot7_a", b.build(), {});
    ASSERT_TRUE(r.summary);
    EXPECT_EQ(r.summary->incidence, 1);
    EXPECT_EQ(r.summary->severity_infected, 1);
    EXPECT_EQ(r.summary->index, 1);
}

TEST(FhbField, SpikeWithoutSpikeletsIsFlagged) {
    auto b = field_fixture();
    b.crop("fhb_spikelet", 2, {});
    const auto r = fhb_field_pipeline("plot7_a", b.build(), {});
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_EQ(r.records[1].total_spikelets, 0u);
    EXPECT_FALSE(r.records[1].severity());
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_EQ(r.warnings[0].code, "spike_without_spikelets");
    EXPECT_EQ(r.summary->n_assessed, 2u);
}

TEST(FhbField, MissingVerdictNamesSpike) {
    BackendBuilder b;
    b.image("x", 300, 300).detections("spike", {make_det(100, 100, 20, 60, 0, "spike", 0.9)});
    b.role("spike_view");
    try {
        fhb_field_pipeline("x", b.build(), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_verdict);
        EXPECT_NE(std::string(e.what()).find("spike 0"), std::string::npos);
    }
}

namespace {

std::vector<Detection> kernels(int healthy, int damaged) {
    std::vector<Detection> out;
    for (int i = 0; i < healthy + damaged; ++i) {
        out.push_back(make_det(20 + 30 * (i % 20), 20 + 30 * (i / 20), 20, 10, 0.3,
                               i < healthy ? "healthy" : "damaged", 0.8));
    }
    return out;
}

std::vector<geom::Point2> square(double cx, double cy, double area) {
    const double h = std::sqrt(area) / 2;
    return {{cx - h, cy - h}, {cx + h, cy - h}, {cx + h, cy + h}, {cx - h, cy + h}};
}

}  // namespace

TEST(Fdk, CountRatio) {
    const auto backend = BackendBuilder().image("k", 700, 300).detections("kernel", kernels(87, 13)).build();
    const auto r = fdk_assess("k", backend, {});
    EXPECT_EQ(r.total_kernels, 100u);
    EXPECT_EQ(r.damaged_kernels, 13u);
    EXPECT_EQ(r.fdk_ratio, Rational(13, 100));
    EXPECT_FALSE(r.area_weighted_ratio);
}

TEST(Fdk, NoKernels) {
    const auto backend = BackendBuilder().image("k", 100, 100).detections("kernel", {}).build();
    EXPECT_EQ(code_of([&] { fdk_assess("k", backend, {}); }), ErrorCode::no_kernels);
}

TEST(Fdk, AreaWeightedRatio) {
    BackendBuilder b;
    b.image("k", 400, 100);
    std::vector<Detection> dets{make_det(50, 50, 30, 30, 0, "damaged", 0.9), make_det(120, 50, 30, 30, 0, "damaged", 0.9),
                                make_det(200, 50, 30, 30, 0, "healthy", 0.9), make_det(300, 50, 30, 30, 0, "healthy", 0.9)};
    b.detections("kernel", dets);
    b.mask("kernel", 0, {{40, 45}, {50, 45}, {50, 50}, {40, 50}});      // 50 px^2
    b.mask("kernel", 1, {{110, 45}, {120, 45}, {120, 50}, {110, 50}});  // 50
    b.mask("kernel", 2, {{190, 40}, {200, 40}, {200, 50}, {190, 50}});  // 100
    b.mask("kernel", 3, square(300, 50, 300.0));                        // 300 (inexact root)
    const auto backend = b.build();
    const auto r = fdk_assess("k", backend, {}, &backend);
    ASSERT_TRUE(r.area_weighted_ratio);
    EXPECT_NEAR(to_double(*r.area_weighted_ratio), 0.2, 1e-12);
}

TEST(Fdk, CountsAreConserved) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const int h = trial % 9, d = 1 + trial % 5;
        const auto backend = BackendBuilder().image("k", 700, 300).detections("kernel", kernels(h, d)).build();
        const auto r = fdk_assess("k", backend, {});
        EXPECT_EQ(r.kernels.count_category("healthy") + r.damaged_kernels, r.total_kernels);
        EXPECT_EQ(r.fdk_ratio, Rational(d, h + d));
    }
}
