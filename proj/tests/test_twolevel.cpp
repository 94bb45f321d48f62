#include "nistlimit/discrepancy.hpp"
#include "nistlimit/exactdist.hpp"
#include "nistlimit/mcdist.hpp"
#include "nistlimit/numerics.hpp"
#include "nistlimit/twolevel.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace nistlimit;

namespace {

// Asymptotic Kolmogorov tail P(sqrt(n) D > t).
double kolmogorov_sf(double t) {
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * t * t);
    }
    return std::clamp(s, 0.0, 1.0);
}

}  // namespace

TEST_CASE("binning p-values") {
    const std::vector<double> p = {0.0, 0.5, 1.0};
    const auto h = bin_pvalues(p, 9);
    CHECK(h == std::vector<std::int64_t>{1, 0, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(bin_pvalues(std::vector<double>{}, 9) == std::vector<std::int64_t>(10, 0));

    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(12));
    std::vector<double> u(100000);
    for (auto& x : u) x = src.next_uniform();
    const auto hu = bin_pvalues(u, 9);
    const double sd = std::sqrt(100000 * 0.1 * 0.9);
    for (auto y : hu) CHECK(std::abs(static_cast<double>(y) - 10000.0) <= 5.0 * sd);
}

TEST_CASE("goodness of fit arithmetic") {
    const auto uni = SecondLevelNull::uniform(9);
    const std::vector<std::int64_t> flat(10, 30);
    const auto g0 = gof_chi2(flat, uni);
    CHECK(g0.chi2 == 0.0);
    CHECK(g0.p_second == 1.0);

    const auto half = SecondLevelNull::from_probs(NullKind::Exact, {0.5, 0.5});
    const auto g1 = gof_chi2(std::vector<std::int64_t>{7, 3}, half);
    CHECK(g1.chi2 == doctest::Approx(1.6).epsilon(1e-14));
    CHECK(g1.p_second == doctest::Approx(chi2_sf(1, 1.6)).epsilon(1e-14));

    CHECK_THROWS_AS(SecondLevelNull::from_probs(NullKind::Exact, {1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(SecondLevelNull::from_probs(NullKind::Exact, {0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(gof_chi2(std::vector<std::int64_t>(10, 0), uni), std::invalid_argument);
    CHECK_THROWS_AS(gof_chi2(std::vector<std::int64_t>{1, 2}, uni), std::invalid_argument);
}

TEST_CASE("second-level p-values are uniform under the null") {
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(13));
    const auto null = SecondLevelNull::from_probs(NullKind::Exact, {0.05, 0.1, 0.15, 0.2, 0.1, 0.1, 0.1, 0.05, 0.1, 0.05});
    const int reps = 10000;
    std::vector<double> ps;
    ps.reserve(reps);
    for (int r = 0; r < reps; ++r) {
        const auto x = multinomial_sample(2000, null.p, src);
        ps.push_back(gof_chi2(x, null).p_second);
    }
    std::sort(ps.begin(), ps.end());
    double d = 0.0;
    for (int i = 0; i < reps; ++i) {
        d = std::max({d, ps[i] - static_cast<double>(i) / reps, static_cast<double>(i + 1) / reps - ps[i]});
    }
    CHECK(kolmogorov_sf(std::sqrt(static_cast<double>(reps)) * d) > 1e-3);
}

TEST_CASE("test identifiers and configuration") {
    CHECK(parse_test_id("longest") == TestId::Longest);
    CHECK(parse_test_id("block-frequency") == TestId::BlockFrequency);
    CHECK(to_string(TestId::Excursion) == "excursion");
    CHECK_THROWS_AS(parse_test_id("rank"), std::invalid_argument);
    CHECK_THROWS_AS((TestConfig{TestId::Longest, 100000, 64}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((TestConfig{TestId::Dft, 1001, 0}).validate(), std::invalid_argument);
    CHECK((TestConfig{TestId::Excursion, 1000000, 0}).series_labels().size() == 8);
}

TEST_CASE("two-level runs are deterministic and thread independent") {
    const TestConfig test{TestId::Longest, 128 * 20, 128};
    const std::vector<SecondLevelNull> nulls = {SecondLevelNull::uniform()};
    auto a = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(5));
    auto b = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(5));
    auto c = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(5));
    const auto r1 = run_two_level(a, test, 1000, nulls, 1);
    const auto r2 = run_two_level(b, test, 1000, nulls, 1);
    const auto r3 = run_two_level(c, test, 1000, nulls, 3);
    REQUIRE(r1.series.size() == 1);
    CHECK(r1.series[0].histogram == r2.series[0].histogram);
    CHECK(r1.series[0].histogram == r3.series[0].histogram);
    CHECK(r1.series[0].p_second == r3.series[0].p_second);
    std::int64_t total = 0;
    for (auto y : r1.series[0].histogram) total += y;
    CHECK(total == 1000);
    CHECK(a.position() == 1000u * 128 * 20);
}

TEST_CASE("random excursions: eight histograms and discarded segments") {
    // About half of the 400000-bit segments hold fewer than 500 cycles.
    const TestConfig test{TestId::Excursion, 400000, 0};
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(6));
    const std::vector<SecondLevelNull> nulls = {SecondLevelNull::uniform()};
    const auto c = collect_pvalues(src, test, 40);
    CHECK(c.discarded > 0);
    CHECK(c.segments == static_cast<std::uint64_t>(40 + c.discarded));
    REQUIRE(c.histograms.size() == 8);
    for (const auto& h : c.histograms) {
        std::int64_t total = 0;
        for (auto y : h) total += y;
        CHECK(total == 40);
    }
    const auto r = evaluate_two_level(c, nulls);
    CHECK(r.series.size() == 8);
    CHECK(r.series[0].label == "x=-4");
    CHECK(r.discarded == c.discarded);
}

TEST_CASE("collection is reusable across nulls") {
    const TestConfig test{TestId::Longest, 128 * 20, 128};
    auto src = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(7));
    const auto c = collect_pvalues(src, test, 500);
    const auto exact = enumerate_q(longest_run_spec(test.n, test.m));
    const std::vector<SecondLevelNull> u = {SecondLevelNull::uniform()};
    const std::vector<SecondLevelNull> e = {SecondLevelNull::from_probs(NullKind::Exact, exact.q)};
    const auto ru = evaluate_two_level(c, u);
    const auto re = evaluate_two_level(c, e);
    CHECK(ru.series[0].histogram == re.series[0].histogram);
    CHECK(ru.series[0].chi2 != re.series[0].chi2);
    const std::vector<SecondLevelNull> wrong = {SecondLevelNull::uniform(), SecondLevelNull::uniform()};
    CHECK_THROWS_AS(evaluate_two_level(c, wrong), std::invalid_argument);
}

TEST_CASE("file sources run dry") {
    auto gen = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(2));
    auto src = BitSource::from_bits(gen.next_block(10000));
    const TestConfig test{TestId::Frequency, 1000, 0};
    const std::vector<SecondLevelNull> nulls = {SecondLevelNull::uniform()};
    CHECK_THROWS_AS(run_two_level(src, test, 11, nulls), SourceExhausted);
}

TEST_CASE("exact null removes the shift; uniform null shows it") {
    // Longest run, m = 128, n_b = 20: q is far from uniform, so N_0.0001 is small.
    const TestConfig test{TestId::Longest, 128 * 20, 128};
    const auto exact = enumerate_q(longest_run_spec(test.n, test.m));
    const auto report = make_discrepancy_report(exact);
    REQUIRE(report.n_risky.has_value());
    const std::int64_t N = *report.n_risky;
    MESSAGE("delta = " << report.delta << ", u = " << report.u << ", N_0.0001 = " << N);

    const std::vector<SecondLevelNull> ue = {SecondLevelNull::uniform()};
    const std::vector<SecondLevelNull> ex = {SecondLevelNull::from_probs(NullKind::Exact, exact.q)};
    int rejections = 0;
    double mean_uniform = 0.0;
    double sq_uniform = 0.0;
    const int runs = 100;
    for (int r = 0; r < runs; ++r) {
        auto src = BitSource::generator(GeneratorKind::Mt19937, experiment_seed(static_cast<std::uint64_t>(r)));
        const auto c = collect_pvalues(src, test, N);
        if (evaluate_two_level(c, ex).series[0].p_second < 1e-4) ++rejections;
        const double chi = evaluate_two_level(c, ue).series[0].chi2;
        mean_uniform += chi;
        sq_uniform += chi * chi;
    }
    CHECK(rejections <= 3);
    mean_uniform /= runs;
    const double se = std::sqrt((sq_uniform / runs - mean_uniform * mean_uniform) / runs);
    const auto [lo, hi] = expected_chi2_window(N, report.delta, report.u);
    CHECK(mean_uniform >= lo - 4.0 * se);
    CHECK(mean_uniform <= hi + 4.0 * se);
}
