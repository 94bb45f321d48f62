#include "nistlimit/exactdist.hpp"
#include "nistlimit/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace nistlimit;

namespace {

TestSpec toy_spec(std::vector<double> probs, std::int64_t blocks) {
    TestSpec spec;
    spec.name = "toy";
    spec.block_size = 1;
    spec.blocks = blocks;
    spec.class_probs = probs;
    spec.null_probs = probs;
    spec.df = static_cast<int>(probs.size()) - 1;
    return spec;
}

TestSpec small_longest() {
    auto spec = longest_run_spec(128 * 20, 128);  // n_b = 20, k = 5
    return spec;
}

TestSpec small_overlap() {
    auto spec = overlapping_template_spec(kOverlapBlockSize * 30);  // n_b = 30, k = 5
    return spec;
}

TestSpec small_linear() {
    auto spec = linear_complexity_spec(500 * 15, 500);  // n_b = 15, k = 6
    return spec;
}

TestSpec small_excursion() {
    auto spec = random_excursion_spec(2);
    spec.blocks = 40;
    return spec;
}

void check_same(const CategoryDistribution& a, const CategoryDistribution& b) {
    REQUIRE(a.q.size() == b.q.size());
    for (std::size_t i = 0; i < a.q.size(); ++i) CHECK(a.q[i] == b.q[i]);
    CHECK(a.mass_accounted == b.mass_accounted);
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("nistlimit_test_" + name);
}

}  // namespace

TEST_CASE("interval_index") {
    CHECK(interval_index(0.0, 9) == 0);
    CHECK(interval_index(1.0, 9) == 9);
    CHECK(interval_index(0.1, 9) == 1);
    CHECK(interval_index(std::nextafter(0.1, 0.0), 9) == 0);
    CHECK(interval_index(0.3, 9) == 3);
    CHECK(interval_index(0.7, 9) == 7);
    CHECK(interval_index(0.9, 9) == 9);
    CHECK(interval_index(0.5, 1) == 1);
    for (int i = 0; i <= 19; ++i) {
        const double b = static_cast<double>(i) / 20.0;
        CHECK(interval_index(b, 19) == i);
        if (i > 0) CHECK(interval_index(std::nextafter(b, 0.0), 19) == i - 1);
    }
    CHECK_THROWS(interval_index(1.5, 9));
    CHECK_THROWS(interval_index(-0.1, 9));
}

TEST_CASE("composition cursor") {
    for (int k : {1, 2, 3, 5}) {
        for (std::int64_t nb : {0, 1, 4, 9}) {
            std::set<ClassCounts> seen;
            ClassCounts prev;
            std::size_t count = 0;
            for (CompositionCursor cur(k, nb); !cur.exhausted(); cur.next()) {
                const auto& x = cur.current();
                std::int64_t s = 0;
                for (auto v : x) {
                    CHECK(v >= 0);
                    s += v;
                }
                CHECK(s == nb);
                if (!prev.empty()) {
                    // colex: reversed tuples strictly increase
                    CHECK(std::lexicographical_compare(prev.rbegin(), prev.rend(), x.rbegin(), x.rend()));
                }
                prev = x;
                seen.insert(x);
                ++count;
            }
            CHECK(count == seen.size());
            CHECK(count == binomial_saturating(static_cast<std::uint64_t>(nb + k), static_cast<std::uint64_t>(k)));
        }
    }
}

TEST_CASE("estimate_workload") {
    CHECK(estimate_workload(overlapping_template_spec(1'000'000)) == 7193042070039ull);
    CHECK(estimate_workload(linear_complexity_spec(1'000'000, 500)) == 89826119286804901ull);
    CHECK(estimate_workload(longest_run_spec(1'000'000, 10000)) == 1705904746ull);
    TestSpec zero;
    zero.blocks = 10;
    zero.df = 0;
    CHECK(estimate_workload(zero) == 1);
    CHECK(binomial_saturating(1000000, 500) == UINT64_MAX);
}

TEST_CASE("enumerate_q hand example") {
    const auto spec = toy_spec({0.5, 0.5}, 2);
    EnumerationOptions opt;
    opt.nu = 1;
    const auto d = enumerate_q(spec, opt);
    // (2,0) and (0,2): T = 2, p = chi2_sf(1, 2) = 0.157 -> bin 0; (1,1): p = 1 -> bin 1
    CHECK(std::abs(d.q[0] - 0.5) <= 1e-15);
    CHECK(std::abs(d.q[1] - 0.5) <= 1e-15);
    CHECK(d.provenance == Provenance::Exact);
}

TEST_CASE("enumerate_q matches the naive oracle") {
    for (const auto& spec : {small_longest(), small_overlap(), small_linear(), small_excursion()}) {
        CAPTURE(spec.name);
        REQUIRE(estimate_workload(spec) <= 1'500'000);
        const auto fast = enumerate_q(spec);
        const auto slow = enumerate_q_naive(spec);
        for (std::size_t i = 0; i < fast.q.size(); ++i) CHECK(std::abs(fast.q[i] - slow.q[i]) <= 1e-12);
        CHECK(std::abs(fast.mass_accounted - 1.0) <= 1e-10);
    }
}

TEST_CASE("enumerate_q is partition invariant") {
    const auto spec = small_overlap();
    EnumerationOptions one;
    const auto base = enumerate_q(spec, one);
    for (std::size_t parts : {2u, 7u, 64u, 100000u}) {
        for (unsigned threads : {1u, 3u}) {
            EnumerationOptions opt;
            opt.partitions = parts;
            opt.threads = threads;
            check_same(base, enumerate_q(spec, opt));
        }
    }
}

TEST_CASE("enumerate_q refines consistently") {
    const auto spec = small_longest();
    EnumerationOptions coarse, fine;
    fine.nu = 19;
    const auto a = enumerate_q(spec, coarse);
    const auto b = enumerate_q(spec, fine);
    for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(b.q[2 * i] + b.q[2 * i + 1] - a.q[i]) <= 1e-12);
}

TEST_CASE("enumerate_q checkpoint and resume") {
    const auto spec = small_linear();
    EnumerationOptions plain;
    plain.partitions = 9;
    const auto base = enumerate_q(spec, plain);

    const auto path = temp_path("enum.ckpt");
    for (std::size_t stop : {1u, 4u, 8u}) {
        std::filesystem::remove(path);
        EnumerationOptions opt = plain;
        opt.checkpoint = path;
        opt.checkpoint_every = 1;
        opt.stop_after_slices = stop;
        CHECK_THROWS_AS(enumerate_q(spec, opt), EnumerationInterrupted);
        REQUIRE(std::filesystem::exists(path));
        // resume in two more legs
        opt.stop_after_slices = 3;
        try {
            enumerate_q(spec, opt);
        } catch (const EnumerationInterrupted&) {
        }
        opt.stop_after_slices.reset();
        check_same(base, enumerate_q(spec, opt));
    }

    EnumerationOptions other = plain;
    other.partitions = 5;
    other.checkpoint = path;
    CHECK_THROWS_AS(enumerate_q(spec, other), CheckpointMismatch);
    std::filesystem::remove(path);
}

TEST_CASE("enumerate_q budget") {
    EnumerationOptions opt;
    opt.budget = 1000;
    try {
        enumerate_q(small_overlap(), opt);
        FAIL("expected BudgetExceeded");
    } catch (const BudgetExceeded& e) {
        CHECK(e.estimated == estimate_workload(small_overlap()));
    }
}

TEST_CASE("binomial_scan_q frequency vs brute force") {
    for (std::int64_t n = 1; n <= 20; ++n) {
        std::vector<std::uint64_t> counts(10, 0);
        for (std::uint32_t v = 0; v < (1u << n); ++v) {
            BitBlock b(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) b.set(static_cast<std::size_t>(i), (v >> i) & 1u);
            ++counts[static_cast<std::size_t>(interval_index(frequency_test(b, 1), 9))];
        }
        const auto d = binomial_scan_q(BinomialModel::Frequency, n);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(d.q[i] == std::ldexp(static_cast<double>(counts[i]), -static_cast<int>(n)));
        }
    }
}

TEST_CASE("binomial_scan_q large n") {
    for (auto variant : {DftVariance::Sigma0, DftVariance::Sigma1, DftVariance::Sigma2}) {
        const auto d = binomial_scan_q(BinomialModel::Dft, 1'000'000, variant);
        CHECK(std::abs(d.mass_accounted - 1.0) <= 1e-10);
        for (double q : d.q) CHECK(q >= 0.0);
    }
    const auto f = binomial_scan_q(BinomialModel::Frequency, 1'000'000);
    CHECK(std::abs(f.mass_accounted - 1.0) <= 1e-10);
    // The large-n path agrees with the exact small-n path where both apply.
    const auto exact = binomial_scan_q(BinomialModel::Frequency, 60);
    const auto ratio = binomial_scan_q(BinomialModel::Frequency, 62);
    CHECK(std::abs(ratio.mass_accounted - 1.0) <= 1e-14);
    CHECK(exact.q.size() == ratio.q.size());
    CHECK_THROWS(binomial_scan_q(BinomialModel::Dft, 11));
}
