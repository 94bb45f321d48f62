#pragma once

// Second-level test: N first-level p-values from disjoint n-bit segments,
// binned into nu+1 intervals and compared with a null by chi-squared GOF.

#include "nistlimit/bitgen.hpp"
#include "nistlimit/onelevel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nistlimit {

enum class NullKind { Uniform, Exact, MC };

std::string_view to_string(NullKind kind);

struct SecondLevelNull {
    NullKind kind = NullKind::Uniform;
    std::vector<double> p;

    static SecondLevelNull uniform(int nu = 9);
    /// Throws std::invalid_argument unless every p_i > 0 and the sum is 1
    /// within 1e-9.
    static SecondLevelNull from_probs(NullKind kind, std::vector<double> p);
    [[nodiscard]] int nu() const noexcept { return static_cast<int>(p.size()) - 1; }
};

std::vector<std::int64_t> bin_pvalues(std::span<const double> pvals, int nu = 9);

struct GofResult {
    double chi2 = 0.0;
    double p_second = 1.0;
};

/// chi2 = sum (Y_i - N p_i)^2 / (N p_i) and p_second = chi2_sf(nu, chi2).
GofResult gof_chi2(std::span<const std::int64_t> hist, const SecondLevelNull& null);

enum class TestId { Frequency, BlockFrequency, Longest, Overlap, Linear, Excursion, Dft };

std::string_view to_string(TestId id);
TestId parse_test_id(std::string_view name);

struct TestConfig {
    TestId id = TestId::Longest;
    std::int64_t n = 1'000'000;
    /// Block length where the test has one (block-frequency, longest, linear).
    std::int64_t m = 0;
    DftVariance sigma = DftVariance::Sigma2;

    /// Throws std::invalid_argument for unusable parameters.
    void validate() const;
    /// One series per p-value a segment yields: 8 for excursions, else 1.
    [[nodiscard]] std::vector<std::string> series_labels() const;
};

/// p-values of one segment, or nothing when the test yields no result.
std::optional<std::vector<double>> run_one_level(const TestConfig& test, const BitBlock& segment);

/// Histograms of N results per series, reusable across nulls.
struct PValueCollection {
    TestConfig test;
    int nu = 9;
    std::int64_t N = 0;
    std::vector<std::string> labels;
    std::vector<std::vector<std::int64_t>> histograms;
    std::int64_t discarded = 0;
    std::uint64_t segments = 0;
    std::string source;
};

/// Reads segments until N of them yield results. Segments are evaluated in
/// batches by index, so histograms do not depend on `threads`.
/// Throws SourceExhausted when the source runs dry.
PValueCollection collect_pvalues(BitSource& source, const TestConfig& test, std::int64_t N, int nu = 9,
                                 unsigned threads = 1);

struct SeriesResult {
    std::string label;
    std::vector<std::int64_t> histogram;
    double chi2 = 0.0;
    double p_second = 1.0;
};

struct TwoLevelResult {
    TestConfig test;
    std::int64_t N = 0;
    std::int64_t discarded = 0;
    std::vector<SecondLevelNull> nulls;
    std::vector<SeriesResult> series;
    std::string source;
};

/// `nulls` holds one null shared by every series or one per series.
TwoLevelResult evaluate_two_level(const PValueCollection& collection, std::span<const SecondLevelNull> nulls);

TwoLevelResult run_two_level(BitSource& source, const TestConfig& test, std::int64_t N,
                             std::span<const SecondLevelNull> nulls, unsigned threads = 1);

}  // namespace nistlimit
